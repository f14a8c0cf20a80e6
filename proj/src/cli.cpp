#include "odgen/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "odgen/baselines.hpp"
#include "odgen/data.hpp"
#include "odgen/errors.hpp"
#include "odgen/metrics.hpp"
#include "odgen/pipeline.hpp"

namespace odgen::cli {

namespace fs = std::filesystem;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json parse_json(const std::string& text, const std::string& path) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << text;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path.string() : (base / path).lexically_normal().string();
}

struct CityPaths {
  std::string regions;
  std::string od;
};

struct RunConfig {
  std::string run_dir;
  std::vector<CityPaths> train;
  CascadeConfig cascade;
  std::string mass_feature = "population";
};

RunConfig parse_run_config(const nlohmann::json& j, const fs::path& base) {
  if (!j.is_object()) throw ValidationError("run config must be a JSON object");
  RunConfig rc;
  if (j.contains("run_dir")) rc.run_dir = resolve(base, j.at("run_dir").get<std::string>());
  if (!j.contains("train") || !j.at("train").is_array() || j.at("train").empty())
    throw ValidationError("run config needs a non-empty 'train' list of {regions, od} entries");
  for (const auto& entry : j.at("train")) {
    if (!entry.contains("regions") || !entry.contains("od"))
      throw ValidationError("each 'train' entry needs 'regions' and 'od' paths");
    rc.train.push_back({resolve(base, entry.at("regions").get<std::string>()),
                        resolve(base, entry.at("od").get<std::string>())});
  }
  if (j.contains("cascade")) rc.cascade = j.at("cascade").get<CascadeConfig>();
  rc.mass_feature = j.value("mass_feature", rc.mass_feature);
  return rc;
}

// Appends one `epoch,loss` line per call and flushes, so partial curves survive an abort.
class CurveWriter {
 public:
  explicit CurveWriter(const std::string& path) : out_(path) {
    if (!out_) throw ValidationError("cannot write " + path);
    out_ << "epoch,loss\n";
  }
  void operator()(int epoch, double loss) { out_ << epoch << ',' << fmt(loss) << '\n' << std::flush; }

 private:
  std::ofstream out_;
};

int cmd_synth(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<int> n,
              const std::string& out_dir, std::ostream& out) {
  data::SyntheticCitySpec spec;
  nlohmann::json j = config_path.empty() ? nlohmann::json::object() : parse_json(read_text(config_path), config_path);
  if (seed) j["seed"] = *seed;
  if (n) j["n"] = *n;
  spec = j.get<data::SyntheticCitySpec>();
  fs::create_directories(out_dir);
  const data::CityData city = data::make_synthetic_city(spec);
  data::save_city(out_dir + "/regions.csv", out_dir + "/od.csv", city);
  write_text(out_dir + "/spec.json", nlohmann::json(spec).dump(2) + "\n");
  out << "wrote " << out_dir << "/regions.csv and " << out_dir << "/od.csv (N = " << city.city.size()
      << ", NZR = " << fmt(to_adjacency(city.od).density()) << ")\n";
  return kOk;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_override,
              std::ostream& out, std::ostream& err) {
  const std::string text = read_text(config_path);
  nlohmann::json j = parse_json(text, config_path);
  const fs::path base = fs::path(config_path).parent_path();
  if (seed) j["cascade"]["seed"] = *seed;
  RunConfig rc = parse_run_config(j, base);
  if (!out_override.empty()) rc.run_dir = out_override;
  if (rc.run_dir.empty()) throw ValidationError("no run directory: set 'run_dir' or pass --out");

  std::vector<data::CityData> cities;
  for (const CityPaths& p : rc.train) cities.push_back(data::load_city(p.regions, p.od));
  for (const data::CityData& c : cities)
    if (c.city.manifest() != cities.front().city.manifest())
      throw ValidationError("training cities have different feature manifests");
  cities.front().city.feature_index(rc.mass_feature);

  fs::create_directories(rc.run_dir);
  write_text(rc.run_dir + "/config.json", text);
  nlohmann::json resolved = j;
  resolved["cascade"] = rc.cascade;
  resolved["run_dir"] = rc.run_dir;
  write_text(rc.run_dir + "/resolved_config.json", resolved.dump(2) + "\n");

  std::vector<SourceCity> sources;
  std::vector<gravity::CityFlows> flows;
  for (const data::CityData& c : cities) {
    sources.push_back({&c.city, &c.od});
    flows.push_back({&c.city, &c.od});
  }
  try {
    write_text(rc.run_dir + "/gravity.json", nlohmann::json(gravity::fit_gravity(flows, rc.mass_feature)).dump(2) + "\n");
  } catch (const FitError& e) {
    err << "warning: gravity baseline not fitted: " << e.what() << '\n';
  }

  CurveWriter topo_curve(rc.run_dir + "/topology_loss.csv");
  CurveWriter flow_curve(rc.run_dir + "/flow_loss.csv");
  CascadeCallbacks callbacks{[&](int e, double l) { topo_curve(e, l); }, [&](int e, double l) { flow_curve(e, l); }};
  const CascadeTraining trained = train_cascade(sources, rc.cascade, callbacks);
  save_cascade(rc.run_dir, trained.cascade);
  for (std::size_t k = 0; k < trained.flow_masks.size(); ++k)
    data::save_adjacency(rc.run_dir + "/flow_mask_" + std::to_string(k) + ".csv", trained.flow_masks[k]);
  out << "trained " << trained.topology.losses.size() << " topology epochs"
      << (trained.topology.early_stopped ? " (early stop)" : "") << " and " << trained.flow.losses.size()
      << " flow epochs" << (trained.flow.early_stopped ? " (early stop)" : "") << "; run directory " << rc.run_dir
      << '\n';
  return kOk;
}

int cmd_generate(const std::string& run_dir, const std::string& regions, const std::string& out_dir,
                 std::optional<std::uint64_t> seed, bool with_gravity, std::ostream& out) {
  const TrainedCascade cascade = load_cascade(run_dir);
  const CityCharacteristics target = data::load_regions(regions);
  if (target.manifest() != cascade.manifest()) throw ValidationError("target city feature manifest does not match the run");
  fs::create_directories(out_dir);
  std::mt19937_64 rng(seed.value_or(cascade.config.seed));
  const GeneratedOD g = generate_od(target, cascade, rng);
  data::save_od(out_dir + "/od.csv", g.od);
  data::save_adjacency(out_dir + "/adjacency.csv", g.adjacency);
  if (with_gravity) {
    const auto params = parse_json(read_text(run_dir + "/gravity.json"), run_dir + "/gravity.json")
                            .get<gravity::GravityParams>();
    data::save_od(out_dir + "/gravity_od.csv", gravity::generate_gravity(target, params));
  }
  out << "generated " << target.size() << "x" << target.size() << " OD matrix, NZR = " << fmt(g.adjacency.density())
      << ", total flow = " << fmt(g.od.total()) << '\n';
  return kOk;
}

int cmd_evaluate(const std::string& real_path, const std::string& generated_path, const std::string& regions,
                 std::optional<int> n_flag, const std::string& config_path, const std::string& out_dir,
                 std::ostream& out) {
  int n = 0;
  if (!regions.empty())
    n = data::load_regions(regions).size();
  else if (n_flag)
    n = *n_flag;
  else
    throw ValidationError("evaluate needs --regions or --n to size the matrices");
  if (n < 1) throw ValidationError("--n must be positive");
  metrics::EvaluationConfig config;
  bool export_plot = true;
  if (!config_path.empty()) {
    const nlohmann::json j = parse_json(read_text(config_path), config_path);
    if (j.contains("binning")) config.binning = j.at("binning").get<metrics::BinningConfig>();
    config.powerlaw.bins = j.value("powerlaw_bins", config.powerlaw.bins);
    export_plot = j.value("export_plot_data", export_plot);
  }
  const ODMatrix real = data::load_od(real_path, n);
  const ODMatrix generated = data::load_od(generated_path, n);
  const metrics::EvaluationReport report = metrics::evaluate(real, generated, config);
  fs::create_directories(out_dir);
  write_text(out_dir + "/report.txt", report.to_text());
  write_text(out_dir + "/report.json", report.to_json().dump(2) + "\n");
  if (export_plot) metrics::write_plot_data(out_dir + "/plot_data.csv", metrics::plot_data(real, generated, config.powerlaw.bins));
  out << report.to_text();
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cascaded diffusion generator for origin-destination matrices", "odgen"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic city (regions.csv, od.csv)");
  std::optional<int> synth_n;
  synth->add_option("--config", config, "Synthetic city spec (JSON)");
  synth->add_option("--seed", seed, "Override the city seed");
  synth->add_option("--n", synth_n, "Override the region count");
  synth->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* train = app.add_subcommand("train", "Train the topology and flow models");
  train->add_option("--config", config, "Run config (JSON)")->required();
  train->add_option("--seed", seed, "Override the cascade seed");
  train->add_option("--out", out_dir, "Override the run directory");

  CLI::App* generate = app.add_subcommand("generate", "Generate an OD matrix for a target city");
  std::string run_dir;
  std::string regions;
  bool with_gravity = false;
  generate->add_option("--run", run_dir, "Run directory from `train`")->required();
  generate->add_option("--regions", regions, "Target regions file")->required();
  generate->add_option("--seed", seed, "Sampling seed (defaults to the run seed)");
  generate->add_option("--out", out_dir, "Output directory")->required();
  generate->add_flag("--gravity", with_gravity, "Also write the gravity baseline prediction");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Compare a generated OD matrix to the real one");
  std::string real_path;
  std::string generated_path;
  std::optional<int> eval_n;
  evaluate->add_option("--real", real_path, "Real OD file")->required();
  evaluate->add_option("--generated", generated_path, "Generated OD file")->required();
  evaluate->add_option("--regions", regions, "Regions file fixing N");
  evaluate->add_option("--n", eval_n, "Region count when no regions file is given");
  evaluate->add_option("--config", config, "Evaluation config (JSON)");
  evaluate->add_option("--seed", seed, "Unused; accepted for a uniform interface");
  evaluate->add_option("--out", out_dir, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (synth->parsed()) return cmd_synth(config, seed, synth_n, out_dir, out);
    if (train->parsed()) return cmd_train(config, seed, out_dir, out, err);
    if (generate->parsed()) return cmd_generate(run_dir, regions, out_dir, seed, with_gravity, out);
    if (evaluate->parsed()) return cmd_evaluate(real_path, generated_path, regions, eval_n, config, out_dir, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const nlohmann::json::exception& e) {
    err << "error: invalid configuration: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kInvalid;
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr); }

}  // namespace odgen::cli
