#include "odgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "odgen/errors.hpp"

namespace odgen::metrics {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ValidationError("matrices differ in shape");
  if (a.size() == 0) throw ValidationError("empty matrix");
}

std::vector<double> positives(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v)
    if (x > 0.0) out.push_back(x);
  return out;
}

std::vector<double> log_edges(double lo, double hi, int bins) {
  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int k = 0; k <= bins; ++k) edges[static_cast<std::size_t>(k)] = std::exp(a + (b - a) * k / bins);
  edges.front() = lo;
  edges.back() = hi;
  return edges;
}

// Index of the log bin holding x, with the last bin closed on the right.
int bin_of(double x, const std::vector<double>& edges) {
  const int bins = static_cast<int>(edges.size()) - 1;
  if (x >= edges.back()) return bins - 1;
  auto it = std::upper_bound(edges.begin(), edges.end(), x);
  return std::clamp(static_cast<int>(it - edges.begin()) - 1, 0, bins - 1);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

double rmse(const Matrix& real, const Matrix& generated) {
  check_same_shape(real, generated);
  return std::sqrt((real - generated).squaredNorm() / static_cast<double>(real.size()));
}

double nrmse(const Matrix& real, const Matrix& generated) {
  check_same_shape(real, generated);
  const double mean = real.mean();
  const double sd = std::sqrt((real.array() - mean).square().mean());
  if (!(sd > 0.0)) throw ValidationError("NRMSE is undefined for a constant real matrix");
  return rmse(real, generated) / sd;
}

double cpc(const Matrix& real, const Matrix& generated) {
  check_same_shape(real, generated);
  if ((real.array() < 0.0).any() || (generated.array() < 0.0).any())
    throw ValidationError("CPC needs non-negative matrices");
  const double denom = real.sum() + generated.sum();
  if (denom == 0.0) return 1.0;
  return 2.0 * real.cwiseMin(generated).sum() / denom;
}

double cpc_binary(const AdjacencyMatrix& real, const AdjacencyMatrix& generated) {
  return cpc(real.values(), generated.values());
}

double jsd(const Vector& p, const Vector& q, double eps) {
  if (p.size() == 0 || q.size() == 0) throw ValidationError("jsd needs non-empty histograms");
  if (p.size() != q.size()) throw ValidationError("jsd histograms must share a binning");
  if ((p.array() < 0.0).any() || (q.array() < 0.0).any()) throw ValidationError("histograms must be non-negative");
  const double ps = p.sum();
  const double qs = q.sum();
  if (!(ps > 0.0) || !(qs > 0.0)) throw ValidationError("jsd histograms must have positive mass");
  Vector P = (p / ps).array() + eps;
  Vector Q = (q / qs).array() + eps;
  P /= P.sum();
  Q /= Q.sum();
  double kl_pq = 0.0;
  double kl_qp = 0.0;
  for (Eigen::Index k = 0; k < P.size(); ++k) {
    kl_pq += P(k) * std::log(P(k) / Q(k));
    kl_qp += Q(k) * std::log(Q(k) / P(k));
  }
  return std::max(0.0, 0.5 * (kl_pq + kl_qp));
}

void BinningConfig::validate() const {
  if (max_bins < 1 || min_bins < 1 || min_bins > max_bins) throw ValidationError("invalid histogram bin counts");
  if (!(eps > 0.0)) throw ValidationError("histogram smoothing must be positive");
}

void to_json(nlohmann::json& j, const BinningConfig& c) {
  j = nlohmann::json{{"max_bins", c.max_bins}, {"min_bins", c.min_bins}, {"adaptive", c.adaptive}, {"eps", c.eps}};
}

void from_json(const nlohmann::json& j, BinningConfig& c) {
  c.max_bins = j.value("max_bins", c.max_bins);
  c.min_bins = j.value("min_bins", c.min_bins);
  c.adaptive = j.value("adaptive", c.adaptive);
  c.eps = j.value("eps", c.eps);
  c.validate();
}

int log_bin_count(std::size_t positives, const BinningConfig& config) {
  config.validate();
  if (!config.adaptive) return config.max_bins;
  const int root = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(positives))));
  return std::clamp(root, config.min_bins, config.max_bins);
}

HistogramPair histogram_pair(const std::vector<double>& real, const std::vector<double>& generated,
                             const BinningConfig& config) {
  if (real.empty() || generated.empty()) throw ValidationError("histograms need non-empty samples");
  for (const auto* v : {&real, &generated})
    for (double x : *v)
      if (!std::isfinite(x) || x < 0.0) throw ValidationError("statistic samples must be finite and non-negative");
  const std::vector<double> pr = positives(real);
  const std::vector<double> pg = positives(generated);
  HistogramPair out;
  if (pr.empty() && pg.empty()) {
    out.real = Vector::Constant(1, static_cast<double>(real.size()));
    out.generated = Vector::Constant(1, static_cast<double>(generated.size()));
    return out;
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto* v : {&pr, &pg})
    for (double x : *v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  const int bins = log_bin_count(pr.size() + pg.size(), config);
  if (hi <= lo) hi = lo * (1.0 + 1e-9);
  out.edges = log_edges(lo, hi, bins);
  auto count = [&](const std::vector<double>& v) {
    Vector h = Vector::Zero(bins + 1);
    for (double x : v) {
      if (x > 0.0)
        h(1 + bin_of(x, out.edges)) += 1.0;
      else
        h(0) += 1.0;
    }
    return h;
  };
  out.real = count(real);
  out.generated = count(generated);
  return out;
}

double statistic_jsd(const std::vector<double>& real, const std::vector<double>& generated,
                     const BinningConfig& config) {
  const HistogramPair h = histogram_pair(real, generated, config);
  return jsd(h.real, h.generated, config.eps);
}

Confusion topology_confusion(const AdjacencyMatrix& real, const AdjacencyMatrix& generated) {
  check_same_shape(real.values(), generated.values());
  Confusion c;
  const int n = real.size();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const bool r = real(i, j);
      const bool g = generated(i, j);
      if (r && g) ++c.true_positive;
      if (r && !g) ++c.false_negative;
      if (!r && g) ++c.false_positive;
      if (!r && !g) ++c.true_negative;
    }
  const double cells = static_cast<double>(n) * n;
  const long long ones = c.true_positive + c.false_negative;
  const long long zeros = c.false_positive + c.true_negative;
  c.accuracy = static_cast<double>(c.true_positive + c.true_negative) / cells;
  c.fn_undefined = ones == 0;
  c.fp_undefined = zeros == 0;
  c.fn_rate = c.fn_undefined ? 0.0 : static_cast<double>(c.false_negative) / static_cast<double>(ones);
  c.fp_rate = c.fp_undefined ? 0.0 : static_cast<double>(c.false_positive) / static_cast<double>(zeros);
  c.nzr_real = real.density();
  c.nzr_generated = generated.density();
  return c;
}

DensityTable log_density(const std::vector<double>& samples, int bins) {
  if (bins < 1) throw ValidationError("density needs at least one bin");
  std::vector<double> x = positives(samples);
  DensityTable table;
  if (x.empty()) return table;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  for (double& v : x) v /= mean;
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (hi <= lo) {
    table.centers.push_back(lo);
    table.densities.push_back(std::numeric_limits<double>::infinity());
    return table;
  }
  const std::vector<double> edges = log_edges(lo, hi, bins);
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (double v : x) counts[static_cast<std::size_t>(bin_of(v, edges))] += 1.0;
  for (int k = 0; k < bins; ++k) {
    const auto s = static_cast<std::size_t>(k);
    table.centers.push_back(std::sqrt(edges[s] * edges[s + 1]));
    table.densities.push_back(counts[s] / (static_cast<double>(x.size()) * (edges[s + 1] - edges[s])));
  }
  return table;
}

PowerLawFit powerlaw_fit(const std::vector<double>& samples, const PowerLawConfig& config) {
  if (config.bins < 3) throw ValidationError("power-law fit needs at least 3 bins");
  if (positives(samples).size() < 10) throw ValidationError("power-law fit needs at least 10 positive samples");
  const DensityTable table = log_density(samples, config.bins);
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t k = 0; k < table.centers.size(); ++k)
    if (table.densities[k] > 0.0 && std::isfinite(table.densities[k])) {
      xs.push_back(std::log10(table.centers[k]));
      ys.push_back(std::log10(table.densities[k]));
    }
  if (xs.size() < 3) throw FitError("power-law fit needs at least 3 non-empty bins");
  const auto m = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double sse = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double r = ys[k] - (intercept + slope * xs[k]);
    sse += r * r;
  }
  PowerLawFit fit;
  fit.exponent = std::abs(slope);
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  fit.bins_used = static_cast<int>(xs.size());
  return fit;
}

std::vector<double> inflow_samples(const ODMatrix& od) {
  const NodeFlux f = node_flux(od);
  return {f.inflow.data(), f.inflow.data() + f.inflow.size()};
}

std::vector<double> outflow_samples(const ODMatrix& od) {
  const NodeFlux f = node_flux(od);
  return {f.outflow.data(), f.outflow.data() + f.outflow.size()};
}

std::vector<double> odflow_samples(const ODMatrix& od) {
  const Matrix& v = od.values();
  return {v.data(), v.data() + v.size()};
}

std::vector<double> degree_samples(const ODMatrix& od) {
  const Vector deg = to_adjacency(od).values().rowwise().sum();
  return {deg.data(), deg.data() + deg.size()};
}

EvaluationReport evaluate(const ODMatrix& real, const ODMatrix& generated, const EvaluationConfig& config) {
  check_same_shape(real.values(), generated.values());
  EvaluationReport r;
  r.rmse = rmse(real.values(), generated.values());
  try {
    r.nrmse = nrmse(real.values(), generated.values());
  } catch (const ValidationError&) {
    r.nrmse = std::numeric_limits<double>::quiet_NaN();
  }
  r.cpc = cpc(real.values(), generated.values());
  r.jsd_inflow = statistic_jsd(inflow_samples(real), inflow_samples(generated), config.binning);
  r.jsd_outflow = statistic_jsd(outflow_samples(real), outflow_samples(generated), config.binning);
  r.jsd_odflow = statistic_jsd(odflow_samples(real), odflow_samples(generated), config.binning);
  r.jsd_degree = statistic_jsd(degree_samples(real), degree_samples(generated), config.binning);
  const AdjacencyMatrix mr = to_adjacency(real);
  const AdjacencyMatrix mg = to_adjacency(generated);
  r.cpc_binary = cpc_binary(mr, mg);
  r.topology = topology_confusion(mr, mg);
  const std::pair<const char*, const ODMatrix*> sources[] = {{"real", &real}, {"generated", &generated}};
  for (const auto& [stat, fn] : {std::pair{"inflow", &inflow_samples}, std::pair{"odflow", &odflow_samples}}) {
    for (const auto& [label, od] : sources) {
      PowerLawFit fit;
      try {
        fit = powerlaw_fit(fn(*od), config.powerlaw);
      } catch (const std::exception&) {
        fit.exponent = std::numeric_limits<double>::quiet_NaN();
        fit.r2 = std::numeric_limits<double>::quiet_NaN();
      }
      r.powerlaw.emplace_back(std::string(stat) + "_" + label, fit);
    }
  }
  return r;
}

std::string EvaluationReport::to_text() const {
  std::ostringstream os;
  auto line = [&os](const std::string& k, double v) { os << k << '=' << fmt(v) << '\n'; };
  line("rmse", rmse);
  line("nrmse", nrmse);
  line("cpc", cpc);
  line("jsd_inflow", jsd_inflow);
  line("jsd_outflow", jsd_outflow);
  line("jsd_odflow", jsd_odflow);
  line("jsd_degree", jsd_degree);
  line("cpc_binary", cpc_binary);
  line("nzr_real", topology.nzr_real);
  line("nzr_generated", topology.nzr_generated);
  line("accuracy", topology.accuracy);
  line("fn_rate", topology.fn_rate);
  line("fp_rate", topology.fp_rate);
  os << "fn_undefined=" << (topology.fn_undefined ? "true" : "false") << '\n';
  os << "fp_undefined=" << (topology.fp_undefined ? "true" : "false") << '\n';
  for (const auto& [key, fit] : powerlaw) {
    line("powerlaw_exponent_" + key, fit.exponent);
    line("powerlaw_r2_" + key, fit.r2);
  }
  return os.str();
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json j;
  j["rmse"] = number_or_null(rmse);
  j["nrmse"] = number_or_null(nrmse);
  j["cpc"] = cpc;
  j["jsd_inflow"] = jsd_inflow;
  j["jsd_outflow"] = jsd_outflow;
  j["jsd_odflow"] = jsd_odflow;
  j["jsd_degree"] = jsd_degree;
  j["cpc_binary"] = cpc_binary;
  j["nzr_real"] = topology.nzr_real;
  j["nzr_generated"] = topology.nzr_generated;
  j["accuracy"] = topology.accuracy;
  j["fn_rate"] = topology.fn_rate;
  j["fp_rate"] = topology.fp_rate;
  j["fn_undefined"] = topology.fn_undefined;
  j["fp_undefined"] = topology.fp_undefined;
  nlohmann::json pl = nlohmann::json::object();
  for (const auto& [key, fit] : powerlaw)
    pl[key] = {{"exponent", number_or_null(fit.exponent)}, {"r2", number_or_null(fit.r2)}, {"bins_used", fit.bins_used}};
  j["powerlaw"] = pl;
  return j;
}

std::vector<PlotRow> plot_data(const ODMatrix& real, const ODMatrix& generated, int bins) {
  std::vector<PlotRow> rows;
  const std::pair<const char*, const ODMatrix*> sources[] = {{"real", &real}, {"generated", &generated}};
  for (const auto& [stat, fn] : {std::pair{"inflow", &inflow_samples}, std::pair{"outflow", &outflow_samples},
                                 std::pair{"odflow", &odflow_samples}}) {
    for (const auto& [label, od] : sources) {
      const DensityTable t = log_density(fn(*od), bins);
      for (std::size_t k = 0; k < t.centers.size(); ++k) rows.push_back({stat, label, t.centers[k], t.densities[k]});
    }
  }
  return rows;
}

void write_plot_data(const std::string& path, const std::vector<PlotRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << "statistic,source,bin_center,density\n";
  for (const PlotRow& r : rows) out << r.statistic << ',' << r.source << ',' << fmt(r.center) << ',' << fmt(r.density) << '\n';
}

std::vector<PlotRow> read_plot_data(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path);
  std::string line;
  std::getline(in, line);
  if (line != "statistic,source,bin_center,density") throw ValidationError(path + ": unexpected header");
  std::vector<PlotRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) throw ValidationError(path + ":" + std::to_string(lineno) + ": expected 4 fields");
    try {
      rows.push_back({cells[0], cells[1], std::stod(cells[2]), std::stod(cells[3])});
    } catch (const std::logic_error&) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return rows;
}

}  // namespace odgen::metrics
