#include "odgen/pipeline.hpp"

#include <filesystem>
#include <fstream>

#include "odgen/errors.hpp"
#include "odgen/topo_diffusion.hpp"

namespace odgen {

namespace {

enum Stream : std::uint64_t {
  kTopologyInit = 1,
  kFlowInit = 2,
  kTopologyTrain = 3,
  kMaskSample = 4,
  kFlowTrain = 5,
};

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace

DenoiserConfig CascadeConfig::default_topology() {
  DenoiserConfig c;
  c.mode = DenoiserMode::Topology;
  c.layers = 2;
  return c;
}

DenoiserConfig CascadeConfig::default_flow() {
  DenoiserConfig c;
  c.mode = DenoiserMode::Flow;
  c.layers = 3;
  return c;
}

DenoiserConfig CascadeConfig::effective_topology() const {
  DenoiserConfig c = topology;
  c.mode = DenoiserMode::Topology;
  c.node_augmentation = use_node_augmentation_topology;
  return c;
}

DenoiserConfig CascadeConfig::effective_flow() const {
  DenoiserConfig c = flow;
  c.mode = DenoiserMode::Flow;
  c.node_augmentation = use_node_augmentation_flow;
  return c;
}

NoiseSchedule CascadeConfig::schedule() const { return make_cosine_schedule(steps, schedule_offset, max_beta); }

void CascadeConfig::validate() const {
  if (steps < 1) throw ValidationError("steps must be positive");
  if (!(schedule_offset > 0.0)) throw ValidationError("schedule_offset must be positive");
  if (!(max_beta > 0.0 && max_beta < 1.0)) throw ValidationError("max_beta must lie in (0, 1)");
  if (adjacency_samples < 1) throw ValidationError("adjacency_samples must be positive");
  effective_topology().validate();
  effective_flow().validate();
  topology_train.validate();
  flow_train.validate();
}

void to_json(nlohmann::json& j, const CascadeConfig& c) {
  j = nlohmann::json{{"steps", c.steps},
                     {"schedule_offset", c.schedule_offset},
                     {"max_beta", c.max_beta},
                     {"topology", c.topology},
                     {"flow", c.flow},
                     {"topology_train", c.topology_train},
                     {"flow_train", c.flow_train},
                     {"use_node_augmentation_topology", c.use_node_augmentation_topology},
                     {"use_node_augmentation_flow", c.use_node_augmentation_flow},
                     {"use_collaborative_training", c.use_collaborative_training},
                     {"adjacency_samples", c.adjacency_samples},
                     {"clip_denoised", c.clip_denoised},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, CascadeConfig& c) {
  if (!j.is_object()) throw ValidationError("cascade config must be an object");
  c.steps = j.value("steps", c.steps);
  c.schedule_offset = j.value("schedule_offset", c.schedule_offset);
  c.max_beta = j.value("max_beta", c.max_beta);
  if (j.contains("topology")) {
    nlohmann::json t = j.at("topology");
    t["mode"] = "topology";
    if (!t.contains("layers")) t["layers"] = CascadeConfig::default_topology().layers;
    c.topology = t.get<DenoiserConfig>();
  }
  if (j.contains("flow")) {
    nlohmann::json f = j.at("flow");
    f["mode"] = "flow";
    if (!f.contains("layers")) f["layers"] = CascadeConfig::default_flow().layers;
    c.flow = f.get<DenoiserConfig>();
  }
  if (j.contains("topology_train")) c.topology_train = j.at("topology_train").get<TrainConfig>();
  if (j.contains("flow_train")) c.flow_train = j.at("flow_train").get<TrainConfig>();
  c.use_node_augmentation_topology = j.value("use_node_augmentation_topology", c.use_node_augmentation_topology);
  c.use_node_augmentation_flow = j.value("use_node_augmentation_flow", c.use_node_augmentation_flow);
  c.use_collaborative_training = j.value("use_collaborative_training", c.use_collaborative_training);
  c.adjacency_samples = j.value("adjacency_samples", c.adjacency_samples);
  c.clip_denoised = j.value("clip_denoised", c.clip_denoised);
  c.seed = j.value("seed", c.seed);
  c.validate();
}

AdjacencyMatrix mask_union(const AdjacencyMatrix& generated, const AdjacencyMatrix& real) {
  if (generated.size() != real.size()) throw ValidationError("mask_union needs matrices of the same size");
  return AdjacencyMatrix(generated.values().cwiseMax(real.values()));
}

CascadeTraining train_cascade(const std::vector<SourceCity>& sources, const CascadeConfig& config,
                              const CascadeCallbacks& callbacks) {
  config.validate();
  if (sources.empty()) throw ValidationError("train_cascade needs at least one source city");
  std::vector<const CityCharacteristics*> cities;
  std::vector<const ODMatrix*> ods;
  for (const SourceCity& s : sources) {
    if (s.city == nullptr || s.od == nullptr) throw ValidationError("null source city");
    if (s.od->size() != s.city->size()) throw ValidationError("OD matrix and city sizes differ");
    if (s.city->manifest() != sources.front().city->manifest())
      throw ValidationError("source cities must share one feature manifest");
    cities.push_back(s.city);
    ods.push_back(s.od);
  }

  const InputScaler input_scaler = InputScaler::fit(cities);
  const FeatureManifest& manifest = sources.front().city->manifest();
  const NoiseSchedule schedule = config.schedule();
  const DiscreteTransition trans = make_uniform_transitions(schedule, 2);

  Denoiser topology(config.effective_topology(), manifest, input_scaler, derive_seed(config.seed, kTopologyInit));
  std::vector<topo::Example> topo_examples;
  for (const SourceCity& s : sources) topo_examples.push_back({s.city, to_adjacency(*s.od)});
  std::mt19937_64 topo_rng(derive_seed(config.seed, kTopologyTrain));
  TrainResult topo_result =
      topo::train_topology(topology, topo_examples, trans, config.topology_train, topo_rng, callbacks.topology_epoch);

  std::vector<AdjacencyMatrix> masks;
  std::mt19937_64 mask_rng(derive_seed(config.seed, kMaskSample));
  for (const topo::Example& ex : topo_examples) {
    if (config.use_collaborative_training)
      masks.push_back(mask_union(topo::generate_adjacency(*ex.city, topology, trans, mask_rng), ex.adjacency));
    else
      masks.push_back(ex.adjacency);
  }

  const flow::FlowScaler flow_scaler = flow::FlowScaler::fit(ods);
  Denoiser flow_model(config.effective_flow(), manifest, input_scaler, derive_seed(config.seed, kFlowInit));
  std::vector<flow::Example> flow_examples;
  for (std::size_t k = 0; k < sources.size(); ++k) flow_examples.push_back({sources[k].city, *sources[k].od, masks[k]});
  std::mt19937_64 flow_rng(derive_seed(config.seed, kFlowTrain));
  TrainResult flow_result = flow::train_flow(flow_model, flow_examples, flow_scaler, schedule, config.flow_train,
                                             flow_rng, callbacks.flow_epoch);

  return CascadeTraining{TrainedCascade{config, std::move(topology), std::move(flow_model), flow_scaler},
                         std::move(topo_result), std::move(flow_result), std::move(masks)};
}

CascadeTraining train_cascade(const CityCharacteristics& city, const ODMatrix& od, const CascadeConfig& config,
                              const CascadeCallbacks& callbacks) {
  return train_cascade(std::vector<SourceCity>{{&city, &od}}, config, callbacks);
}

AdjacencyMatrix generate_topology(const CityCharacteristics& target, const TrainedCascade& cascade,
                                  std::mt19937_64& rng) {
  if (target.manifest() != cascade.manifest()) throw ValidationError("target city feature manifest does not match");
  const DiscreteTransition trans = make_uniform_transitions(cascade.config.schedule(), 2);
  const int k = cascade.config.adjacency_samples;
  if (k == 1) return topo::generate_adjacency(target, cascade.topology, trans, rng);
  const int n = target.size();
  Matrix votes = Matrix::Zero(n, n);
  for (int s = 0; s < k; ++s) votes += topo::generate_adjacency(target, cascade.topology, trans, rng).values();
  return AdjacencyMatrix((2.0 * votes.array() > static_cast<double>(k)).cast<double>().matrix());
}

GeneratedOD generate_od(const CityCharacteristics& target, const TrainedCascade& cascade, std::mt19937_64& rng) {
  AdjacencyMatrix adjacency = generate_topology(target, cascade, rng);
  ODMatrix od = flow::generate_flows(target, adjacency, cascade.flow, cascade.config.schedule(), cascade.flow_scaler, rng,
                                      cascade.config.clip_denoised);
  return {std::move(adjacency), std::move(od)};
}

void save_cascade(const std::string& dir, const TrainedCascade& cascade) {
  std::filesystem::create_directories(dir);
  write_json(dir + "/cascade.json", nlohmann::json(cascade.config));
  write_json(dir + "/topology.ckpt.json", cascade.topology.to_json());
  nlohmann::json flow = cascade.flow.to_json();
  flow["flow_scaler"] = cascade.flow_scaler;
  write_json(dir + "/flow.ckpt.json", flow);
}

TrainedCascade load_cascade(const std::string& dir) {
  CascadeConfig config = read_json(dir + "/cascade.json").get<CascadeConfig>();
  Denoiser topology = Denoiser::from_json(read_json(dir + "/topology.ckpt.json"));
  const nlohmann::json flow_json = read_json(dir + "/flow.ckpt.json");
  Denoiser flow = Denoiser::from_json(flow_json);
  if (!flow_json.contains("flow_scaler")) throw ValidationError("flow checkpoint lacks its flow scaler");
  flow::FlowScaler scaler = flow_json.at("flow_scaler").get<flow::FlowScaler>();
  if (topology.config().mode != DenoiserMode::Topology || flow.config().mode != DenoiserMode::Flow)
    throw ValidationError("checkpoint modes do not match their roles");
  if (topology.manifest() != flow.manifest()) throw ValidationError("checkpoints were built from different manifests");
  return TrainedCascade{std::move(config), std::move(topology), std::move(flow), scaler};
}

}  // namespace odgen
