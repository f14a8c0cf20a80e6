#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "odgen/core.hpp"
#include "odgen/denoiser.hpp"
#include "odgen/flow_diffusion.hpp"
#include "odgen/schedule.hpp"
#include "odgen/training.hpp"

namespace odgen {

struct CascadeConfig {
  int steps = 1000;
  double schedule_offset = 0.008;
  double max_beta = 0.999;
  DenoiserConfig topology = default_topology();
  DenoiserConfig flow = default_flow();
  TrainConfig topology_train;
  TrainConfig flow_train;
  bool use_node_augmentation_topology = true;
  bool use_node_augmentation_flow = true;
  bool use_collaborative_training = true;
  // Independent topology samples per generation; a cell is kept when more than half contain it.
  int adjacency_samples = 1;
  // Clip the implied clean flow estimate to [-1, 1] at every reverse step.
  bool clip_denoised = true;
  std::uint64_t seed = 0;

  static DenoiserConfig default_topology();
  static DenoiserConfig default_flow();
  // Denoiser configs with the ablation flags applied.
  DenoiserConfig effective_topology() const;
  DenoiserConfig effective_flow() const;
  NoiseSchedule schedule() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const CascadeConfig& c);
void from_json(const nlohmann::json& j, CascadeConfig& c);

struct TrainedCascade {
  CascadeConfig config;
  Denoiser topology;
  Denoiser flow;
  flow::FlowScaler flow_scaler;

  const FeatureManifest& manifest() const { return topology.manifest(); }
};

struct SourceCity {
  const CityCharacteristics* city = nullptr;
  const ODMatrix* od = nullptr;
};

struct CascadeTraining {
  TrainedCascade cascade;
  TrainResult topology;
  TrainResult flow;
  // Flow-training mask per source city.
  std::vector<AdjacencyMatrix> flow_masks;
};

struct CascadeCallbacks {
  EpochCallback topology_epoch;
  EpochCallback flow_epoch;
};

// Cellwise logical or; throws ValidationError on a size mismatch.
AdjacencyMatrix mask_union(const AdjacencyMatrix& generated, const AdjacencyMatrix& real);

// Trains the topology model on every source city, then the flow model on the union of the true
// support and one frozen topology sample per city (or the true support alone without
// collaborative training). Each optimizer step draws one source city.
CascadeTraining train_cascade(const std::vector<SourceCity>& sources, const CascadeConfig& config,
                              const CascadeCallbacks& callbacks = {});
CascadeTraining train_cascade(const CityCharacteristics& city, const ODMatrix& od, const CascadeConfig& config,
                              const CascadeCallbacks& callbacks = {});

struct GeneratedOD {
  AdjacencyMatrix adjacency;
  ODMatrix od;
};

AdjacencyMatrix generate_topology(const CityCharacteristics& target, const TrainedCascade& cascade,
                                  std::mt19937_64& rng);
GeneratedOD generate_od(const CityCharacteristics& target, const TrainedCascade& cascade, std::mt19937_64& rng);

// Run-directory persistence: cascade.json, topology.ckpt.json, flow.ckpt.json.
void save_cascade(const std::string& dir, const TrainedCascade& cascade);
TrainedCascade load_cascade(const std::string& dir);

}  // namespace odgen
