#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "odgen/nn.hpp"

namespace odgen {

struct TrainConfig {
  int epochs = 2000;
  nn::AdamConfig adam;
  // Early stop when the mean loss of consecutive `window`-epoch blocks stops improving by at
  // least `min_delta` for `patience` blocks in a row.
  bool early_stop = true;
  int window = 100;
  double min_delta = 1e-5;
  int patience = 3;
  // Probability of replacing the condition embedding by zeros for one epoch.
  double condition_dropout = 0.0;
  // Independent (city, t, noise) draws averaged into one optimizer step.
  int batch = 1;
  // Cosine decay of the learning rate to this fraction of its initial value over `epochs`;
  // 1 keeps it constant.
  double final_lr_fraction = 1.0;

  double learning_rate_at(int epoch) const;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct TrainResult {
  std::vector<double> losses;  // one entry per epoch
  bool early_stopped = false;
};

// Called after every epoch with (epoch index, loss).
using EpochCallback = std::function<void(int, double)>;

class ConvergenceMonitor {
 public:
  ConvergenceMonitor(int window, double min_delta, int patience);
  // Feeds one epoch loss; returns true once training should stop.
  bool update(double loss);

 private:
  int window_;
  double min_delta_;
  int patience_;
  double block_sum_ = 0.0;
  int block_count_ = 0;
  double best_ = 0.0;
  bool has_best_ = false;
  int stale_ = 0;
};

// SplitMix64 mix of a base seed and a stream id, for independent deterministic rng streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace odgen
