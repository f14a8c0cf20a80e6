#include "odgen/training.hpp"

#include <algorithm>
#include <cmath>

#include "odgen/errors.hpp"

namespace odgen {

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (!(adam.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (window < 1 || patience < 1) throw ValidationError("early-stop window and patience must be >= 1");
  if (condition_dropout < 0.0 || condition_dropout >= 1.0) throw ValidationError("condition_dropout must lie in [0,1)");
  if (batch < 1) throw ValidationError("batch must be >= 1");
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0))
    throw ValidationError("final_lr_fraction must lie in (0, 1]");
}

double TrainConfig::learning_rate_at(int epoch) const {
  if (final_lr_fraction == 1.0 || epochs <= 1) return adam.learning_rate;
  const double progress = std::clamp(static_cast<double>(epoch) / (epochs - 1), 0.0, 1.0);
  const double cosine = 0.5 * (1.0 + std::cos(std::acos(-1.0) * progress));
  return adam.learning_rate * (final_lr_fraction + (1.0 - final_lr_fraction) * cosine);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"learning_rate", c.adam.learning_rate},
                     {"beta1", c.adam.beta1},
                     {"beta2", c.adam.beta2},
                     {"grad_clip", c.adam.grad_clip},
                     {"early_stop", c.early_stop},
                     {"window", c.window},
                     {"min_delta", c.min_delta},
                     {"patience", c.patience},
                     {"condition_dropout", c.condition_dropout},
                     {"batch", c.batch},
                     {"final_lr_fraction", c.final_lr_fraction}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.adam.learning_rate = j.value("learning_rate", d.adam.learning_rate);
  c.adam.beta1 = j.value("beta1", d.adam.beta1);
  c.adam.beta2 = j.value("beta2", d.adam.beta2);
  c.adam.grad_clip = j.value("grad_clip", d.adam.grad_clip);
  c.early_stop = j.value("early_stop", d.early_stop);
  c.window = j.value("window", d.window);
  c.min_delta = j.value("min_delta", d.min_delta);
  c.patience = j.value("patience", d.patience);
  c.condition_dropout = j.value("condition_dropout", d.condition_dropout);
  c.batch = j.value("batch", d.batch);
  c.final_lr_fraction = j.value("final_lr_fraction", d.final_lr_fraction);
}

ConvergenceMonitor::ConvergenceMonitor(int window, double min_delta, int patience)
    : window_(window), min_delta_(min_delta), patience_(patience) {}

bool ConvergenceMonitor::update(double loss) {
  block_sum_ += loss;
  if (++block_count_ < window_) return false;
  const double mean = block_sum_ / block_count_;
  block_sum_ = 0.0;
  block_count_ = 0;
  if (!has_best_ || best_ - mean >= min_delta_) {
    best_ = has_best_ ? std::min(best_, mean) : mean;
    has_best_ = true;
    stale_ = 0;
    return false;
  }
  return ++stale_ >= patience_;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace odgen
