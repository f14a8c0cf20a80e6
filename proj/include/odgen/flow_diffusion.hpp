#pragma once

#include <random>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "odgen/core.hpp"
#include "odgen/denoiser.hpp"
#include "odgen/schedule.hpp"
#include "odgen/training.hpp"

namespace odgen::flow {

// Log-domain map of raw flows onto [-1, 1]: z = 2 log(1+F) / log(1+F_max) - 1.
struct FlowScaler {
  double f_max = 1.0;

  static FlowScaler fit(const std::vector<const ODMatrix*>& matrices);
  Matrix normalize(const Matrix& raw) const;
  // Exact inverse, then negatives clamp to 0 and values round to the nearest integer.
  Matrix denormalize(const Matrix& z) const;
  void validate() const;
};

void to_json(nlohmann::json& j, const FlowScaler& s);
void from_json(const nlohmann::json& j, FlowScaler& s);

struct FlowState {
  Matrix values;  // normalized space, exactly 0 outside the mask
  AdjacencyMatrix mask;
  int t = 0;
};

struct Noised {
  Matrix noisy;
  Matrix noise;
};

// F^t = sqrt(abar_t) F^0 + sqrt(1 - abar_t) eps with the given eps.
Matrix noisy_from(const Matrix& clean, const Matrix& noise, int t, const NoiseSchedule& schedule);
// Standard-normal eps on every entry.
Noised forward_noise(const Matrix& clean, int t, const NoiseSchedule& schedule, std::mt19937_64& rng);
// Same, with eps and F^t forced to 0 outside the mask.
Noised forward_noise(const Matrix& clean, const AdjacencyMatrix& mask, int t, const NoiseSchedule& schedule,
                     std::mt19937_64& rng);

// mu = (F^t - beta_t / sqrt(1 - abar_t) eps_hat) / sqrt(alpha_t); F^{t-1} = mu + sigma_t z with
// sigma_t^2 = beta_t and sigma_1 = 0. Masked entries only. `add_noise = false` forces sigma to 0.
// With `clip_denoised` the implied clean estimate (F^t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t) is
// clipped to [-1, 1] and mu is the q(F^{t-1} | F^t, F^0) mean at that estimate, which equals the
// formula above whenever no clipping happens.
FlowState reverse_step_from_noise(const FlowState& state, const Matrix& noise_estimate, const NoiseSchedule& schedule,
                                  std::mt19937_64& rng, bool add_noise = true, bool clip_denoised = false);

DenoiserInput make_input(const FlowState& state);

// Network noise estimate eps_hat(F^t, t | X) as an N x N matrix.
Matrix predict_noise(const Denoiser& model, const FlowState& state, const ConditionEmbedding& cond);

FlowState reverse_step(const FlowState& state, const ConditionEmbedding& cond, const Denoiser& model,
                       const NoiseSchedule& schedule, std::mt19937_64& rng, bool clip_denoised = false);

struct Example {
  const CityCharacteristics* city = nullptr;
  ODMatrix od;
  AdjacencyMatrix mask;
};

// Masked epsilon-prediction training: loss = |M (eps - eps_hat)|^2 / sum(M).
TrainResult train_flow(Denoiser& model, const std::vector<Example>& examples, const FlowScaler& scaler,
                       const NoiseSchedule& schedule, const TrainConfig& config, std::mt19937_64& rng,
                       const EpochCallback& on_epoch = {});

// F^T ~ N(0, I) on the mask, T reverse steps, clip to [-1, 1], denormalize; zero outside the mask.
ODMatrix generate_flows(const CityCharacteristics& city, const AdjacencyMatrix& mask, const Denoiser& model,
                        const NoiseSchedule& schedule, const FlowScaler& scaler, std::mt19937_64& rng,
                        bool clip_denoised = false);

}  // namespace odgen::flow
