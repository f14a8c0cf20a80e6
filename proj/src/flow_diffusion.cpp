#include "odgen/flow_diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "odgen/errors.hpp"

namespace odgen::flow {

namespace {

void check_step(int t, const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.steps)
    throw ValidationError("step " + std::to_string(t) + " outside [1, " + std::to_string(schedule.steps) + "]");
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  // Fill row by row so the draw order does not depend on the storage order.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

}  // namespace

FlowScaler FlowScaler::fit(const std::vector<const ODMatrix*>& matrices) {
  FlowScaler s;
  s.f_max = 0.0;
  for (const ODMatrix* m : matrices) s.f_max = std::max(s.f_max, m->values().maxCoeff());
  s.validate();
  return s;
}

void FlowScaler::validate() const {
  if (!(f_max > 0.0) || !std::isfinite(f_max)) throw ValidationError("flow scaler needs F_max > 0");
}

Matrix FlowScaler::normalize(const Matrix& raw) const {
  validate();
  const double denom = std::log1p(f_max);
  return raw.unaryExpr([denom](double f) {
    if (f < 0.0) throw ValidationError("flows to normalize must be non-negative");
    return 2.0 * std::log1p(f) / denom - 1.0;
  });
}

Matrix FlowScaler::denormalize(const Matrix& z) const {
  validate();
  const double denom = std::log1p(f_max);
  return z.unaryExpr([denom](double v) {
    const double f = std::expm1((v + 1.0) / 2.0 * denom);
    return f < 0.0 ? 0.0 : std::round(f);
  });
}

void to_json(nlohmann::json& j, const FlowScaler& s) { j = nlohmann::json{{"f_max", s.f_max}}; }

void from_json(const nlohmann::json& j, FlowScaler& s) {
  s.f_max = j.at("f_max").get<double>();
  s.validate();
}

Matrix noisy_from(const Matrix& clean, const Matrix& noise, int t, const NoiseSchedule& schedule) {
  check_step(t, schedule);
  const double abar = schedule.alpha_bar_at(t);
  return std::sqrt(abar) * clean + std::sqrt(1.0 - abar) * noise;
}

Noised forward_noise(const Matrix& clean, int t, const NoiseSchedule& schedule, std::mt19937_64& rng) {
  check_step(t, schedule);
  Matrix noise = standard_normal(clean.rows(), clean.cols(), rng);
  Matrix noisy = noisy_from(clean, noise, t, schedule);
  return {std::move(noisy), std::move(noise)};
}

Noised forward_noise(const Matrix& clean, const AdjacencyMatrix& mask, int t, const NoiseSchedule& schedule,
                     std::mt19937_64& rng) {
  if (mask.size() != clean.rows() || clean.rows() != clean.cols()) throw ValidationError("mask and flows differ in shape");
  Noised out = forward_noise(clean, t, schedule, rng);
  out.noise = out.noise.cwiseProduct(mask.values());
  out.noisy = out.noisy.cwiseProduct(mask.values());
  return out;
}

FlowState reverse_step_from_noise(const FlowState& state, const Matrix& noise_estimate, const NoiseSchedule& schedule,
                                  std::mt19937_64& rng, bool add_noise, bool clip_denoised) {
  const int t = state.t;
  check_step(t, schedule);
  const int n = state.mask.size();
  if (state.values.rows() != n || state.values.cols() != n || noise_estimate.rows() != n || noise_estimate.cols() != n)
    throw ValidationError("flow state, mask and noise estimate must share one shape");
  const double alpha = schedule.alpha_at(t);
  const double beta = schedule.beta_at(t);
  const double abar = schedule.alpha_bar_at(t);
  const double coef = beta / std::sqrt(1.0 - abar);
  const double sigma = (add_noise && t > 1) ? std::sqrt(beta) : 0.0;
  const double abar_prev = schedule.alpha_bar_at(t - 1);
  const double c_clean = std::sqrt(abar_prev) * beta / (1.0 - abar);
  const double c_noisy = std::sqrt(alpha) * (1.0 - abar_prev) / (1.0 - abar);

  FlowState out;
  out.mask = state.mask;
  out.t = t - 1;
  out.values = Matrix::Zero(n, n);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!state.mask(i, j)) continue;
      double mu;
      if (clip_denoised) {
        const double f = state.values(i, j);
        const double clean = std::clamp((f - std::sqrt(1.0 - abar) * noise_estimate(i, j)) / std::sqrt(abar), -1.0, 1.0);
        mu = c_clean * clean + c_noisy * f;
      } else {
        mu = (state.values(i, j) - coef * noise_estimate(i, j)) / std::sqrt(alpha);
      }
      out.values(i, j) = sigma > 0.0 ? mu + sigma * normal(rng) : mu;
    }
  }
  return out;
}

DenoiserInput make_input(const FlowState& state) {
  const int n = state.mask.size();
  DenoiserInput in;
  in.n = n;
  in.edge_features.resize(static_cast<Eigen::Index>(n) * n, 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Eigen::Index r = static_cast<Eigen::Index>(i) * n + j;
      in.edge_features(r, 0) = state.mask(i, j) ? state.values(i, j) : 0.0;
      in.edge_features(r, 1) = state.mask.values()(i, j);
    }
  // Strengths use the noisy values shifted so that -1 (zero flow) maps to 0.
  const Matrix weights = (state.values.array() + 1.0).max(0.0).matrix();
  in.node_properties = node_property_features(state.mask, weights);
  return in;
}

Matrix predict_noise(const Denoiser& model, const FlowState& state, const ConditionEmbedding& cond) {
  ag::NoGradGuard no_grad;
  const ag::Var out = model.forward(make_input(state), state.t, cond);
  const int n = state.mask.size();
  Matrix eps(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) eps(i, j) = out.value()(static_cast<Eigen::Index>(i) * n + j, 0);
  return eps;
}

FlowState reverse_step(const FlowState& state, const ConditionEmbedding& cond, const Denoiser& model,
                       const NoiseSchedule& schedule, std::mt19937_64& rng, bool clip_denoised) {
  if (model.config().mode != DenoiserMode::Flow) throw ValidationError("reverse_step needs a flow denoiser");
  return reverse_step_from_noise(state, predict_noise(model, state, cond), schedule, rng, true, clip_denoised);
}

TrainResult train_flow(Denoiser& model, const std::vector<Example>& examples, const FlowScaler& scaler,
                       const NoiseSchedule& schedule, const TrainConfig& config, std::mt19937_64& rng,
                       const EpochCallback& on_epoch) {
  config.validate();
  scaler.validate();
  if (model.config().mode != DenoiserMode::Flow) throw ValidationError("train_flow needs a flow denoiser");
  if (examples.empty()) throw ValidationError("no training cities");

  std::vector<Matrix> clean;
  for (const Example& ex : examples) {
    const int n = ex.od.size();
    if (ex.city == nullptr || ex.city->size() != n || ex.mask.size() != n)
      throw ValidationError("city, OD matrix and mask sizes differ");
    if (!(ex.mask.count() > 0.0)) throw ValidationError("flow training mask is empty");
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (ex.od(i, j) > 0.0 && !ex.mask(i, j))
          throw ValidationError("mask must cover every nonzero flow");
    clean.push_back(scaler.normalize(ex.od.values()).cwiseProduct(ex.mask.values()));
  }

  nn::Adam optimizer(model.params(), config.adam);
  ConvergenceMonitor monitor(config.window, config.min_delta, config.patience);
  std::uniform_int_distribution<int> pick_city(0, static_cast<int>(examples.size()) - 1);
  std::uniform_int_distribution<int> pick_t(1, schedule.steps);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  TrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int b = 0; b < config.batch; ++b) {
      const std::size_t c = static_cast<std::size_t>(pick_city(rng));
      const Example& ex = examples[c];
      const int n = ex.od.size();
      const int t = pick_t(rng);
      Noised noised = forward_noise(clean[c], ex.mask, t, schedule, rng);
      FlowState state{std::move(noised.noisy), ex.mask, t};
      const bool drop = config.condition_dropout > 0.0 && u(rng) < config.condition_dropout;
      const ConditionEmbedding cond = drop ? model.null_condition(n) : model.build_condition_embedding(*ex.city);
      const ag::Var pred = model.forward(make_input(state), t, cond);
      const ag::Tensor target = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 1>>(
          Matrix(noised.noise.transpose()).data(), static_cast<Eigen::Index>(n) * n);
      const ag::Tensor mask = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 1>>(
          Matrix(ex.mask.values().transpose()).data(), static_cast<Eigen::Index>(n) * n);
      ag::Var loss = ag::masked_mse(pred, target, mask);
      if (!std::isfinite(loss.item()))
        throw NumericalError("non-finite flow loss at epoch " + std::to_string(epoch) + ", t = " + std::to_string(t));
      epoch_loss += loss.item();
      if (config.batch > 1) loss = ag::scale(loss, 1.0 / config.batch);
      ag::backward(loss);
    }
    optimizer.set_learning_rate(config.learning_rate_at(epoch));
    optimizer.step();
    epoch_loss /= config.batch;
    result.losses.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
    if (config.early_stop && monitor.update(epoch_loss)) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

ODMatrix generate_flows(const CityCharacteristics& city, const AdjacencyMatrix& mask, const Denoiser& model,
                        const NoiseSchedule& schedule, const FlowScaler& scaler, std::mt19937_64& rng,
                        bool clip_denoised) {
  const int n = city.size();
  if (mask.size() != n) throw ValidationError("mask does not match the city size");
  if (!(mask.count() > 0.0)) return ODMatrix::zeros(n);
  ConditionEmbedding cond;
  {
    ag::NoGradGuard no_grad;
    cond = model.build_condition_embedding(city);
  }
  FlowState state{Matrix::Zero(n, n), mask, schedule.steps};
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (mask(i, j)) state.values(i, j) = normal(rng);
  while (state.t >= 1) state = reverse_step(state, cond, model, schedule, rng, clip_denoised);
  if (!state.values.allFinite()) throw NumericalError("flow sampling produced non-finite values");
  // The data lies in [-1, 1]; clip the final sample to that range before mapping back.
  const Matrix clipped = state.values.cwiseMax(-1.0).cwiseMin(1.0);
  Matrix raw = scaler.denormalize(clipped).cwiseProduct(mask.values());
  return ODMatrix(std::move(raw));
}

}  // namespace odgen::flow
