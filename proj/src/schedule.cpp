#include "odgen/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "odgen/errors.hpp"

namespace odgen {

NoiseSchedule make_cosine_schedule(int steps, double offset, double max_beta) {
  if (steps <= 0) throw ValidationError("schedule needs T >= 1");
  if (offset < 0.0) throw ValidationError("cosine offset must be non-negative");
  if (!(max_beta > 0.0 && max_beta < 1.0)) throw ValidationError("beta clip must lie in (0,1)");

  const auto f = [&](double t) {
    const double c = std::cos((t / steps + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
    return c * c;
  };
  const double f0 = f(0.0);

  NoiseSchedule s;
  s.steps = steps;
  s.offset = offset;
  s.max_beta = max_beta;
  s.beta.resize(steps);
  s.alpha.resize(steps);
  s.alpha_bar.resize(steps + 1);
  s.alpha_bar[0] = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double raw = 1.0 - (f(t) / f0) / (f(t - 1) / f0);
    const double beta = std::min(raw, max_beta);
    s.beta[t - 1] = beta;
    s.alpha[t - 1] = 1.0 - beta;
    // The cumulative product follows the clipped betas so the forward chain and the
    // reverse updates see one consistent schedule.
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t - 1];
  }
  return s;
}

NoiseSchedule schedule_from_alphas(const std::vector<double>& alphas) {
  if (alphas.empty()) throw ValidationError("schedule needs T >= 1");
  NoiseSchedule s;
  s.steps = static_cast<int>(alphas.size());
  s.offset = 0.0;
  s.max_beta = 1.0;
  s.alpha = alphas;
  s.beta.resize(alphas.size());
  s.alpha_bar.assign(alphas.size() + 1, 1.0);
  for (std::size_t t = 0; t < alphas.size(); ++t) {
    if (!(alphas[t] >= 0.0 && alphas[t] <= 1.0)) throw ValidationError("alpha outside [0,1]");
    s.beta[t] = 1.0 - alphas[t];
    s.alpha_bar[t + 1] = s.alpha_bar[t] * alphas[t];
  }
  return s;
}

Matrix uniform_transition(double alpha, int classes) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("transition alpha outside [0,1]");
  if (classes < 2) throw ValidationError("transition needs d >= 2");
  Matrix q = Matrix::Constant(classes, classes, (1.0 - alpha) / classes);
  q.diagonal().array() += alpha;
  return q;
}

std::vector<Matrix> cumulative_transition(const std::vector<Matrix>& q_list) {
  std::vector<Matrix> out;
  out.reserve(q_list.size());
  for (std::size_t t = 0; t < q_list.size(); ++t) {
    const Matrix& q = q_list[t];
    if (q.rows() != q.cols()) throw ValidationError("transition matrices must be square");
    if (t > 0 && q.rows() != q_list[0].rows())
      throw ValidationError("transition matrices must share one class count");
    out.push_back(t == 0 ? q : Matrix(out.back() * q));
  }
  return out;
}

Matrix DiscreteTransition::cumulative_at(int t) const {
  if (t == 0) return Matrix::Identity(classes, classes);
  return Q_bar.at(t - 1);
}

DiscreteTransition make_uniform_transitions(const NoiseSchedule& schedule, int classes) {
  DiscreteTransition tr;
  tr.classes = classes;
  tr.Q.reserve(schedule.steps);
  for (int t = 1; t <= schedule.steps; ++t) tr.Q.push_back(uniform_transition(schedule.alpha_at(t), classes));
  tr.Q_bar = cumulative_transition(tr.Q);
  return tr;
}

}  // namespace odgen
