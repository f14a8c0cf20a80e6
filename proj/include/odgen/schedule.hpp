#pragma once

#include <vector>

#include "odgen/core.hpp"

namespace odgen {

// Cosine variance schedule. Index conventions: beta[t-1], alpha[t-1] for steps t = 1..T,
// alpha_bar[t] for t = 0..T with alpha_bar[0] = 1.
struct NoiseSchedule {
  int steps = 0;
  double offset = 0.008;
  double max_beta = 0.999;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  double beta_at(int t) const { return beta.at(t - 1); }
  double alpha_at(int t) const { return alpha.at(t - 1); }
  double alpha_bar_at(int t) const { return alpha_bar.at(t); }
};

NoiseSchedule make_cosine_schedule(int steps, double offset = 0.008, double max_beta = 0.999);

// Schedule assembled from explicit per-step alphas, used by tests that need arbitrary chains.
NoiseSchedule schedule_from_alphas(const std::vector<double>& alphas);

// Q = alpha * I + (1 - alpha) * 11^T / d.
Matrix uniform_transition(double alpha, int classes);

// Qbar^1 = Q^1, Qbar^t = Qbar^{t-1} Q^t.
std::vector<Matrix> cumulative_transition(const std::vector<Matrix>& q_list);

// Per-step and cumulative transitions of one discrete chain. Q[t-1], Q_bar[t-1] for t = 1..T;
// Qbar^0 = I is served by cumulative_at(0).
struct DiscreteTransition {
  int classes = 2;
  std::vector<Matrix> Q;
  std::vector<Matrix> Q_bar;

  int steps() const { return static_cast<int>(Q.size()); }
  const Matrix& step_at(int t) const { return Q.at(t - 1); }
  Matrix cumulative_at(int t) const;
};

DiscreteTransition make_uniform_transitions(const NoiseSchedule& schedule, int classes = 2);

}  // namespace odgen
