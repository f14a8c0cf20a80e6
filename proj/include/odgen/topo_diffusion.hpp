#pragma once

#include <random>
#include <vector>

#include "odgen/core.hpp"
#include "odgen/denoiser.hpp"
#include "odgen/schedule.hpp"
#include "odgen/training.hpp"

namespace odgen::topo {

// Class index per cell (0 = no flow, 1 = flow), row-major N x N. Equivalent to the one-hot
// encoding: cell (i, j) is the one-hot vector e_{cls[i*N+j]}.
struct DiscreteState {
  int n = 0;
  int t = 0;
  std::vector<int> cls;

  int at(int i, int j) const { return cls[static_cast<std::size_t>(i) * n + j]; }
};

DiscreteState from_adjacency(const AdjacencyMatrix& adj);
AdjacencyMatrix to_adjacency(const DiscreteState& state);

// Categorical distribution of one cell at step t given its clean class: row m0 of Qbar^t.
Vector forward_distribution(int m0, int t, const DiscreteTransition& trans);

// Each cell independently drawn from m0 Qbar^t.
DiscreteState forward_sample(const DiscreteState& m0, int t, const DiscreteTransition& trans,
                             std::mt19937_64& rng);

// q(m^{t-1} | m^t, m^0) by Bayes rule; throws InvalidEvidence when m^0 Qbar^t m^t^T = 0.
Vector posterior(int mt, int m0, int t, const DiscreteTransition& trans);

// Normalized sum over m0 of q(m^{t-1} | m^t, m0) p(m0). Terms with impossible evidence are skipped.
Vector reverse_mixture(int mt, const Vector& p0, int t, const DiscreteTransition& trans);

// One reverse step from per-cell clean-class probabilities (N^2 x d). At t = 1 the argmax of
// p0 is returned (ties resolve to class 0); otherwise each cell is sampled from its mixture.
DiscreteState reverse_step_from_probs(const DiscreteState& state, const Matrix& p0,
                                      const DiscreteTransition& trans, std::mt19937_64& rng);

// Denoiser inputs for a discrete state: one-hot edge features and node statistics.
DenoiserInput make_input(const DiscreteState& state);

// Per-cell class probabilities p(m0 | M^t, X) from the network (softmax of the logits).
Matrix predict_clean(const Denoiser& model, const DiscreteState& state, const ConditionEmbedding& cond);

DiscreteState reverse_step(const DiscreteState& state, const ConditionEmbedding& cond, const Denoiser& model,
                           const DiscreteTransition& trans, std::mt19937_64& rng);

struct Example {
  const CityCharacteristics* city = nullptr;
  AdjacencyMatrix adjacency;
};

// Trains `model` in place: per epoch draw a city, t ~ U{1..T}, corrupt with Qbar^t and
// minimise the mean per-cell cross entropy against the clean classes.
TrainResult train_topology(Denoiser& model, const std::vector<Example>& examples, const DiscreteTransition& trans,
                           const TrainConfig& config, std::mt19937_64& rng, const EpochCallback& on_epoch = {});

// Uniform noise M^T followed by T reverse steps.
AdjacencyMatrix generate_adjacency(const CityCharacteristics& city, const Denoiser& model,
                                   const DiscreteTransition& trans, std::mt19937_64& rng);

}  // namespace odgen::topo
