#include "odgen/topo_diffusion.hpp"

#include <cmath>

#include "odgen/errors.hpp"

namespace odgen::topo {

namespace {

int sample_categorical(const Vector& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng) * p.sum();
  double acc = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    acc += p(k);
    if (r < acc) return static_cast<int>(k);
  }
  // Rounding can leave r at the very top of the range; take the last class with mass.
  for (Eigen::Index k = p.size() - 1; k >= 0; --k)
    if (p(k) > 0.0) return static_cast<int>(k);
  return 0;
}

void check_step(int t, const DiscreteTransition& trans) {
  if (t < 1 || t > trans.steps())
    throw ValidationError("step " + std::to_string(t) + " outside [1, " + std::to_string(trans.steps()) + "]");
}

}  // namespace

DiscreteState from_adjacency(const AdjacencyMatrix& adj) {
  DiscreteState s;
  s.n = adj.size();
  s.cls.resize(static_cast<std::size_t>(s.n) * s.n);
  for (int i = 0; i < s.n; ++i)
    for (int j = 0; j < s.n; ++j) s.cls[static_cast<std::size_t>(i) * s.n + j] = adj(i, j) ? 1 : 0;
  return s;
}

AdjacencyMatrix to_adjacency(const DiscreteState& state) {
  Matrix m(state.n, state.n);
  for (int i = 0; i < state.n; ++i)
    for (int j = 0; j < state.n; ++j) m(i, j) = state.at(i, j) != 0 ? 1.0 : 0.0;
  return AdjacencyMatrix(std::move(m));
}

Vector forward_distribution(int m0, int t, const DiscreteTransition& trans) {
  return trans.cumulative_at(t).row(m0).transpose();
}

DiscreteState forward_sample(const DiscreteState& m0, int t, const DiscreteTransition& trans, std::mt19937_64& rng) {
  check_step(t, trans);
  const Matrix& qbar = trans.Q_bar[static_cast<std::size_t>(t - 1)];
  DiscreteState out;
  out.n = m0.n;
  out.t = t;
  out.cls.resize(m0.cls.size());
  for (std::size_t c = 0; c < m0.cls.size(); ++c) out.cls[c] = sample_categorical(qbar.row(m0.cls[c]).transpose(), rng);
  return out;
}

Vector posterior(int mt, int m0, int t, const DiscreteTransition& trans) {
  check_step(t, trans);
  const Matrix& q = trans.step_at(t);
  const Matrix qbar_prev = trans.cumulative_at(t - 1);
  const double evidence = trans.cumulative_at(t)(m0, mt);
  if (!(evidence > 0.0))
    throw InvalidEvidence("clean class " + std::to_string(m0) + " cannot reach class " + std::to_string(mt) +
                          " at step " + std::to_string(t));
  // m^t Q^{tT} is column mt of Q; m^0 Qbar^{t-1} is row m0 of Qbar^{t-1}.
  Vector num = q.col(mt).cwiseProduct(qbar_prev.row(m0).transpose());
  return num / evidence;
}

Vector reverse_mixture(int mt, const Vector& p0, int t, const DiscreteTransition& trans) {
  check_step(t, trans);
  const int d = trans.classes;
  if (p0.size() != d) throw ValidationError("clean-class distribution has wrong length");
  Vector mix = Vector::Zero(d);
  for (int m0 = 0; m0 < d; ++m0) {
    if (p0(m0) == 0.0) continue;
    if (!(trans.cumulative_at(t)(m0, mt) > 0.0)) continue;
    mix += p0(m0) * posterior(mt, m0, t, trans);
  }
  const double z = mix.sum();
  if (!(z > 0.0)) throw InvalidEvidence("reverse mixture has no admissible clean class");
  return mix / z;
}

DiscreteState reverse_step_from_probs(const DiscreteState& state, const Matrix& p0, const DiscreteTransition& trans,
                                      std::mt19937_64& rng) {
  const int t = state.t;
  check_step(t, trans);
  const auto cells = static_cast<Eigen::Index>(state.cls.size());
  if (p0.rows() != cells || p0.cols() != trans.classes) throw ValidationError("clean-class probabilities must be N^2 x d");
  DiscreteState out;
  out.n = state.n;
  out.t = t - 1;
  out.cls.resize(state.cls.size());
  for (Eigen::Index c = 0; c < cells; ++c) {
    if (t == 1) {
      int best = 0;
      for (int k = 1; k < trans.classes; ++k)
        if (p0(c, k) > p0(c, best)) best = k;
      out.cls[static_cast<std::size_t>(c)] = best;
    } else {
      const Vector mix = reverse_mixture(state.cls[static_cast<std::size_t>(c)], p0.row(c).transpose(), t, trans);
      out.cls[static_cast<std::size_t>(c)] = sample_categorical(mix, rng);
    }
  }
  return out;
}

DenoiserInput make_input(const DiscreteState& state) {
  DenoiserInput in;
  in.n = state.n;
  in.edge_features = ag::Tensor::Zero(static_cast<Eigen::Index>(state.cls.size()), 2);
  for (std::size_t c = 0; c < state.cls.size(); ++c) in.edge_features(static_cast<Eigen::Index>(c), state.cls[c]) = 1.0;
  in.node_properties = node_property_features(to_adjacency(state));
  return in;
}

Matrix predict_clean(const Denoiser& model, const DiscreteState& state, const ConditionEmbedding& cond) {
  ag::NoGradGuard no_grad;
  const ag::Var logits = model.forward(make_input(state), state.t, cond);
  return ag::softmax_rows(logits).value();
}

DiscreteState reverse_step(const DiscreteState& state, const ConditionEmbedding& cond, const Denoiser& model,
                           const DiscreteTransition& trans, std::mt19937_64& rng) {
  if (model.config().mode != DenoiserMode::Topology) throw ValidationError("reverse_step needs a topology denoiser");
  return reverse_step_from_probs(state, predict_clean(model, state, cond), trans, rng);
}

TrainResult train_topology(Denoiser& model, const std::vector<Example>& examples, const DiscreteTransition& trans,
                           const TrainConfig& config, std::mt19937_64& rng, const EpochCallback& on_epoch) {
  config.validate();
  if (model.config().mode != DenoiserMode::Topology) throw ValidationError("train_topology needs a topology denoiser");
  if (examples.empty()) throw ValidationError("no training cities");
  for (const Example& ex : examples)
    if (ex.city == nullptr || ex.city->size() != ex.adjacency.size())
      throw ValidationError("city and adjacency sizes differ");

  nn::Adam optimizer(model.params(), config.adam);
  ConvergenceMonitor monitor(config.window, config.min_delta, config.patience);
  std::uniform_int_distribution<int> pick_city(0, static_cast<int>(examples.size()) - 1);
  std::uniform_int_distribution<int> pick_t(1, trans.steps());
  std::uniform_real_distribution<double> u(0.0, 1.0);

  TrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int b = 0; b < config.batch; ++b) {
      const Example& ex = examples[static_cast<std::size_t>(pick_city(rng))];
      const int t = pick_t(rng);
      const DiscreteState clean = from_adjacency(ex.adjacency);
      DiscreteState noisy = forward_sample(clean, t, trans, rng);
      const bool drop = config.condition_dropout > 0.0 && u(rng) < config.condition_dropout;
      const ConditionEmbedding cond = drop ? model.null_condition(ex.city->size()) : model.build_condition_embedding(*ex.city);
      const ag::Var logits = model.forward(make_input(noisy), t, cond);
      ag::Var loss = ag::cross_entropy_rows(logits, clean.cls);
      if (!std::isfinite(loss.item()))
        throw NumericalError("non-finite topology loss at epoch " + std::to_string(epoch) + ", t = " + std::to_string(t));
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

AdjacencyMatrix generate_adjacency(const CityCharacteristics& city, const Denoiser& model,
                                   const DiscreteTransition& trans, std::mt19937_64& rng) {
  ConditionEmbedding cond;
  {
    ag::NoGradGuard no_grad;
    cond = model.build_condition_embedding(city);
  }
  const int n = city.size();
  DiscreteState state;
  state.n = n;
  state.t = trans.steps();
  state.cls.resize(static_cast<std::size_t>(n) * n);
  std::uniform_int_distribution<int> uniform_class(0, trans.classes - 1);
  for (int& c : state.cls) c = uniform_class(rng);
  while (state.t >= 1) state = reverse_step(state, cond, model, trans, rng);
  return to_adjacency(state);
}

}  // namespace odgen::topo
