#pragma once

#include <random>
#include <string>
#include <vector>

#include "odgen/autograd.hpp"

namespace odgen::nn {

using ag::Tensor;
using ag::Var;

// Named trainable tensors in registration order. The order defines the checkpoint layout.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Var var;
  };

  Var add(const std::string& name, Tensor init);
  // Uniform in +-1/sqrt(fan_in).
  Var add_uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in,
                  std::mt19937_64& rng);
  Var add_constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value);

  const Var& get(const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t parameter_count() const;
  void zero_grad();

  std::vector<double> flatten() const;
  void assign(const std::vector<double>& flat);

 private:
  std::vector<Entry> entries_;
};

struct Linear {
  Var weight;  // in x out
  Var bias;    // 1 x out, empty when the layer has no bias

  static Linear create(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out,
                       std::mt19937_64& rng, bool with_bias = true);
  Var operator()(const Var& x) const;
};

struct LayerNorm {
  Var gamma;
  Var beta;

  static LayerNorm create(ParamStore& store, const std::string& name, Eigen::Index width);
  Var operator()(const Var& x) const { return ag::layer_norm(x, gamma, beta); }
};

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Global gradient-norm clip; 0 disables.
  double grad_clip = 1.0;
};

class Adam {
 public:
  Adam(ParamStore& store, AdamConfig config);
  // Applies one update from the accumulated gradients, then clears them.
  void step();
  long steps_taken() const { return step_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

 private:
  ParamStore& store_;
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  long step_ = 0;
};

}  // namespace odgen::nn
