#include "odgen/nn.hpp"

#include <cmath>

#include "odgen/errors.hpp"

namespace odgen::nn {

Var ParamStore::add(const std::string& name, Tensor init) {
  for (const Entry& e : entries_)
    if (e.name == name) throw ValidationError("duplicate parameter name: " + name);
  entries_.push_back({name, ag::leaf(std::move(init))});
  return entries_.back().var;
}

Var ParamStore::add_uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                            Eigen::Index fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(rows, cols);
  for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = dist(rng);
  return add(name, std::move(t));
}

Var ParamStore::add_constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value) {
  return add(name, Tensor::Constant(rows, cols, value));
}

const Var& ParamStore::get(const std::string& name) const {
  for (const Entry& e : entries_)
    if (e.name == name) return e.var;
  throw ValidationError("unknown parameter: " + name);
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) n += static_cast<std::size_t>(e.var.value().size());
  return n;
}

void ParamStore::zero_grad() {
  for (Entry& e : entries_) e.var.zero_grad();
}

std::vector<double> ParamStore::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const Entry& e : entries_) {
    const Tensor& v = e.var.value();
    flat.insert(flat.end(), v.data(), v.data() + v.size());
  }
  return flat;
}

void ParamStore::assign(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) throw ValidationError("parameter vector length mismatch");
  std::size_t off = 0;
  for (Entry& e : entries_) {
    Tensor& v = e.var.mutable_value();
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + v.size()), v.data());
    off += static_cast<std::size_t>(v.size());
  }
}

Linear Linear::create(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index out,
                      std::mt19937_64& rng, bool with_bias) {
  Linear l;
  l.weight = store.add_uniform(name + ".weight", in, out, in, rng);
  if (with_bias) l.bias = store.add_uniform(name + ".bias", 1, out, in, rng);
  return l;
}

Var Linear::operator()(const Var& x) const {
  Var y = ag::matmul(x, weight);
  return bias ? ag::add_row(y, bias) : y;
}

LayerNorm LayerNorm::create(ParamStore& store, const std::string& name, Eigen::Index width) {
  return {store.add_constant(name + ".gamma", 1, width, 1.0), store.add_constant(name + ".beta", 1, width, 0.0)};
}

Adam::Adam(ParamStore& store, AdamConfig config) : store_(store), config_(config) {
  for (const auto& e : store_.entries()) {
    m_.push_back(Tensor::Zero(e.var.rows(), e.var.cols()));
    v_.push_back(Tensor::Zero(e.var.rows(), e.var.cols()));
  }
}

void Adam::step() {
  const auto& entries = store_.entries();
  double norm2 = 0.0;
  for (const auto& e : entries)
    if (e.var.has_grad()) norm2 += e.var.grad().squaredNorm();
  double clip = 1.0;
  if (config_.grad_clip > 0.0 && norm2 > config_.grad_clip * config_.grad_clip)
    clip = config_.grad_clip / std::sqrt(norm2);

  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    Var var = entries[k].var;
    if (!var.has_grad()) continue;
    const Tensor g = var.grad() * clip;
    m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * g;
    v_[k] = config_.beta2 * v_[k] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    Tensor& w = var.mutable_value();
    w.array() -= config_.learning_rate * (m_[k].array() / bc1) / ((v_[k].array() / bc2).sqrt() + config_.epsilon);
  }
  store_.zero_grad();
}

}  // namespace odgen::nn
