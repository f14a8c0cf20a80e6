#include "odgen/autograd.hpp"

#include <cmath>
#include <unordered_set>

#include "odgen/errors.hpp"

namespace odgen::ag {

namespace {

thread_local bool g_grad_enabled = true;

template <class Expr>
void accumulate(Node* node, const Expr& g) {
  if (!node->requires_grad) return;
  if (node->grad.size() == 0) {
    node->grad = g;
  } else {
    node->grad += g;
  }
}

Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(const Tensor&)> fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const Var& v : inputs) any = any || v.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(inputs.size());
      for (const Var& v : inputs) node->parents.push_back(v.shared());
      node->backward_fn = std::move(fn);
    }
  }
  return Var(std::move(node));
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError(std::string(op) + ": shape mismatch");
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var leaf(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Node* pa = a.node();
  Node* pb = b.node();
  return make_result(a.value() + b.value(), {a, b}, [pa, pb](const Tensor& g) {
    accumulate(pa, g);
    accumulate(pb, g);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Node* pa = a.node();
  Node* pb = b.node();
  return make_result(a.value() - b.value(), {a, b}, [pa, pb](const Tensor& g) {
    accumulate(pa, g);
    accumulate(pb, -g);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Node* pa = a.node();
  Node* pb = b.node();
  return make_result(a.value().cwiseProduct(b.value()), {a, b}, [pa, pb](const Tensor& g) {
    accumulate(pa, g.cwiseProduct(pb->value));
    accumulate(pb, g.cwiseProduct(pa->value));
  });
}

Var scale(const Var& a, double s) {
  Node* pa = a.node();
  return make_result(a.value() * s, {a}, [pa, s](const Tensor& g) { accumulate(pa, g * s); });
}

Var add_row(const Var& a, const Var& b) {
  if (b.rows() != 1 || b.cols() != a.cols()) throw ValidationError("add_row: bias must be 1 x cols");
  Node* pa = a.node();
  Node* pb = b.node();
  Tensor out = a.value();
  out.rowwise() += b.value().row(0);
  return make_result(std::move(out), {a, b}, [pa, pb](const Tensor& g) {
    accumulate(pa, g);
    accumulate(pb, g.colwise().sum());
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw ValidationError("matmul: inner dimension mismatch");
  Node* pa = a.node();
  Node* pb = b.node();
  Tensor out = a.value() * b.value();
  return make_result(std::move(out), {a, b}, [pa, pb](const Tensor& g) {
    if (pa->requires_grad) accumulate(pa, g * pb->value.transpose());
    if (pb->requires_grad) accumulate(pb, pa->value.transpose() * g);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) throw ValidationError("matmul_nt: inner dimension mismatch");
  Node* pa = a.node();
  Node* pb = b.node();
  Tensor out = a.value() * b.value().transpose();
  return make_result(std::move(out), {a, b}, [pa, pb](const Tensor& g) {
    if (pa->requires_grad) accumulate(pa, g * pb->value);
    if (pb->requires_grad) accumulate(pb, g.transpose() * pa->value);
  });
}

Var silu(const Var& a) {
  Node* pa = a.node();
  const Tensor sig = (1.0 + (-a.value().array()).exp()).inverse().matrix();
  Tensor out = a.value().cwiseProduct(sig);
  return make_result(std::move(out), {a}, [pa, sig](const Tensor& g) {
    const auto& x = pa->value.array();
    accumulate(pa, (g.array() * (sig.array() * (1.0 + x * (1.0 - sig.array())))).matrix());
  });
}

Var leaky_relu(const Var& a, double slope) {
  Node* pa = a.node();
  Tensor out = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  return make_result(std::move(out), {a}, [pa, slope](const Tensor& g) {
    Tensor d = pa->value.unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; });
    accumulate(pa, g.cwiseProduct(d));
  });
}

Var layer_norm(const Var& a, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index n = a.rows();
  const Eigen::Index c = a.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c)
    throw ValidationError("layer_norm: affine parameters must be 1 x cols");
  Tensor xhat(n, c);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = a.value().row(r).mean();
    const double var = (a.value().row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (a.value().row(r).array() - mu) * inv_std(r);
  }
  Tensor out = xhat;
  out.array().rowwise() *= gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  Node* pa = a.node();
  Node* pg = gamma.node();
  Node* pb = beta.node();
  return make_result(std::move(out), {a, gamma, beta},
                     [pa, pg, pb, xhat, inv_std, c](const Tensor& g) {
                       if (pg->requires_grad) accumulate(pg, g.cwiseProduct(xhat).colwise().sum());
                       if (pb->requires_grad) accumulate(pb, g.colwise().sum());
                       if (!pa->requires_grad) return;
                       Tensor gx = g;
                       gx.array().rowwise() *= pg->value.row(0).array();
                       Tensor dx(gx.rows(), c);
                       for (Eigen::Index r = 0; r < gx.rows(); ++r) {
                         const double m1 = gx.row(r).mean();
                         const double m2 = gx.row(r).dot(xhat.row(r)) / static_cast<double>(c);
                         dx.row(r) = (gx.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std(r);
                       }
                       accumulate(pa, dx);
                     });
}

Var softmax_rows(const Var& a) {
  Tensor out(a.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double m = a.value().row(r).maxCoeff();
    out.row(r) = (a.value().row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  Node* pa = a.node();
  Tensor y = out;
  return make_result(std::move(out), {a}, [pa, y](const Tensor& g) {
    const Eigen::VectorXd dots = g.cwiseProduct(y).rowwise().sum();
    Tensor d = g;
    d.colwise() -= dots;
    accumulate(pa, d.cwiseProduct(y));
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ValidationError("concat_cols: no inputs");
  const Eigen::Index n = parts[0].rows();
  Eigen::Index total = 0;
  for (const Var& p : parts) {
    if (p.rows() != n) throw ValidationError("concat_cols: row mismatch");
    total += p.cols();
  }
  Tensor out(n, total);
  std::vector<Node*> nodes;
  std::vector<Eigen::Index> widths;
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
    nodes.push_back(p.node());
    widths.push_back(p.cols());
  }
  return make_result(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                     [nodes, widths](const Tensor& g) {
                       Eigen::Index o = 0;
                       for (std::size_t k = 0; k < nodes.size(); ++k) {
                         if (nodes[k]->requires_grad) accumulate(nodes[k], g.middleCols(o, widths[k]));
                         o += widths[k];
                       }
                     });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ValidationError("slice_cols: out of range");
  Node* pa = a.node();
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  return make_result(a.value().middleCols(start, count), {a}, [pa, start, count, rows, cols](const Tensor& g) {
    Tensor full = Tensor::Zero(rows, cols);
    full.middleCols(start, count) = g;
    accumulate(pa, full);
  });
}

Var gather_rows(const Var& a, std::vector<int> index) {
  Tensor out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0 || index[r] >= a.rows()) throw ValidationError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(r)) = a.value().row(index[r]);
  }
  Node* pa = a.node();
  const Eigen::Index rows = a.rows();
  return make_result(std::move(out), {a}, [pa, index = std::move(index), rows](const Tensor& g) {
    Tensor d = Tensor::Zero(rows, g.cols());
    for (std::size_t r = 0; r < index.size(); ++r) d.row(index[r]) += g.row(static_cast<Eigen::Index>(r));
    accumulate(pa, d);
  });
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw ValidationError("reshape: size mismatch");
  Tensor out = Eigen::Map<const Tensor>(a.value().data(), rows, cols);
  Node* pa = a.node();
  const Eigen::Index r0 = a.rows();
  const Eigen::Index c0 = a.cols();
  return make_result(std::move(out), {a}, [pa, r0, c0](const Tensor& g) {
    accumulate(pa, Eigen::Map<const Tensor>(g.data(), r0, c0));
  });
}

Var rowwise_dot(const Var& a, const Var& b) {
  check_same_shape(a, b, "rowwise_dot");
  Tensor out = a.value().cwiseProduct(b.value()).rowwise().sum();
  Node* pa = a.node();
  Node* pb = b.node();
  return make_result(std::move(out), {a, b}, [pa, pb](const Tensor& g) {
    if (pa->requires_grad) {
      Tensor d = pb->value;
      d.array().colwise() *= g.col(0).array();
      accumulate(pa, d);
    }
    if (pb->requires_grad) {
      Tensor d = pa->value;
      d.array().colwise() *= g.col(0).array();
      accumulate(pb, d);
    }
  });
}

Var mul_col(const Var& a, const Var& w) {
  if (w.cols() != 1 || w.rows() != a.rows()) throw ValidationError("mul_col: weight must be n x 1");
  Tensor out = a.value();
  out.array().colwise() *= w.value().col(0).array();
  Node* pa = a.node();
  Node* pw = w.node();
  return make_result(std::move(out), {a, w}, [pa, pw](const Tensor& g) {
    if (pa->requires_grad) {
      Tensor d = g;
      d.array().colwise() *= pw->value.col(0).array();
      accumulate(pa, d);
    }
    if (pw->requires_grad) accumulate(pw, Tensor(g.cwiseProduct(pa->value).rowwise().sum()));
  });
}

Var outer_sum(const Var& a, const Var& b) {
  if (a.cols() != 1 || b.cols() != 1) throw ValidationError("outer_sum: inputs must be column vectors");
  Tensor out(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) out.row(i) = b.value().col(0).transpose().array() + a.value()(i, 0);
  Node* pa = a.node();
  Node* pb = b.node();
  return make_result(std::move(out), {a, b}, [pa, pb](const Tensor& g) {
    accumulate(pa, Tensor(g.rowwise().sum()));
    accumulate(pb, Tensor(g.colwise().sum().transpose()));
  });
}

Var mean_rows(const Var& a) {
  const Eigen::Index n = a.rows();
  Node* pa = a.node();
  return make_result(a.value().colwise().mean(), {a}, [pa, n](const Tensor& g) {
    Tensor d = g.replicate(n, 1) / static_cast<double>(n);
    accumulate(pa, d);
  });
}

Var sum_all(const Var& a) {
  Tensor out(1, 1);
  out(0, 0) = a.value().sum();
  Node* pa = a.node();
  const Eigen::Index r = a.rows();
  const Eigen::Index c = a.cols();
  return make_result(std::move(out), {a}, [pa, r, c](const Tensor& g) {
    accumulate(pa, Tensor::Constant(r, c, g(0, 0)));
  });
}

Var cross_entropy_rows(const Var& logits, std::span<const int> target) {
  const Eigen::Index n = logits.rows();
  const Eigen::Index d = logits.cols();
  if (static_cast<Eigen::Index>(target.size()) != n) throw ValidationError("cross_entropy: target length mismatch");
  Tensor prob(n, d);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const int k = target[static_cast<std::size_t>(r)];
    if (k < 0 || k >= d) throw ValidationError("cross_entropy: class index out of range");
    const double m = logits.value().row(r).maxCoeff();
    prob.row(r) = (logits.value().row(r).array() - m).exp();
    const double z = prob.row(r).sum();
    prob.row(r) /= z;
    loss += -(logits.value()(r, k) - m - std::log(z));
  }
  Tensor out(1, 1);
  out(0, 0) = loss / static_cast<double>(n);
  Node* pl = logits.node();
  std::vector<int> tgt(target.begin(), target.end());
  return make_result(std::move(out), {logits}, [pl, prob, tgt = std::move(tgt), n](const Tensor& g) {
    Tensor d = prob;
    for (Eigen::Index r = 0; r < n; ++r) d(r, tgt[static_cast<std::size_t>(r)]) -= 1.0;
    accumulate(pl, d * (g(0, 0) / static_cast<double>(n)));
  });
}

Var masked_mse(const Var& pred, const Tensor& target, const Tensor& mask) {
  if (pred.cols() != 1 || target.rows() != pred.rows() || mask.rows() != pred.rows() ||
      target.cols() != 1 || mask.cols() != 1)
    throw ValidationError("masked_mse: expects n x 1 inputs");
  const double denom = mask.sum();
  if (!(denom > 0.0)) throw ValidationError("masked_mse: empty mask");
  const Tensor diff = (pred.value() - target).cwiseProduct(mask);
  Tensor out(1, 1);
  out(0, 0) = diff.cwiseProduct(pred.value() - target).sum() / denom;
  Node* pp = pred.node();
  return make_result(std::move(out), {pred}, [pp, diff, denom](const Tensor& g) {
    accumulate(pp, diff * (2.0 * g(0, 0) / denom));
  });
}

void backward(const Var& root) {
  if (!root.requires_grad()) return;
  // Iterative post-order DFS for a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  accumulate(root.node(), Tensor::Ones(root.rows(), root.cols()));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->grad.size() != 0) node->backward_fn(node->grad);
  }
}

}  // namespace odgen::ag
