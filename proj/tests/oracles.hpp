#pragma once

// Reference computations written independently of the library, used as test oracles.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Mat pairwise_distances(const std::vector<std::pair<double, double>>& pts) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Mat d(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double dx = pts[i].first - pts[j].first;
      const double dy = pts[i].second - pts[j].second;
      d(i, j) = std::sqrt(dx * dx + dy * dy);
    }
  return d;
}

// Power iteration on (S + c I), S = A + A^T, with c = 1 + max row sum so the dominant
// eigenvalue is strictly separated; run to a tight tolerance.
inline Vec power_centrality(const Mat& a) {
  const Mat s = a + a.transpose();
  const Eigen::Index n = s.rows();
  if (s.cwiseAbs().sum() == 0.0) return Vec::Zero(n);
  const double c = 1.0 + s.rowwise().sum().maxCoeff();
  Vec x = Vec::Ones(n) / std::sqrt(static_cast<double>(n));
  for (int it = 0; it < 200000; ++it) {
    Vec y = s * x + c * x;
    y /= y.norm();
    if ((y - x).cwiseAbs().maxCoeff() < 1e-15) {
      x = y;
      break;
    }
    x = y;
  }
  return x;
}

inline Vec eigen_centrality(const Mat& a) {
  const Mat s = a + a.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  Vec v = es.eigenvectors().col(s.rows() - 1);
  if (v.sum() < 0) v = -v;
  return v / v.norm();
}

// Uniform-noise chain for d classes: Q_t = alpha_t I + (1 - alpha_t)/d 11^T.
inline Mat q_step(double alpha, int d) {
  return alpha * Mat::Identity(d, d) + (1.0 - alpha) / d * Mat::Ones(d, d);
}

// q(x_t = b | x_0 = a) by brute-force enumeration of every path of length t.
inline double path_prob(const std::vector<double>& alphas, int d, int a, int b, int t) {
  std::vector<double> p(static_cast<std::size_t>(d), 0.0);
  p[static_cast<std::size_t>(a)] = 1.0;
  for (int s = 1; s <= t; ++s) {
    const Mat q = q_step(alphas[static_cast<std::size_t>(s - 1)], d);
    std::vector<double> next(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) next[static_cast<std::size_t>(j)] += p[static_cast<std::size_t>(i)] * q(i, j);
    p = next;
  }
  return p[static_cast<std::size_t>(b)];
}

// Bayes: q(x_{t-1} = k | x_t, x_0) = q(x_{t-1}=k | x_0) q(x_t | x_{t-1}=k) / sum_k' (...)
inline Vec brute_posterior(const std::vector<double>& alphas, int d, int xt, int x0, int t) {
  Vec out(d);
  const Mat q = q_step(alphas[static_cast<std::size_t>(t - 1)], d);
  for (int k = 0; k < d; ++k) out(k) = path_prob(alphas, d, x0, k, t - 1) * q(k, xt);
  return out / out.sum();
}

inline Vec brute_mixture(const std::vector<double>& alphas, int d, int xt, const Vec& p0, int t) {
  Vec out = Vec::Zero(d);
  for (int x0 = 0; x0 < d; ++x0) {
    const double evidence = path_prob(alphas, d, x0, xt, t);
    if (evidence == 0.0) continue;
    out += p0(x0) * brute_posterior(alphas, d, xt, x0, t);
  }
  return out / out.sum();
}

// Smoothed symmetric KL exactly as a textbook evaluation.
inline double symmetric_kl(std::vector<double> p, std::vector<double> q, double eps) {
  double sp = 0, sq = 0;
  for (double v : p) sp += v;
  for (double v : q) sq += v;
  for (auto& v : p) v = v / sp + eps;
  for (auto& v : q) v = v / sq + eps;
  sp = sq = 0;
  for (double v : p) sp += v;
  for (double v : q) sq += v;
  double a = 0, b = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double pk = p[k] / sp, qk = q[k] / sq;
    a += pk * std::log(pk / qk);
    b += qk * std::log(qk / pk);
  }
  return 0.5 * (a + b);
}

// Row-wise layer normalization with affine parameters.
inline Mat layer_norm(const Mat& x, const Mat& gamma, const Mat& beta, double eps = 1e-5) {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    double var = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) var += (x(r, c) - mean) * (x(r, c) - mean);
    var /= static_cast<double>(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      out(r, c) = (x(r, c) - mean) / std::sqrt(var + eps) * gamma(0, c) + beta(0, c);
  }
  return out;
}

inline double silu(double v) { return v / (1.0 + std::exp(-v)); }

// Central finite-difference gradient of f at x.
inline Vec finite_difference(const std::function<double(const Vec&)>& f, Vec x, double h) {
  Vec g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double saved = x(k);
    x(k) = saved + h;
    const double up = f(x);
    x(k) = saved - h;
    const double down = f(x);
    x(k) = saved;
    g(k) = (up - down) / (2 * h);
  }
  return g;
}

}  // namespace oracle
