#include "odgen/baselines.hpp"

#include <array>
#include <cmath>
#include <iostream>

#include "odgen/errors.hpp"

namespace odgen::gravity {

namespace {

Vector masses(const CityCharacteristics& city, const std::string& feature) {
  const int col = city.feature_index(feature);
  const Matrix x = city.feature_matrix();
  Vector m = x.col(col);
  if ((m.array() <= 0.0).any()) throw ValidationError("mass feature '" + feature + "' must be positive");
  return m;
}

}  // namespace

void to_json(nlohmann::json& j, const GravityParams& p) {
  j = nlohmann::json{{"gamma", p.gamma},
                     {"a", p.a},
                     {"b", p.b},
                     {"lambda", p.lambda},
                     {"mass_feature", p.mass_feature},
                     {"residual_rmse", p.residual_rmse},
                     {"observations", p.observations},
                     {"zero_distance_pairs", p.zero_distance_pairs}};
}

void from_json(const nlohmann::json& j, GravityParams& p) {
  p.gamma = j.at("gamma").get<double>();
  p.a = j.at("a").get<double>();
  p.b = j.at("b").get<double>();
  p.lambda = j.at("lambda").get<double>();
  p.mass_feature = j.value("mass_feature", std::string("population"));
  p.residual_rmse = j.value("residual_rmse", 0.0);
  p.observations = j.value("observations", 0);
  p.zero_distance_pairs = j.value("zero_distance_pairs", 0);
  for (double v : {p.gamma, p.a, p.b, p.lambda})
    if (!std::isfinite(v)) throw ValidationError("gravity parameters must be finite");
}

GravityParams fit_gravity(const std::vector<CityFlows>& cities, const std::string& mass_feature) {
  std::vector<std::array<double, 4>> rows;
  std::vector<double> ys;
  int skipped = 0;
  for (const CityFlows& cf : cities) {
    if (cf.city == nullptr || cf.od == nullptr) throw ValidationError("null city in gravity fit");
    const int n = cf.city->size();
    if (cf.od->size() != n) throw ValidationError("OD matrix and city sizes differ");
    const Vector m = masses(*cf.city, mass_feature);
    const Matrix& d = cf.city->distances();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j || !((*cf.od)(i, j) > 0.0)) continue;
        if (!(d(i, j) > 0.0)) {
          ++skipped;
          continue;
        }
        rows.push_back({1.0, std::log(m(i)), std::log(m(j)), -std::log(d(i, j))});
        ys.push_back(std::log((*cf.od)(i, j)));
      }
  }
  if (skipped > 0) std::cerr << "warning: gravity fit skipped " << skipped << " zero-distance region pairs\n";
  if (rows.size() < 4) throw FitError("gravity fit needs at least 4 positive off-diagonal flows");

  Matrix X(static_cast<Eigen::Index>(rows.size()), 4);
  Vector y(static_cast<Eigen::Index>(ys.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int c = 0; c < 4; ++c) X(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    y(static_cast<Eigen::Index>(r)) = ys[r];
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  if (qr.rank() < 4) throw FitError("gravity design matrix is rank deficient");
  const Vector beta = qr.solve(y);
  GravityParams p;
  p.gamma = std::exp(beta(0));
  p.a = beta(1);
  p.b = beta(2);
  p.lambda = beta(3);
  p.mass_feature = mass_feature;
  p.residual_rmse = std::sqrt((X * beta - y).squaredNorm() / static_cast<double>(ys.size()));
  p.observations = static_cast<int>(ys.size());
  p.zero_distance_pairs = skipped;
  for (double v : {p.gamma, p.a, p.b, p.lambda})
    if (!std::isfinite(v)) throw FitError("gravity fit produced non-finite parameters");
  return p;
}

GravityParams fit_gravity(const CityCharacteristics& city, const ODMatrix& od, const std::string& mass_feature) {
  return fit_gravity(std::vector<CityFlows>{{&city, &od}}, mass_feature);
}

Matrix gravity_expected(const CityCharacteristics& city, const GravityParams& params) {
  const int n = city.size();
  const Vector m = masses(city, params.mass_feature);
  const Matrix& d = city.distances();
  Matrix out = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || !(d(i, j) > 0.0)) continue;
      out(i, j) = params.gamma * std::pow(m(i), params.a) * std::pow(m(j), params.b) * std::pow(d(i, j), -params.lambda);
    }
  return out;
}

ODMatrix generate_gravity(const CityCharacteristics& city, const GravityParams& params) {
  Matrix f = gravity_expected(city, params).unaryExpr([](double v) { return std::round(v); });
  if (!f.allFinite()) throw NumericalError("gravity prediction overflowed");
  return ODMatrix(std::move(f));
}

}  // namespace odgen::gravity
