#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "odgen/core.hpp"

namespace odgen::gravity {

// F_ij = gamma * m_i^a * m_j^b * d_ij^-lambda
struct GravityParams {
  double gamma = 1.0;
  double a = 1.0;
  double b = 1.0;
  double lambda = 1.0;
  std::string mass_feature = "population";
  // Fit diagnostics: RMS of log-space residuals and number of (i, j) pairs used.
  double residual_rmse = 0.0;
  int observations = 0;
  // Distinct-region pairs skipped because their distance is 0.
  int zero_distance_pairs = 0;
};

void to_json(nlohmann::json& j, const GravityParams& p);
void from_json(const nlohmann::json& j, GravityParams& p);

struct CityFlows {
  const CityCharacteristics* city = nullptr;
  const ODMatrix* od = nullptr;
};

// OLS on log F = log gamma + a log m_i + b log m_j - lambda log d_ij over positive off-diagonal
// flows of all given cities. Throws FitError with fewer than 4 observations or a singular design.
GravityParams fit_gravity(const std::vector<CityFlows>& cities, const std::string& mass_feature = "population");
GravityParams fit_gravity(const CityCharacteristics& city, const ODMatrix& od,
                          const std::string& mass_feature = "population");

// Unrounded closed form; the diagonal and zero-distance pairs are 0.
Matrix gravity_expected(const CityCharacteristics& city, const GravityParams& params);

// Rounded closed form with a zero diagonal.
ODMatrix generate_gravity(const CityCharacteristics& city, const GravityParams& params);

}  // namespace odgen::gravity
