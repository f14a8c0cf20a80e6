#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "odgen/core.hpp"

namespace odgen::metrics {

double rmse(const Matrix& real, const Matrix& generated);
// RMSE divided by the population standard deviation of `real`; throws ValidationError when
// `real` is constant.
double nrmse(const Matrix& real, const Matrix& generated);

// 2 sum min(F, F_hat) / (sum F + sum F_hat); 1 when both are all zero.
double cpc(const Matrix& real, const Matrix& generated);
double cpc_binary(const AdjacencyMatrix& real, const AdjacencyMatrix& generated);

// (KL(P|Q) + KL(Q|P)) / 2 after normalizing, adding eps to every bin and renormalizing.
double jsd(const Vector& p, const Vector& q, double eps = 1e-10);

struct BinningConfig {
  // Log bins for the positive values. With `adaptive`, the count is
  // clamp(ceil(sqrt(#positive samples of both sides)), min_bins, max_bins).
  int max_bins = 50;
  int min_bins = 5;
  bool adaptive = true;
  double eps = 1e-10;

  void validate() const;
};

void to_json(nlohmann::json& j, const BinningConfig& c);
void from_json(const nlohmann::json& j, BinningConfig& c);

// Counts on a shared binning: entry 0 is the zero bin, entries 1..B are log bins spanning the
// positive values of both inputs.
struct HistogramPair {
  std::vector<double> edges;  // B + 1 log-bin edges; empty when no positive value exists
  Vector real;
  Vector generated;
};

int log_bin_count(std::size_t positives, const BinningConfig& config);
HistogramPair histogram_pair(const std::vector<double>& real, const std::vector<double>& generated,
                             const BinningConfig& config);
double statistic_jsd(const std::vector<double>& real, const std::vector<double>& generated,
                     const BinningConfig& config);

struct Confusion {
  double accuracy = 0.0;
  double fn_rate = 0.0;
  double fp_rate = 0.0;
  double nzr_real = 0.0;
  double nzr_generated = 0.0;
  long long true_positive = 0;
  long long false_negative = 0;
  long long false_positive = 0;
  long long true_negative = 0;
  // Set when the real matrix has no ones (fn_rate undefined) or no zeros (fp_rate undefined).
  bool fn_undefined = false;
  bool fp_undefined = false;
};

Confusion topology_confusion(const AdjacencyMatrix& real, const AdjacencyMatrix& generated);

struct PowerLawConfig {
  int bins = 20;
};

struct PowerLawFit {
  double exponent = 0.0;
  double r2 = 0.0;
  int bins_used = 0;
};

// Mean-normalized samples, log-binned density, least squares of log density on log value.
// Non-positive samples are dropped. Throws ValidationError below 10 positive samples and
// FitError with fewer than 3 non-empty bins.
PowerLawFit powerlaw_fit(const std::vector<double>& samples, const PowerLawConfig& config = {});

struct DensityTable {
  std::vector<double> centers;
  std::vector<double> densities;
};

// Log-binned density of mean-normalized positive samples, as used by powerlaw_fit.
DensityTable log_density(const std::vector<double>& samples, int bins);

// Statistic samples of one OD matrix.
std::vector<double> inflow_samples(const ODMatrix& od);
std::vector<double> outflow_samples(const ODMatrix& od);
std::vector<double> odflow_samples(const ODMatrix& od);
std::vector<double> degree_samples(const ODMatrix& od);

struct EvaluationConfig {
  BinningConfig binning;
  PowerLawConfig powerlaw;
};

struct EvaluationReport {
  double rmse = 0.0;
  double nrmse = 0.0;  // NaN when the real matrix is constant
  double cpc = 0.0;
  double jsd_inflow = 0.0;
  double jsd_outflow = 0.0;
  double jsd_odflow = 0.0;
  double jsd_degree = 0.0;
  double cpc_binary = 0.0;
  Confusion topology;
  // Keys "<statistic>_<real|generated>"; NaN when the fit is undefined.
  std::vector<std::pair<std::string, PowerLawFit>> powerlaw;

  std::string to_text() const;
  nlohmann::json to_json() const;
};

EvaluationReport evaluate(const ODMatrix& real, const ODMatrix& generated, const EvaluationConfig& config = {});

struct PlotRow {
  std::string statistic;
  std::string source;
  double center = 0.0;
  double density = 0.0;
};

// Density tables of inflow, outflow and odflow for both matrices.
std::vector<PlotRow> plot_data(const ODMatrix& real, const ODMatrix& generated, int bins);
void write_plot_data(const std::string& path, const std::vector<PlotRow>& rows);
std::vector<PlotRow> read_plot_data(const std::string& path);

}  // namespace odgen::metrics
