#include "odgen/core.hpp"

#include <cmath>
#include <sstream>

#include "odgen/errors.hpp"

namespace odgen {

CityCharacteristics::CityCharacteristics(std::vector<Region> regions, FeatureManifest manifest)
    : regions_(std::move(regions)), manifest_(std::move(manifest)) {
  distances_ = distance_matrix(centroids());
  validate();
}

CityCharacteristics::CityCharacteristics(std::vector<Region> regions, FeatureManifest manifest,
                                         Matrix distances)
    : regions_(std::move(regions)), manifest_(std::move(manifest)), distances_(std::move(distances)) {
  validate();
}

void CityCharacteristics::validate() const {
  const int n = size();
  if (n < 1) throw ValidationError("city must contain at least one region");
  for (int i = 0; i < n; ++i) {
    const Region& r = regions_[i];
    if (r.id != i) {
      std::ostringstream msg;
      msg << "region ids must be contiguous 0..N-1; position " << i << " holds id " << r.id;
      throw ValidationError(msg.str());
    }
    if (r.features.size() != manifest_.size()) {
      std::ostringstream msg;
      msg << "region " << i << " has " << r.features.size() << " features, manifest lists "
          << manifest_.size();
      throw ValidationError(msg.str());
    }
    for (double f : r.features) {
      if (!std::isfinite(f)) throw ValidationError("non-finite feature in region " + std::to_string(i));
    }
  }
  if (distances_.rows() != n || distances_.cols() != n)
    throw ValidationError("distance matrix must be N x N");
  for (int i = 0; i < n; ++i) {
    if (distances_(i, i) != 0.0) throw ValidationError("distance matrix diagonal must be zero");
    for (int j = 0; j < n; ++j) {
      const double d = distances_(i, j);
      if (!std::isfinite(d) || d < 0.0) throw ValidationError("distances must be finite and non-negative");
      if (d != distances_(j, i)) throw ValidationError("distance matrix must be symmetric");
    }
  }
}

Matrix CityCharacteristics::feature_matrix() const {
  Matrix x(size(), feature_dim());
  for (int i = 0; i < size(); ++i)
    for (int k = 0; k < feature_dim(); ++k) x(i, k) = regions_[i].features[k];
  return x;
}

std::vector<Point> CityCharacteristics::centroids() const {
  std::vector<Point> pts;
  pts.reserve(regions_.size());
  for (const Region& r : regions_) pts.push_back(r.centroid);
  return pts;
}

int CityCharacteristics::feature_index(const std::string& name) const {
  for (std::size_t k = 0; k < manifest_.size(); ++k)
    if (manifest_[k] == name) return static_cast<int>(k);
  throw ValidationError("feature '" + name + "' not present in manifest");
}

ODMatrix::ODMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() != values_.cols()) throw ValidationError("OD matrix must be square");
  for (Eigen::Index k = 0; k < values_.size(); ++k) {
    const double v = values_.data()[k];
    if (!std::isfinite(v) || v < 0.0) throw ValidationError("OD matrix entries must be finite and >= 0");
  }
}

AdjacencyMatrix::AdjacencyMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() != values_.cols()) throw ValidationError("adjacency matrix must be square");
  for (Eigen::Index k = 0; k < values_.size(); ++k) {
    const double v = values_.data()[k];
    if (v != 0.0 && v != 1.0) throw ValidationError("adjacency entries must be 0 or 1");
  }
}

double AdjacencyMatrix::density() const {
  if (values_.size() == 0) return 0.0;
  return values_.sum() / static_cast<double>(values_.size());
}

AdjacencyMatrix to_adjacency(const ODMatrix& od) {
  return AdjacencyMatrix((od.values().array() > 0.0).cast<double>().matrix());
}

Matrix distance_matrix(const std::vector<Point>& centroids) {
  const int n = static_cast<int>(centroids.size());
  Matrix d = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double v = std::hypot(centroids[i].x - centroids[j].x, centroids[i].y - centroids[j].y);
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

NodeFlux node_flux(const ODMatrix& od) {
  return {od.values().colwise().sum().transpose(), od.values().rowwise().sum()};
}

}  // namespace odgen
