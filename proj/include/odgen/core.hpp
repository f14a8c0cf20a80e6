#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace odgen {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Region {
  int id = 0;
  Point centroid;
  std::vector<double> features;
};

// Ordered feature names. Cities built from different manifests cannot be mixed.
using FeatureManifest = std::vector<std::string>;

// Regions of one city plus their pairwise planar distances.
class CityCharacteristics {
 public:
  // Distances are computed from the centroids.
  CityCharacteristics(std::vector<Region> regions, FeatureManifest manifest);
  CityCharacteristics(std::vector<Region> regions, FeatureManifest manifest, Matrix distances);

  int size() const { return static_cast<int>(regions_.size()); }
  const std::vector<Region>& regions() const { return regions_; }
  const FeatureManifest& manifest() const { return manifest_; }
  const Matrix& distances() const { return distances_; }
  int feature_dim() const { return static_cast<int>(manifest_.size()); }

  // N x F, row i holds the features of region i.
  Matrix feature_matrix() const;
  std::vector<Point> centroids() const;
  // Column index of a named feature; throws ValidationError when absent.
  int feature_index(const std::string& name) const;

 private:
  void validate() const;

  std::vector<Region> regions_;
  FeatureManifest manifest_;
  Matrix distances_;
};

// Dense N x N matrix of non-negative finite flows. Diagonal entries are ordinary flows.
class ODMatrix {
 public:
  ODMatrix() = default;
  explicit ODMatrix(Matrix values);
  static ODMatrix zeros(int n) { return ODMatrix(Matrix::Zero(n, n)); }

  int size() const { return static_cast<int>(values_.rows()); }
  const Matrix& values() const { return values_; }
  double operator()(int i, int j) const { return values_(i, j); }
  double total() const { return values_.sum(); }

  bool operator==(const ODMatrix& other) const { return values_ == other.values_; }

 private:
  Matrix values_;
};

// Binary N x N matrix; entries are exactly 0.0 or 1.0.
class AdjacencyMatrix {
 public:
  AdjacencyMatrix() = default;
  explicit AdjacencyMatrix(Matrix values);
  static AdjacencyMatrix zeros(int n) { return AdjacencyMatrix(Matrix::Zero(n, n)); }

  int size() const { return static_cast<int>(values_.rows()); }
  const Matrix& values() const { return values_; }
  bool operator()(int i, int j) const { return values_(i, j) != 0.0; }
  double count() const { return values_.sum(); }
  // Fraction of ones (NZR).
  double density() const;

  bool operator==(const AdjacencyMatrix& other) const { return values_ == other.values_; }

 private:
  Matrix values_;
};

AdjacencyMatrix to_adjacency(const ODMatrix& od);

Matrix distance_matrix(const std::vector<Point>& centroids);

struct NodeFlux {
  Vector inflow;
  Vector outflow;
};

NodeFlux node_flux(const ODMatrix& od);

}  // namespace odgen
