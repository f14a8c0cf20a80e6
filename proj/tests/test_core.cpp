#include <doctest.h>

#include <random>

#include "odgen/core.hpp"
#include "odgen/errors.hpp"
#include "oracles.hpp"

using namespace odgen;

namespace {

Matrix random_flows(int n, std::mt19937_64& rng, double zero_prob = 0.5) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = u(rng) < zero_prob ? 0.0 : std::floor(100 * u(rng)) + 1;
  return m;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("to_adjacency marks positive flows") {
    CHECK(to_adjacency(ODMatrix::zeros(3)) == AdjacencyMatrix::zeros(3));
    Matrix f(2, 2);
    f << 0, 3, 1, 0;
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    CHECK(to_adjacency(ODMatrix(f)) == AdjacencyMatrix(m));
  }

  TEST_CASE("to_adjacency is invariant under positive scaling") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 20; ++rep) {
      const Matrix f = random_flows(7, rng);
      for (double c : {1e-6, 0.5, 3.0, 1e6}) CHECK(to_adjacency(ODMatrix(c * f)) == to_adjacency(ODMatrix(f)));
    }
  }

  TEST_CASE("distance_matrix") {
    CHECK(distance_matrix({{1, 1}, {1, 1}}) == Matrix::Zero(2, 2));
    const Matrix d = distance_matrix({{0, 0}, {3, 4}});
    CHECK(d(0, 1) == 5.0);
    CHECK(d(1, 0) == 5.0);
    CHECK(d(0, 0) == 0.0);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-50, 50);
    std::vector<Point> pts;
    std::vector<std::pair<double, double>> raw;
    for (int k = 0; k < 5; ++k) {
      pts.push_back({u(rng), u(rng)});
      raw.emplace_back(pts.back().x, pts.back().y);
    }
    CHECK((distance_matrix(pts) - oracle::pairwise_distances(raw)).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("distance_matrix satisfies the triangle inequality") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 10);
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<Point> pts;
      for (int k = 0; k < 12; ++k) pts.push_back({u(rng), u(rng)});
      const Matrix d = distance_matrix(pts);
      CHECK(d.isApprox(d.transpose(), 0.0));
      for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j)
          for (int k = 0; k < 12; ++k) CHECK(d(i, k) <= d(i, j) + d(j, k) + 1e-9);
    }
  }

  TEST_CASE("node_flux sums rows and columns") {
    const NodeFlux z = node_flux(ODMatrix::zeros(4));
    CHECK(z.inflow == Vector::Zero(4));
    CHECK(z.outflow == Vector::Zero(4));
    Matrix f(2, 2);
    f << 0, 2, 5, 0;
    const NodeFlux x = node_flux(ODMatrix(f));
    CHECK(x.inflow(0) == 5.0);
    CHECK(x.inflow(1) == 2.0);
    CHECK(x.outflow(0) == 2.0);
    CHECK(x.outflow(1) == 5.0);
  }

  TEST_CASE("node_flux conserves mass") {
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 20; ++rep) {
      const Matrix f = random_flows(9, rng, 0.3);
      double total = 0;
      Vector in = Vector::Zero(9), out = Vector::Zero(9);
      for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) {
          total += f(i, j);
          in(j) += f(i, j);
          out(i) += f(i, j);
        }
      const NodeFlux flux = node_flux(ODMatrix(f));
      CHECK(flux.inflow == in);
      CHECK(flux.outflow == out);
      CHECK(flux.inflow.sum() == total);
      CHECK(flux.outflow.sum() == total);
    }
  }

  TEST_CASE("value types reject invalid contents") {
    Matrix neg(2, 2);
    neg << 0, -1, 0, 0;
    CHECK_THROWS_AS(ODMatrix{neg}, ValidationError);
    CHECK_THROWS_AS(ODMatrix{Matrix::Zero(2, 3)}, ValidationError);
    Matrix nan = Matrix::Zero(2, 2);
    nan(0, 0) = std::nan("");
    CHECK_THROWS_AS(ODMatrix{nan}, ValidationError);
    Matrix half = Matrix::Zero(2, 2);
    half(1, 0) = 0.5;
    CHECK_THROWS_AS(AdjacencyMatrix{half}, ValidationError);
  }

  TEST_CASE("city validation") {
    const FeatureManifest manifest{"population"};
    std::vector<Region> ok{{0, {0, 0}, {1.0}}, {1, {3, 4}, {2.0}}};
    const CityCharacteristics city(ok, manifest);
    CHECK(city.size() == 2);
    CHECK(city.distances()(0, 1) == 5.0);
    CHECK(city.feature_index("population") == 0);
    CHECK_THROWS_AS(city.feature_index("jobs"), ValidationError);

    std::vector<Region> gap{{0, {0, 0}, {1.0}}, {2, {3, 4}, {2.0}}};
    CHECK_THROWS_AS(CityCharacteristics(gap, manifest), ValidationError);
    std::vector<Region> wide{{0, {0, 0}, {1.0, 2.0}}, {1, {3, 4}, {2.0}}};
    CHECK_THROWS_AS(CityCharacteristics(wide, manifest), ValidationError);

    Matrix asym(2, 2);
    asym << 0, 1, 2, 0;
    CHECK_THROWS_AS(CityCharacteristics(ok, manifest, asym), ValidationError);
    Matrix diag(2, 2);
    diag << 1, 1, 1, 0;
    CHECK_THROWS_AS(CityCharacteristics(ok, manifest, diag), ValidationError);
  }
}
