#include <doctest.h>

#include <random>

#include "odgen/errors.hpp"
#include "odgen/flow_diffusion.hpp"
#include "odgen/metrics.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace odgen;
using testing_helpers::small_city;
using testing_helpers::small_model;

namespace {

Matrix random_integer_flows(int n, double max, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, static_cast<int>(max));
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = u(rng);
  return m;
}

AdjacencyMatrix random_mask(int n, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = coin(rng) ? 1.0 : 0.0;
  return AdjacencyMatrix(m);
}

}  // namespace

TEST_SUITE("flow_diffusion") {
  TEST_CASE("normalization endpoints and round trip") {
    const flow::FlowScaler s{250.0};
    Matrix f(1, 2);
    f << 0.0, 250.0;
    const Matrix z = s.normalize(f);
    CHECK(z(0, 0) == -1.0);
    CHECK(z(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 50; ++rep) {
      const Matrix raw = random_integer_flows(9, 250.0, rng);
      CHECK(s.denormalize(s.normalize(raw)) == raw);
    }
    CHECK_THROWS_AS((flow::FlowScaler{0.0}).normalize(f), ValidationError);
    CHECK_THROWS_AS((flow::FlowScaler{-2.0}).validate(), ValidationError);
    Matrix below(1, 1);
    below << -1.7;
    CHECK(s.denormalize(below)(0, 0) == 0.0);
  }

  TEST_CASE("scaler fit takes the largest flow") {
    Matrix a = Matrix::Zero(2, 2), b = Matrix::Zero(2, 2);
    a(0, 1) = 5;
    b(1, 0) = 17;
    const ODMatrix oa(a), ob(b);
    CHECK(flow::FlowScaler::fit({&oa, &ob}).f_max == 17.0);
    const ODMatrix zero = ODMatrix::zeros(2);
    CHECK_THROWS_AS(flow::FlowScaler::fit({&zero}), ValidationError);
  }

  TEST_CASE("forward noise identities") {
    const NoiseSchedule noiseless = schedule_from_alphas({1.0, 1.0});
    std::mt19937_64 rng(2);
    const Matrix f0 = Matrix::Random(4, 4);
    CHECK(flow::forward_noise(f0, 2, noiseless, rng).noisy == f0);
    const NoiseSchedule s = make_cosine_schedule(100);
    CHECK(flow::noisy_from(f0, Matrix::Zero(4, 4), 40, s) == std::sqrt(s.alpha_bar_at(40)) * f0);
    CHECK_THROWS_AS(flow::forward_noise(f0, 0, s, rng), ValidationError);
    CHECK_THROWS_AS(flow::forward_noise(f0, 101, s, rng), ValidationError);
  }

  TEST_CASE("forward noise moments at the last step") {
    const NoiseSchedule s = make_cosine_schedule(1000);
    std::mt19937_64 rng(3);
    const Matrix zeros = Matrix::Zero(1, 1);
    const int draws = 100000;
    double sum = 0, sq = 0;
    for (int k = 0; k < draws; ++k) {
      const double v = flow::forward_noise(zeros, 1000, s, rng).noisy(0, 0);
      sum += v;
      sq += v * v;
    }
    const double mean = sum / draws;
    const double sd = std::sqrt(sq / draws - mean * mean);
    const double expect = std::sqrt(1 - s.alpha_bar_at(1000));
    CHECK(std::abs(mean) < 3 * expect / std::sqrt(static_cast<double>(draws)));
    CHECK(std::abs(sd / expect - 1.0) < 0.01);
  }

  TEST_CASE("masked forward noise is zero outside the mask") {
    std::mt19937_64 rng(4);
    const NoiseSchedule s = make_cosine_schedule(50);
    const AdjacencyMatrix mask = random_mask(6, rng);
    const auto n = flow::forward_noise(Matrix::Random(6, 6), mask, 20, s, rng);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        if (!mask(i, j)) {
          CHECK(n.noisy(i, j) == 0.0);
          CHECK(n.noise(i, j) == 0.0);
        }
  }

  TEST_CASE("reverse step keeps unmasked entries at zero") {
    std::mt19937_64 rng(5);
    const NoiseSchedule s = make_cosine_schedule(50);
    const AdjacencyMatrix mask = random_mask(5, rng);
    flow::FlowState st{Matrix::Random(5, 5).cwiseProduct(mask.values()), mask, 50};
    while (st.t >= 1) {
      st = flow::reverse_step_from_noise(st, Matrix::Random(5, 5), s, rng);
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
          if (!mask(i, j)) CHECK(st.values(i, j) == 0.0);
    }
  }

  TEST_CASE("one-step inversion with the true noise is exact") {
    std::mt19937_64 rng(6);
    const NoiseSchedule s = make_cosine_schedule(1000);
    const AdjacencyMatrix mask(Matrix::Ones(4, 4));
    const Matrix f0 = Matrix::Random(4, 4);
    const auto n = flow::forward_noise(f0, mask, 1, s, rng);
    const flow::FlowState back = flow::reverse_step_from_noise({n.noisy, mask, 1}, n.noise, s, rng);
    CHECK(back.t == 0);
    CHECK((back.values - f0).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("clipped step equals the plain step inside the data range") {
    std::mt19937_64 rng(16);
    const NoiseSchedule s = make_cosine_schedule(1000);
    const AdjacencyMatrix mask(Matrix::Ones(5, 5));
    for (int t : {1, 2, 10, 300, 999, 1000}) {
      const Matrix f0 = 0.9 * Matrix::Random(5, 5);
      const auto n = flow::forward_noise(f0, mask, t, s, rng);
      std::mt19937_64 a(1), b(1);
      const auto plain = flow::reverse_step_from_noise({n.noisy, mask, t}, n.noise, s, a, false, false);
      const auto clipped = flow::reverse_step_from_noise({n.noisy, mask, t}, n.noise, s, b, false, true);
      CHECK((plain.values - clipped.values).cwiseAbs().maxCoeff() < 1e-9);
    }
    // An estimate far outside the range is pulled to the posterior mean at the boundary.
    const int t = 500;
    const Matrix ft = Matrix::Constant(2, 2, 0.3);
    const Matrix eps = Matrix::Constant(2, 2, -50.0);
    const auto out = flow::reverse_step_from_noise({ft, AdjacencyMatrix(Matrix::Ones(2, 2)), t}, eps, s, rng, false, true);
    const double abar = s.alpha_bar_at(t), abar_prev = s.alpha_bar_at(t - 1);
    const double expect = std::sqrt(abar_prev) * s.beta_at(t) / (1 - abar) * 1.0 +
                          std::sqrt(s.alpha_at(t)) * (1 - abar_prev) / (1 - abar) * 0.3;
    CHECK(std::abs(out.values(0, 1) - expect) < 1e-12);
  }

  TEST_CASE("zero noise estimate: deterministic chain matches the closed form") {
    std::mt19937_64 rng(7);
    const NoiseSchedule s = make_cosine_schedule(200);
    const AdjacencyMatrix mask(Matrix::Ones(3, 3));
    const Matrix start = Matrix::Random(3, 3);
    flow::FlowState st{start, mask, 200};
    while (st.t >= 1) st = flow::reverse_step_from_noise(st, Matrix::Zero(3, 3), s, rng, false);
    // With eps_hat = 0 each step divides by sqrt(alpha_t): F^0 = F^T / sqrt(prod alpha_t).
    double prod = 1.0;
    for (int t = 1; t <= 200; ++t) prod *= s.alpha_at(t);
    const Matrix expect = start / std::sqrt(prod);
    CHECK(((st.values - expect).array() / expect.array()).abs().maxCoeff() < 1e-8);
  }

  TEST_CASE("loss identities") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int entries = 10000;
    ag::Tensor eps(entries, 1), mask = ag::Tensor::Ones(entries, 1);
    for (int k = 0; k < entries; ++k) eps(k, 0) = normal(rng);
    CHECK(ag::masked_mse(ag::constant(eps), eps, mask).item() == 0.0);
    const double l = ag::masked_mse(ag::constant(ag::Tensor::Zero(entries, 1)), eps, mask).item();
    // Var(eps^2) = 2, so the mean has standard deviation sqrt(2 / n).
    CHECK(std::abs(l - 1.0) < 3 * std::sqrt(2.0 / entries));
  }

  TEST_CASE("training validates its inputs") {
    const auto city = small_city(6, 2);
    Denoiser model = small_model(DenoiserMode::Flow, city.city);
    const NoiseSchedule s = make_cosine_schedule(10);
    const flow::FlowScaler scaler = flow::FlowScaler::fit({&city.od});
    TrainConfig cfg;
    cfg.epochs = 2;
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(flow::train_flow(model, {{&city.city, city.od, AdjacencyMatrix::zeros(6)}}, scaler, s, cfg, rng),
                    ValidationError);
    Matrix partial = to_adjacency(city.od).values();
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        if (partial(i, j) == 1.0) {
          partial(i, j) = 0.0;
          i = j = 6;
        }
    CHECK_THROWS_AS(flow::train_flow(model, {{&city.city, city.od, AdjacencyMatrix(partial)}}, scaler, s, cfg, rng),
                    ValidationError);
    Denoiser topo_model = small_model(DenoiserMode::Topology, city.city);
    CHECK_THROWS_AS(flow::train_flow(topo_model, {{&city.city, city.od, to_adjacency(city.od)}}, scaler, s, cfg, rng),
                    ValidationError);
  }

  TEST_CASE("training reduces the loss; generation respects the mask") {
    const auto city = small_city(8, 3);
    Denoiser model = small_model(DenoiserMode::Flow, city.city);
    const NoiseSchedule s = make_cosine_schedule(20);
    const flow::FlowScaler scaler = flow::FlowScaler::fit({&city.od});
    const AdjacencyMatrix mask = to_adjacency(city.od);
    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.early_stop = false;
    cfg.adam.learning_rate = 3e-3;
    std::mt19937_64 rng(2);
    const TrainResult r = flow::train_flow(model, {{&city.city, city.od, mask}}, scaler, s, cfg, rng);
    REQUIRE(r.losses.size() == 300);
    double head = 0, tail = 0;
    for (std::size_t k = 0; k < 50; ++k) head += r.losses[k];
    for (std::size_t k = 250; k < 300; ++k) tail += r.losses[k];
    CHECK(tail < head);

    std::mt19937_64 a(5), b(5);
    const ODMatrix ga = flow::generate_flows(city.city, mask, model, s, scaler, a);
    const ODMatrix gb = flow::generate_flows(city.city, mask, model, s, scaler, b);
    CHECK(ga == gb);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        CHECK(ga(i, j) >= 0.0);
        CHECK(ga(i, j) == std::round(ga(i, j)));
        if (!mask(i, j)) CHECK(ga(i, j) == 0.0);
      }
    std::mt19937_64 c(5);
    CHECK(flow::generate_flows(city.city, AdjacencyMatrix::zeros(8), model, s, scaler, c) == ODMatrix::zeros(8));
  }

  TEST_CASE("flow inputs carry the noisy values, the mask and strengths") {
    Matrix m(2, 2);
    m << 1, 0, 1, 1;
    Matrix v(2, 2);
    v << 0.5, 0.0, -1.0, 0.25;
    const DenoiserInput in = flow::make_input({v, AdjacencyMatrix(m), 4});
    CHECK(in.edge_features(0, 0) == 0.5);
    CHECK(in.edge_features(1, 1) == 0.0);
    CHECK(in.edge_features(2, 0) == -1.0);
    CHECK(in.edge_features(2, 1) == 1.0);
    CHECK(in.node_properties.cols() == 5);
  }
}
