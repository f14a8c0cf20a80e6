#include <doctest.h>

#include <random>

#include "odgen/errors.hpp"
#include "odgen/schedule.hpp"
#include "oracles.hpp"

using namespace odgen;

TEST_SUITE("schedule") {
  TEST_CASE("cosine schedule endpoints and monotonicity") {
    for (int steps : {1, 10, 1000}) {
      const NoiseSchedule s = make_cosine_schedule(steps);
      CHECK(s.alpha_bar_at(0) == 1.0);
      CHECK(s.beta.size() == static_cast<std::size_t>(steps));
      CHECK(s.alpha_bar.size() == static_cast<std::size_t>(steps + 1));
    }
    const NoiseSchedule s = make_cosine_schedule(1000);
    CHECK(s.alpha_bar_at(1000) < 1e-3);
    for (int t = 1; t <= 1000; ++t) {
      CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
      CHECK(s.beta_at(t) > 0.0);
      CHECK(s.beta_at(t) <= 0.999);
      CHECK(s.alpha_at(t) == doctest::Approx(1.0 - s.beta_at(t)).epsilon(1e-15));
    }
  }

  TEST_CASE("cosine schedule matches the closed form before clipping") {
    const int steps = 1000;
    const double off = 0.008;
    auto f = [&](double t) {
      const double c = std::cos((t / steps + off) / (1 + off) * M_PI / 2);
      return c * c;
    };
    const NoiseSchedule s = make_cosine_schedule(steps);
    for (int t = 1; t < steps; ++t) CHECK(s.alpha_bar_at(t) == doctest::Approx(f(t) / f(0)).epsilon(1e-10));
  }

  TEST_CASE("cosine schedule rejects non-positive step counts") {
    CHECK_THROWS_AS(make_cosine_schedule(0), ValidationError);
    CHECK_THROWS_AS(make_cosine_schedule(-3), ValidationError);
  }

  TEST_CASE("uniform transition") {
    CHECK(uniform_transition(1.0, 2) == Matrix::Identity(2, 2));
    CHECK(uniform_transition(0.0, 2) == Matrix::Constant(2, 2, 0.5));
    Matrix expect(2, 2);
    expect << 0.9, 0.1, 0.1, 0.9;
    CHECK((uniform_transition(0.8, 2) - expect).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(uniform_transition(1.5, 2), ValidationError);
    CHECK_THROWS_AS(uniform_transition(-0.1, 2), ValidationError);
    CHECK_THROWS_AS(uniform_transition(0.5, 1), ValidationError);
  }

  TEST_CASE("cumulative transition") {
    const std::vector<Matrix> ids(4, Matrix::Identity(2, 2));
    for (const Matrix& m : cumulative_transition(ids)) CHECK(m == Matrix::Identity(2, 2));
    Matrix q(2, 2);
    q << 0.75, 0.25, 0.25, 0.75;
    CHECK(cumulative_transition({q})[0] == q);
    Matrix two(2, 2);
    two << 0.625, 0.375, 0.375, 0.625;
    CHECK((cumulative_transition({q, q})[1] - two).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(cumulative_transition({q, Matrix::Identity(3, 3)}), ValidationError);
    CHECK_THROWS_AS(cumulative_transition({Matrix::Ones(2, 3)}), ValidationError);
  }

  TEST_CASE("uniform chains: closed form, stochasticity, monotone mixing") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int d : {2, 3, 5}) {
      std::vector<double> alphas;
      for (int t = 0; t < 30; ++t) alphas.push_back(u(rng));
      const DiscreteTransition tr = make_uniform_transitions(schedule_from_alphas(alphas), d);
      double prod = 1.0;
      double prev_tv = 1.0;
      for (int t = 1; t <= 30; ++t) {
        prod *= alphas[static_cast<std::size_t>(t - 1)];
        const Matrix expect = prod * Matrix::Identity(d, d) + (1 - prod) / d * Matrix::Ones(d, d);
        const Matrix& qb = tr.cumulative_at(t);
        CHECK((qb - expect).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((qb.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
        CHECK((tr.step_at(t).rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
        CHECK(qb.minCoeff() >= 0.0);
        const double tv = 0.5 * (qb.row(0).array() - 1.0 / d).abs().sum();
        CHECK(tv <= prev_tv + 1e-15);
        prev_tv = tv;
      }
      CHECK(tr.cumulative_at(0) == Matrix::Identity(d, d));
    }
  }
}
