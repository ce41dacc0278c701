#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "spiked/eig.hpp"
#include "spiked/matgen.hpp"
#include "spiked/random.hpp"
#include "spiked/recover.hpp"

using namespace spiked;

namespace {

// Entrywise evaluation of x - alpha * [(x x^T - X) x + gamma (x^T x) 1] with plain loops.
std::vector<double> scalar_step(const std::vector<double>& x, const Matrix<double>& m, double alpha, double gamma) {
  const std::size_t n = x.size();
  double xtx = 0;
  for (double v : x) xtx += v * v;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0;
    for (std::size_t j = 0; j < n; ++j) r += (x[i] * x[j] - m(Index(i), Index(j))) * x[j];
    out[i] = x[i] - alpha * (r + gamma * xtx);
  }
  return out;
}

SymmetricMatrix<double> rank_one(const Vector<double>& x, double scale) {
  return SymmetricMatrix<double>::from_upper(Matrix<double>(scale * x * x.transpose()));
}

}  // namespace

TEST_CASE("init_iterate") {
  CHECK(init_iterate<double>(1, 0.2, Seed{3})[0] == 1.0);
  const auto x = init_iterate<double>(1000, 0.2, Seed{11});
  CHECK(std::abs(x.norm() - 1.0) <= 1e-12);
  CHECK(x.minCoeff() >= 0.0);
  CHECK(x == init_iterate<double>(1000, 0.2, Seed{11}));
  // Raw draws are uniform on [0, tau]: rescaling by the norm recovers them.
  Rng rng(Seed{11});
  const double first = rng.uniform(0.0, 0.2);
  CHECK(first <= 0.2);
  CHECK(x[0] / x[1] == doctest::Approx(first / rng.uniform(0.0, 0.2)).epsilon(1e-12));
  CHECK_THROWS_AS(init_iterate<double>(0, 0.2, Seed{1}), InvalidArgument);
  CHECK_THROWS_AS(init_iterate<double>(5, 0.0, Seed{1}), InvalidArgument);
}

TEST_CASE("gd_step") {
  SUBCASE("hand example") {
    const auto next = gd_step(Vector<double>::Unit(2, 0), SymmetricMatrix<double>(2), 0.1, 0.1);
    CHECK(next[0] == doctest::Approx(0.89).epsilon(1e-15));
    CHECK(next[1] == doctest::Approx(-0.01).epsilon(1e-15));
  }
  SUBCASE("zero vector is fixed") {
    const auto g = sample_goe<double>(5, Seed{1});
    CHECK(gd_step(Vector<double>::Zero(5), g, 0.1, 0.1).isZero(0));
  }
  SUBCASE("rank-one fixed point with gamma = 0") {
    const Vector<double> x = standard_normal_vector(20, Seed{2}).normalized();
    const auto next = gd_step(x, rank_one(x, 1.0), 0.1, 0.0);
    CHECK((next - x).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SUBCASE("matches the scalar-loop oracle") {
    Rng rng(Seed{5});
    for (int trial = 0; trial < 50; ++trial) {
      const Index n = 1 + trial % 10;
      const auto m = sample_goe<double>(n, derive(Seed{5}, trial));
      const Vector<double> x = standard_normal_vector(n, derive(Seed{6}, trial));
      const double alpha = rng.uniform(0.001, 1.0), gamma = rng.uniform(0.0, 1.0);
      const auto got = gd_step(x, m, alpha, gamma);
      const auto ref = scalar_step(std::vector<double>(x.data(), x.data() + n), m.matrix(), alpha, gamma);
      for (Index i = 0; i < n; ++i) CHECK(std::abs(got[i] - ref[std::size_t(i)]) <= 1e-12);
    }
  }
  SUBCASE("gradient variant uses 2 gamma x") {
    const Vector<double> x = standard_normal_vector(6, Seed{8});
    const auto m = sample_goe<double>(6, Seed{9});
    const Vector<double> expect = x - 0.1 * (x.squaredNorm() * x - m.matrix() * x + 0.2 * x);
    CHECK((gd_step(x, m, 0.1, 0.1, PenaltyVariant::Gradient) - expect).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(gd_step(Vector<double>::Ones(3), SymmetricMatrix<double>(4), 0.1, 0.1), InvalidArgument);
    Vector<double> bad = Vector<double>::Ones(3);
    bad[1] = std::nan("");
    CHECK_THROWS_AS(gd_step(bad, SymmetricMatrix<double>(3), 0.1, 0.1), NumericalFailure);
  }
}

TEST_CASE("project_box_sphere") {
  SUBCASE("feasible unit vector is unchanged") {
    Vector<double> x = Vector<double>::Constant(100, 0.1);
    CHECK((project_box_sphere(x, 0.2) - x).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("negative entry clips to zero") {
    const Vector<double> x = Vector<double>{{1.0, -1.0}} / std::sqrt(2.0);
    const auto p = project_box_sphere(x, 0.2);
    CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p[1] == 0.0);
  }
  SUBCASE("no clipping") {
    const auto p = project_box_sphere(Vector<double>{{3.0, 4.0}}, 10.0);
    CHECK(p[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("idempotence when the output is box-feasible") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Vector<double> x = standard_normal_vector(1000, Seed{s});
      const auto once = project_box_sphere(x, 0.2);
      REQUIRE(once.maxCoeff() <= 0.2);
      CHECK((project_box_sphere(once, 0.2) - once).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(std::abs(once.norm() - 1.0) <= 1e-12);
      CHECK(once.minCoeff() >= 0.0);
    }
  }
  SUBCASE("renormalization can push clipped entries above tau") {
    // Entries clipped to tau grow by 1 / ||clip|| > 1, so a second pass clips again.
    const Vector<double> x = Vector<double>{{0.9, 0.3, 0.3, 0.1}};
    const auto once = project_box_sphere(x, 0.2);
    CHECK(once.maxCoeff() > 0.2);
    CHECK_FALSE(project_box_sphere(once, 0.2).isApprox(once));
  }
  SUBCASE("failures") {
    CHECK_THROWS_AS(project_box_sphere(Vector<double>::Zero(3), 0.2), ProjectionFailure);
    CHECK_THROWS_AS(project_box_sphere(Vector<double>{{-1.0, -2.0}}, 0.2), ProjectionFailure);
  }
}

TEST_CASE("relative_error") {
  const auto x1 = make_signal_block<double>(100, 0.1);
  CHECK(relative_error(x1, x1.entries()) == 0.0);
  CHECK(relative_error(x1, Vector<double>(-x1.entries())) == doctest::Approx(200.0));
  Vector<double> perp = Vector<double>::Zero(100);
  perp[50] = 1;
  CHECK(relative_error(x1, perp) == doctest::Approx(100.0 * std::sqrt(2.0)));
}

TEST_CASE("noiseless recovery") {
  RecoveryConfig cfg;
  SUBCASE("n = 100, literal rule") {
    const auto x1 = make_signal_block<double>(100, 0.1);
    const auto r = run_descent(rank_one(x1.entries(), 4.0), cfg, Seed{1});
    CHECK(r.converged);
    CHECK(relative_error(x1, r.x_hat) < 5.0);
  }
  SUBCASE("n = 500, gradient variant") {
    cfg.penalty = PenaltyVariant::Gradient;
    const auto x1 = make_signal_block<double>(500, 0.02);
    const auto r = run_descent(rank_one(x1.entries(), 4.0), cfg, Seed{1});
    CHECK(r.converged);
    CHECK(relative_error(x1, r.x_hat) < 5.0);
  }
  SUBCASE("n = 500, literal rule: the fixed point has no positive entry") {
    // Off the block the fixed point is exactly -gamma; on it x_b (|x|^2 - 4) = -gamma |x|^2,
    // which is negative too once n gamma^2 > 4.
    const auto x1 = make_signal_block<double>(500, 0.02);
    const auto trace = descend(rank_one(x1.entries(), 4.0), cfg, Seed{1});
    CHECK(trace.converged);
    CHECK(trace.x.maxCoeff() < 0.0);
    CHECK(trace.x.tail(490).mean() == doctest::Approx(-cfg.gamma).epsilon(1e-3));
    CHECK_THROWS_AS(run_descent(rank_one(x1.entries(), 4.0), cfg, Seed{1}), ProjectionFailure);
  }
}

TEST_CASE("descent on a spiked matrix") {
  const Index n = 1000;
  const auto x1 = make_signal_block<double>(n, 0.02);
  const auto x = assemble_spiked(4.0, x1, sample_goe<double>(n, Seed{17}));
  RecoveryConfig cfg;
  cfg.record_trajectory = true;
  const auto trace = descend(x, cfg, Seed{18});
  CHECK(trace.converged);
  CHECK(trace.iterations <= 200);
  CHECK(trace.trajectory.size() == std::size_t(trace.iterations));
  CHECK(trace.trajectory.back() <= cfg.tol);
  const auto again = descend(x, cfg, Seed{18});
  CHECK(again.x == trace.x);
}

TEST_CASE("iteration cap") {
  const auto x = assemble_spiked(4.0, make_signal_block<double>(100, 0.1), sample_goe<double>(100, Seed{2}));
  RecoveryConfig cfg;
  cfg.max_iter = 1;
  cfg.penalty = PenaltyVariant::Gradient;
  const auto r = run_descent(x, cfg, Seed{3});
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 1);
  CHECK(std::abs(r.x_hat.norm() - 1.0) <= 1e-12);
  CHECK(r.x_hat.minCoeff() >= 0.0);
}

TEST_CASE("blow-up reports the iteration") {
  Matrix<double> big = Matrix<double>::Identity(5, 5) * 1e6;
  RecoveryConfig cfg;
  cfg.alpha = 1.0;
  try {
    descend(SymmetricMatrix<double>::checked(big), cfg, Seed{1});
    FAIL("expected NumericalFailure");
  } catch (const NumericalFailure& e) {
    CHECK(e.iteration() >= 1);
    CHECK(std::string(e.what()).find("iteration") != std::string::npos);
  }
}

TEST_CASE("config validation") {
  RecoveryConfig cfg;
  cfg.alpha = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.gamma = -1;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.max_iter = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  CHECK(penalty_from_string("gradient") == PenaltyVariant::Gradient);
  CHECK_THROWS_AS(penalty_from_string("nuclear"), InvalidArgument);
}

TEST_CASE("float instantiation") {
  const auto next = gd_step(Vector<float>::Unit(2, 0), SymmetricMatrix<float>(2), 0.1f, 0.1f);
  CHECK(next[0] == doctest::Approx(0.89f));
}
