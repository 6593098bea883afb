#include <doctest.h>

#include <cmath>

#include "dflmesh/error.hpp"
#include "dflmesh/graph.hpp"
#include "dflmesh/mixing.hpp"
#include "dflmesh/rng.hpp"
#include "dflmesh/spectral.hpp"
#include "oracles.hpp"

using namespace dflmesh;

namespace {

double oracle_lambda(const Eigen::MatrixXd& m) {
  const auto ev = oracle::jacobi_eigenvalues(m);
  return std::max(std::abs(ev.front()), std::abs(ev[ev.size() - 2]));
}

Eigen::MatrixXd centered(const Eigen::MatrixXd& x) { return x.rowwise() - x.colwise().mean(); }

}  // namespace

TEST_SUITE("mixing") {
  TEST_CASE("laplacian mixing on the 4-ring") {
    const auto m = laplacian_mixing(make_ring(4), 0.5);
    const Eigen::MatrixXd expected = Eigen::MatrixXd::Identity(4, 4) - make_ring(4).laplacian() / 3.0;
    CHECK((m.matrix() - expected).norm() < 1e-14);
    const auto ev = oracle::jacobi_eigenvalues(m.matrix());
    CHECK(ev[0] == doctest::Approx(-1.0 / 3));
    CHECK(ev[1] == doctest::Approx(1.0 / 3));
    CHECK(ev[2] == doctest::Approx(1.0 / 3));
    CHECK(ev[3] == doctest::Approx(1.0));
    CHECK(m.lambda() == doctest::Approx(1.0 / 3));
    CHECK(laplacian_mixing(make_ring(4), 0.9).lambda() == doctest::Approx(0.9 / 1.9));
  }

  TEST_CASE("theta = 0 hits the spectral violation") {
    try {
      (void)laplacian_mixing(make_complete(6), 0.0);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::SpectralViolation);
    }
    CHECK_THROWS_AS(laplacian_mixing(make_ring(5), 1.0), Error);
    CHECK_THROWS_AS(laplacian_mixing(make_ring(5), -0.1), Error);
    CHECK_THROWS_AS(laplacian_mixing(Graph(4, {{0, 1}, {2, 3}}), 0.5), Error);
  }

  TEST_CASE("optimal theta and lambda formula") {
    CHECK(optimal_theta(2.0) == 0.5);
    CHECK(optimal_theta(1.0) == 1.0);
    CHECK(clamp_theta(optimal_theta(1.0)) < 1.0);
    CHECK(optimal_theta(33.97) == doctest::Approx(0.02943).epsilon(1e-3));
    CHECK_THROWS_AS(optimal_theta(0.5), Error);
    CHECK(optimal_theta_condition_holds(5.0));
    CHECK(lambda_of_theta(2.0, 0.5) == doctest::Approx(1.0 / 3));
    CHECK(lambda_of_theta(2.0, 0.0) == doctest::Approx(1.0));
    for (double kappa : {1.5, 4.0, 30.0, 1000.0}) {
      const double best = lambda_of_theta(kappa, optimal_theta(kappa));
      CHECK(best == doctest::Approx((kappa - 1) / (kappa + 1)).epsilon(1e-12));
      for (int k = 0; k <= 100; ++k) CHECK(best <= lambda_of_theta(kappa, k / 101.0) + 1e-15);
    }
  }

  TEST_CASE("lambda of the built matrix equals the formula") {
    const std::vector<Graph> graphs{make_ring(9), make_complete(6), make_regular_expander(40, 4, 2)};
    for (const auto& g : graphs) {
      const auto ext = eigen_extremes(g);
      const double kappa = ext.lambdaN / ext.lambda2;
      for (double theta : {0.1, 0.5, clamp_theta(optimal_theta(kappa))}) {
        const auto m = laplacian_mixing(g, theta);
        CHECK(std::abs(m.lambda() - lambda_of_theta(kappa, theta)) < 1e-6);
        CHECK(std::abs(oracle_lambda(m.matrix()) - m.lambda()) < 1e-9);
      }
    }
  }

  TEST_CASE("Metropolis-Hastings and max-degree weights") {
    const auto two = metropolis_hastings_mixing(make_complete(2));
    CHECK(two(0, 1) == doctest::Approx(0.5));
    CHECK(two(0, 0) == doctest::Approx(0.5));
    CHECK(two.lambda() == doctest::Approx(0.0).epsilon(1e-12));
    const auto ring = metropolis_hastings_mixing(make_ring(4));
    CHECK(ring(0, 1) == doctest::Approx(1.0 / 3));
    CHECK(ring(0, 0) == doctest::Approx(1.0 / 3));
    CHECK(ring.lambda() == doctest::Approx(oracle_lambda(ring.matrix())));
    const Graph star(4, {{0, 1}, {0, 2}, {0, 3}});
    const auto md = max_degree_mixing(star);
    CHECK(md(0, 1) == doctest::Approx(0.25));
    CHECK(md(0, 0) == doctest::Approx(0.25));
    CHECK(md(1, 1) == doctest::Approx(0.75));
    const Graph reg = make_regular_expander(30, 4, 3);
    if (reg.min_degree() == reg.max_degree()) {
      CHECK((max_degree_mixing(reg).matrix() - metropolis_hastings_mixing(reg).matrix()).norm() < 1e-15);
    }
    const Graph er = sample_connected([](std::uint64_t s) { return make_erdos_renyi(25, 0.2, s); }, 4);
    for (const auto& m : {metropolis_hastings_mixing(er), max_degree_mixing(er)}) {
      CHECK((m.matrix() - m.matrix().transpose()).norm() < 1e-12);
      CHECK((m.matrix().rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
      CHECK(m.matrix().diagonal().minCoeff() >= 0.0);
    }
  }

  TEST_CASE("checked constructor rejects broken matrices") {
    const Graph g = make_ring(4);
    Eigen::MatrixXd m = laplacian_mixing(g, 0.5).matrix();
    Eigen::MatrixXd asym = m;
    asym(0, 1) += 1e-6;
    CHECK_THROWS_AS(make_checked_mixing(asym, g), Error);
    Eigen::MatrixXd off_pattern = m;
    off_pattern(0, 2) = off_pattern(2, 0) = 0.01;
    off_pattern(0, 0) -= 0.01;
    off_pattern(2, 2) -= 0.01;
    CHECK_THROWS_AS(make_checked_mixing(off_pattern, g), Error);
    CHECK_NOTHROW(make_checked_mixing(m, g));
  }

  TEST_CASE("mix_step preserves means and contracts") {
    const auto m = laplacian_mixing(make_ring(4), 0.5);
    Rng rng(11);
    Eigen::MatrixXd x(4, 3);
    for (auto& v : x.reshaped()) v = rng.normal();
    const Eigen::MatrixXd y = mix_step(m, x);
    CHECK((y.colwise().mean() - x.colwise().mean()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(centered(y).norm() <= m.lambda() * centered(x).norm() + 1e-12);
    Eigen::MatrixXd same = Eigen::MatrixXd::Ones(4, 3) * 2.5;
    CHECK((mix_step(m, same) - same).norm() < 1e-14);
    const auto id = MixingMatrix::unchecked(Eigen::MatrixXd::Identity(4, 4));
    CHECK((mix_step(id, x) - x).norm() == 0.0);
    CHECK_THROWS_AS(mix_step(m, Eigen::MatrixXd::Zero(3, 2)), Error);

    const auto ex = laplacian_mixing(make_regular_expander(50, 4, 1), 0.2);
    Eigen::MatrixXd z(50, 2);
    for (auto& v : z.reshaped()) v = rng.normal();
    for (int step = 0; step < 20; ++step) {
      const Eigen::MatrixXd next = mix_step(ex, z);
      CHECK(centered(next).norm() <= (ex.lambda() + 1e-6) * centered(z).norm());
      z = next;
    }
  }

  TEST_CASE("mixing specs") {
    CHECK(parse_mixing_spec("mh").kind == MixingKind::MetropolisHastings);
    CHECK(parse_mixing_spec("maxdeg").kind == MixingKind::MaxDegree);
    CHECK_FALSE(parse_mixing_spec("laplacian:auto").theta.has_value());
    CHECK(*parse_mixing_spec("laplacian:0.25").theta == 0.25);
    CHECK_THROWS_AS(parse_mixing_spec("laplacian:1.5"), Error);
    CHECK_THROWS_AS(parse_mixing_spec("bogus"), Error);
    double used = -1;
    (void)build_mixing(make_ring(4), parse_mixing_spec("laplacian:auto"), &used);
    CHECK(used == doctest::Approx(0.5));
  }
}
