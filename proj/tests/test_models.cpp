#include <doctest.h>

#include <cmath>

#include "dflmesh/data.hpp"
#include "dflmesh/error.hpp"
#include "dflmesh/models.hpp"
#include "dflmesh/rng.hpp"
#include "oracles.hpp"

using namespace dflmesh;

namespace {

Dataset regression_set(const Eigen::MatrixXd& x, std::vector<double> y) {
  Dataset ds;
  ds.features = x;
  ds.targets = std::move(y);
  ds.labels.assign(ds.targets.size(), 0);
  ds.classes = 1;
  return ds;
}

double fd_relative_error(const Objective& obj, const Vector& w, const Dataset& data, Rows rows) {
  const Vector g = obj.gradient(w, data, rows);
  const Vector fd = oracle::numeric_gradient([&](const Vector& v) { return obj.loss(v, data, rows); }, w);
  return (g - fd).norm() / std::max(1.0, fd.norm());
}

}  // namespace

TEST_SUITE("models") {
  TEST_CASE("least squares hand values") {
    const auto ls = least_squares(2);
    const Dataset id = regression_set(Eigen::MatrixXd::Identity(2, 2), {1, 2});
    const auto rows = all_rows(id);
    const Vector w = (Vector(2) << 1, 2).finished();
    CHECK(ls->loss(w, id, rows) == 0.0);
    CHECK(ls->gradient(w, id, rows).norm() == 0.0);
    const auto one = least_squares(1);
    const Dataset single = regression_set(Eigen::MatrixXd::Ones(1, 1), {0});
    const Vector two = Vector::Constant(1, 2.0);
    CHECK(one->loss(two, single, all_rows(single)) == 2.0);
    CHECK(one->gradient(two, single, all_rows(single))(0) == 2.0);
    CHECK_THROWS_AS(ls->loss(Vector::Zero(3), id, rows), Error);
  }

  TEST_CASE("least squares optimum solves the normal equations") {
    const Dataset ds = synthetic_regression(120, 4, 3, 1.0, 0.5, 0.3, 5);
    const Partition part = partition_by_label(ds, 3);
    const auto ls = least_squares(4);
    const Vector w = least_squares_optimum(ds, part);
    CHECK(global_gradient(*ls, w, ds, part).norm() < 1e-10);
    // Dense oracle: stack shards with 1/sqrt(m_i) weights and solve by QR.
    Eigen::MatrixXd a(120, 4);
    Eigen::VectorXd b(120);
    Eigen::Index row = 0;
    for (const auto& s : part.shards) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(s.size()));
      for (auto r : s) {
        a.row(row) = ds.features.row(static_cast<Eigen::Index>(r)) * scale;
        b(row++) = ds.targets[r] * scale;
      }
    }
    const Eigen::VectorXd ref = a.colPivHouseholderQr().solve(b);
    CHECK((ref - w).norm() < 1e-9);
  }

  TEST_CASE("logistic hand values") {
    const auto lr = logistic_regression(1, 0.0);
    Dataset one;
    one.features = Eigen::MatrixXd::Ones(1, 1);
    one.labels = {1};
    one.classes = 2;
    const Vector w = Vector::Zero(2);
    CHECK(lr->loss(w, one, all_rows(one)) == doctest::Approx(std::log(2.0)));
    CHECK(lr->gradient(w, one, all_rows(one))(0) == doctest::Approx(-0.5));
    Dataset bad = one;
    bad.labels = {2};
    CHECK_THROWS_AS(lr->loss(w, bad, all_rows(bad)), Error);
  }

  TEST_CASE("MLP at zero parameters has uniform logits") {
    const Dataset ds = synthetic_classification(30, 4, 5, 2.0, 1);
    const auto mlp = mlp_classifier(4, 6, 5);
    CHECK(mlp->loss(Vector::Zero(static_cast<Eigen::Index>(mlp->param_count())), ds, all_rows(ds)) ==
          doctest::Approx(std::log(5.0)));
  }

  TEST_CASE("MLP loss is invariant to hidden-unit permutation") {
    const std::size_t D = 3, H = 4;
    const int C = 3;
    const Dataset ds = synthetic_classification(40, D, C, 2.0, 2);
    const auto mlp = mlp_classifier(D, H, C);
    const Vector w = mlp->initial_params(5);
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    Vector p = w;
    const auto d = static_cast<Eigen::Index>(D);
    const auto h = static_cast<Eigen::Index>(H);
    for (Eigen::Index u = 0; u < h; ++u) {
      const auto src = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(u)]);
      p.segment(u * d, d) = w.segment(src * d, d);
      p(h * d + u) = w(h * d + src);
      for (Eigen::Index c = 0; c < C; ++c) p(h * d + h + c * h + u) = w(h * d + h + c * h + src);
    }
    CHECK(mlp->loss(p, ds, all_rows(ds)) == doctest::Approx(mlp->loss(w, ds, all_rows(ds))).epsilon(1e-12));
  }

  TEST_CASE("gradients match finite differences") {
    Rng rng(99);
    const Dataset reg = synthetic_regression(50, 3, 2, 1.0, 0.5, 0.2, 1);
    const Dataset cls2 = synthetic_classification(50, 3, 2, 2.0, 1);
    const Dataset cls3 = synthetic_classification(50, 3, 3, 2.0, 1);
    const auto ls = least_squares(3);
    const auto lr = logistic_regression(3, 0.1);
    const auto mlp = mlp_classifier(3, 4, 3);
    for (int point = 0; point < 10; ++point) {
      for (auto [obj, data] : {std::pair{ls.get(), &reg}, std::pair{lr.get(), &cls2}, std::pair{mlp.get(), &cls3}}) {
        Vector w(static_cast<Eigen::Index>(obj->param_count()));
        for (auto& v : w) v = rng.normal();
        CHECK(fd_relative_error(*obj, w, *data, all_rows(*data)) < 1e-4);
      }
    }
  }

  TEST_CASE("accuracy") {
    const auto lr = logistic_regression(1, 0.0);
    Dataset toy;
    toy.features = (Eigen::MatrixXd(4, 1) << -2, -1, 1, 2).finished();
    toy.labels = {0, 0, 1, 1};
    toy.classes = 2;
    CHECK(accuracy(*lr, (Vector(2) << 5, 0).finished(), toy) == 1.0);
    CHECK(accuracy(*lr, (Vector(2) << -5, 0).finished(), toy) == 0.0);

    const Dataset ten = synthetic_classification(1000, 4, 10, 2.0, 3);
    const auto mlp = mlp_classifier(4, 3, 10);
    Vector w = Vector::Zero(static_cast<Eigen::Index>(mlp->param_count()));
    w(w.size() - 10 + 4) = 1.0;  // output bias favours class 4 everywhere
    CHECK(accuracy(*mlp, w, ten) == doctest::Approx(0.1));

    const Vector v = mlp->initial_params(4);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < ten.rows(); ++r) hits += mlp->predict(v, ten, r) == ten.labels[r];
    CHECK(accuracy(*mlp, v, ten) == static_cast<double>(hits) / ten.rows());

    const auto ls = least_squares(4);
    CHECK_THROWS_AS(accuracy(*ls, Vector::Zero(4), ten), Error);
  }

  TEST_CASE("smoothness and constant estimates") {
    const Dataset reg = synthetic_regression(80, 3, 2, 1.0, 0.5, 0.2, 1);
    const auto ls = least_squares(3);
    const auto rows = all_rows(reg);
    const double L = *ls->smoothness(reg, rows);
    const Eigen::MatrixXd gram = reg.features.transpose() * reg.features / 80.0;
    CHECK(L == doctest::Approx(oracle::jacobi_eigenvalues(gram).back()));

    const Partition part = partition_iid(reg, 4, 1);
    const std::vector<Vector> pts{Vector::Zero(3), Vector::Ones(3)};
    const auto full = estimate_constants(*ls, reg, part, pts, 0, 1);
    CHECK(full.sigma == 0.0);
    CHECK(full.B >= full.zeta * 0.0);
    CHECK(full.B > 0.0);
    const auto noisy = estimate_constants(*ls, reg, part, pts, 2, 1);
    CHECK(noisy.sigma > 0.0);

    const Dataset cls = synthetic_classification(60, 3, 3, 2.0, 1);
    const auto mlp = mlp_classifier(3, 4, 3);
    const std::vector<Vector> mp{mlp->initial_params(1), mlp->initial_params(2)};
    const auto est = estimate_constants(*mlp, cls, partition_iid(cls, 3, 1), mp, 0, 1);
    CHECK(est.L > 0.0);
    CHECK(std::isfinite(est.L));
  }
}
