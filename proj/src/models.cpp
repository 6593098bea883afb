#include "dflmesh/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dflmesh/error.hpp"
#include "dflmesh/rng.hpp"

namespace dflmesh {

namespace {

void check_params(const Vector& w, std::size_t expected) {
  if (static_cast<std::size_t>(w.size()) != expected) {
    throw Error(ErrorKind::DimensionMismatch,
                "expected " + std::to_string(expected) + " parameters, got " + std::to_string(w.size()));
  }
}

void check_rows(const Dataset& data, Rows rows, std::size_t dims) {
  if (data.dims() != dims) {
    throw Error(ErrorKind::DimensionMismatch,
                "model expects " + std::to_string(dims) + " features, data has " + std::to_string(data.dims()));
  }
  if (rows.empty()) throw Error(ErrorKind::InvalidArgument, "objective evaluated on zero rows");
}

Eigen::MatrixXd gather(const Dataset& data, Rows rows) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), data.features.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    x.row(static_cast<Eigen::Index>(k)) = data.features.row(static_cast<Eigen::Index>(rows[k]));
  }
  return x;
}

Vector uniform_weights(std::size_t count, std::size_t fan_in, Rng& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Vector v(static_cast<Eigen::Index>(count));
  for (auto& x : v) x = rng.uniform(-a, a);
  return v;
}

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double max_eig_gram(const Dataset& data, Rows rows) {
  const Eigen::MatrixXd x = gather(data, rows);
  const Eigen::MatrixXd gram = x.transpose() * x / static_cast<double>(rows.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().maxCoeff();
}

class LeastSquares final : public Objective {
 public:
  explicit LeastSquares(std::size_t dims) : dims_(dims) {}

  std::string name() const override { return "least_squares"; }
  std::size_t param_count() const override { return dims_; }

  double loss(const Vector& w, const Dataset& data, Rows rows) const override {
    check(w, data, rows);
    double s = 0.0;
    for (std::size_t r : rows) {
      const double e = data.features.row(static_cast<Eigen::Index>(r)).dot(w) - data.targets[r];
      s += e * e;
    }
    return s / (2.0 * static_cast<double>(rows.size()));
  }

  void gradient_into(const Vector& w, const Dataset& data, Rows rows, Vector& out) const override {
    check(w, data, rows);
    out.setZero(static_cast<Eigen::Index>(dims_));
    for (std::size_t r : rows) {
      const auto x = data.features.row(static_cast<Eigen::Index>(r));
      out += (x.dot(w) - data.targets[r]) * x.transpose();
    }
    out /= static_cast<double>(rows.size());
  }

  Vector initial_params(std::uint64_t seed) const override {
    Rng rng(seed);
    return uniform_weights(dims_, dims_, rng);
  }

  std::optional<double> smoothness(const Dataset& data, Rows rows) const override { return max_eig_gram(data, rows); }

 private:
  void check(const Vector& w, const Dataset& data, Rows rows) const {
    check_params(w, dims_);
    check_rows(data, rows, dims_);
    if (data.targets.size() != data.rows()) throw Error(ErrorKind::DimensionMismatch, "least squares needs targets");
  }

  std::size_t dims_;
};

class Logistic final : public Objective {
 public:
  Logistic(std::size_t dims, double l2) : dims_(dims), l2_(l2) {}

  std::string name() const override { return "logistic"; }
  std::size_t param_count() const override { return dims_ + 1; }
  bool is_classifier() const override { return true; }

  double loss(const Vector& w, const Dataset& data, Rows rows) const override {
    check(w, data, rows);
    double s = 0.0;
    for (std::size_t r : rows) {
      const double z = logit(w, data, r);
      s += softplus(z) - data.labels[r] * z;
    }
    return s / static_cast<double>(rows.size()) + 0.5 * l2_ * w.squaredNorm();
  }

  void gradient_into(const Vector& w, const Dataset& data, Rows rows, Vector& out) const override {
    check(w, data, rows);
    out.setZero(static_cast<Eigen::Index>(dims_ + 1));
    const auto d = static_cast<Eigen::Index>(dims_);
    for (std::size_t r : rows) {
      const double e = sigmoid(logit(w, data, r)) - data.labels[r];
      out.head(d) += e * data.features.row(static_cast<Eigen::Index>(r)).transpose();
      out(d) += e;
    }
    out /= static_cast<double>(rows.size());
    out += l2_ * w;
  }

  int predict(const Vector& w, const Dataset& data, std::size_t row) const override {
    return logit(w, data, row) >= 0.0 ? 1 : 0;
  }

  Vector initial_params(std::uint64_t seed) const override {
    Rng rng(seed);
    Vector w = Vector::Zero(static_cast<Eigen::Index>(dims_ + 1));
    w.head(static_cast<Eigen::Index>(dims_)) = uniform_weights(dims_, dims_, rng);
    return w;
  }

  std::optional<double> smoothness(const Dataset& data, Rows rows) const override {
    // Hessian <= (1/4) E[(x,1)(x,1)'] + l2 I.
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dims_ + 1));
    x.leftCols(static_cast<Eigen::Index>(dims_)) = gather(data, rows);
    x.col(static_cast<Eigen::Index>(dims_)).setOnes();
    const Eigen::MatrixXd gram = x.transpose() * x / static_cast<double>(rows.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
    return 0.25 * solver.eigenvalues().maxCoeff() + l2_;
  }

 private:
  double logit(const Vector& w, const Dataset& data, std::size_t r) const {
    const auto d = static_cast<Eigen::Index>(dims_);
    return data.features.row(static_cast<Eigen::Index>(r)).dot(w.head(d)) + w(d);
  }

  void check(const Vector& w, const Dataset& data, Rows rows) const {
    check_params(w, dims_ + 1);
    check_rows(data, rows, dims_);
    for (std::size_t r : rows) {
      if (data.labels.at(r) != 0 && data.labels[r] != 1) {
        throw Error(ErrorKind::LabelOutOfRange, "logistic regression needs labels in {0,1}, got " +
                                                    std::to_string(data.labels[r]));
      }
    }
  }

  std::size_t dims_;
  double l2_;
};

class Mlp final : public Objective {
 public:
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Mlp(std::size_t dims, std::size_t hidden, int classes)
      : d_(static_cast<Eigen::Index>(dims)), h_(static_cast<Eigen::Index>(hidden)), c_(classes) {
    if (hidden < 1) throw Error(ErrorKind::InvalidArgument, "hidden width must be >= 1");
    if (classes < 2) throw Error(ErrorKind::InvalidArgument, "need at least two classes");
  }

  std::string name() const override { return "mlp"; }
  std::size_t param_count() const override { return static_cast<std::size_t>(h_ * d_ + h_ + c_ * h_ + c_); }
  bool is_classifier() const override { return true; }

  double loss(const Vector& w, const Dataset& data, Rows rows) const override {
    check(w, data, rows);
    const Eigen::MatrixXd x = gather(data, rows);
    Eigen::MatrixXd hidden;
    Eigen::MatrixXd logits;
    forward(w, x, hidden, logits);
    double s = 0.0;
    for (Eigen::Index k = 0; k < logits.rows(); ++k) {
      const double m = logits.row(k).maxCoeff();
      const double lse = m + std::log((logits.row(k).array() - m).exp().sum());
      s += lse - logits(k, data.labels[rows[static_cast<std::size_t>(k)]]);
    }
    return s / static_cast<double>(rows.size());
  }

  void gradient_into(const Vector& w, const Dataset& data, Rows rows, Vector& out) const override {
    check(w, data, rows);
    const Eigen::MatrixXd x = gather(data, rows);
    Eigen::MatrixXd hidden;
    Eigen::MatrixXd logits;
    forward(w, x, hidden, logits);
    const double inv = 1.0 / static_cast<double>(rows.size());
    // dL/dlogits = softmax - onehot
    Eigen::MatrixXd delta_out = logits;
    for (Eigen::Index k = 0; k < delta_out.rows(); ++k) {
      const double m = delta_out.row(k).maxCoeff();
      delta_out.row(k) = (delta_out.row(k).array() - m).exp();
      delta_out.row(k) /= delta_out.row(k).sum();
      delta_out(k, data.labels[rows[static_cast<std::size_t>(k)]]) -= 1.0;
    }
    delta_out *= inv;
    const auto w2 = w2_map(w);
    const Eigen::MatrixXd delta_hidden = (delta_out * w2).array() * (1.0 - hidden.array().square());

    out.resize(w.size());
    Eigen::Map<RowMajor>(out.data(), h_, d_) = delta_hidden.transpose() * x;
    out.segment(h_ * d_, h_) = delta_hidden.colwise().sum().transpose();
    Eigen::Map<RowMajor>(out.data() + h_ * d_ + h_, c_, h_) = delta_out.transpose() * hidden;
    out.tail(c_) = delta_out.colwise().sum().transpose();
  }

  int predict(const Vector& w, const Dataset& data, std::size_t row) const override {
    check_params(w, param_count());
    const Eigen::MatrixXd x = data.features.row(static_cast<Eigen::Index>(row));
    Eigen::MatrixXd hidden;
    Eigen::MatrixXd logits;
    forward(w, x, hidden, logits);
    Eigen::Index arg = 0;
    logits.row(0).maxCoeff(&arg);
    return static_cast<int>(arg);
  }

  Vector initial_params(std::uint64_t seed) const override {
    Rng rng(seed);
    Vector w = Vector::Zero(static_cast<Eigen::Index>(param_count()));
    w.head(h_ * d_) = uniform_weights(static_cast<std::size_t>(h_ * d_), static_cast<std::size_t>(d_), rng);
    w.segment(h_ * d_ + h_, c_ * h_) =
        uniform_weights(static_cast<std::size_t>(c_ * h_), static_cast<std::size_t>(h_), rng);
    return w;
  }

 private:
  Eigen::Map<const RowMajor> w1_map(const Vector& w) const { return {w.data(), h_, d_}; }
  Eigen::Map<const RowMajor> w2_map(const Vector& w) const { return {w.data() + h_ * d_ + h_, c_, h_}; }

  void forward(const Vector& w, const Eigen::MatrixXd& x, Eigen::MatrixXd& hidden, Eigen::MatrixXd& logits) const {
    const auto b1 = w.segment(h_ * d_, h_);
    const auto b2 = w.tail(c_);
    hidden = ((x * w1_map(w).transpose()).rowwise() + b1.transpose()).array().tanh();
    logits = (hidden * w2_map(w).transpose()).rowwise() + b2.transpose();
  }

  void check(const Vector& w, const Dataset& data, Rows rows) const {
    check_params(w, param_count());
    check_rows(data, rows, static_cast<std::size_t>(d_));
    for (std::size_t r : rows) {
      if (data.labels.at(r) < 0 || data.labels[r] >= c_) {
        throw Error(ErrorKind::LabelOutOfRange, "label " + std::to_string(data.labels[r]));
      }
    }
  }

  Eigen::Index d_;
  Eigen::Index h_;
  Eigen::Index c_;
};

}  // namespace

int Objective::predict(const Vector&, const Dataset&, std::size_t) const {
  throw Error(ErrorKind::NotAClassifier, name() + " has no class predictions");
}

std::unique_ptr<Objective> least_squares(std::size_t dims) { return std::make_unique<LeastSquares>(dims); }

std::unique_ptr<Objective> logistic_regression(std::size_t dims, double l2) {
  if (l2 < 0.0) throw Error(ErrorKind::InvalidArgument, "l2 must be nonnegative");
  return std::make_unique<Logistic>(dims, l2);
}

std::unique_ptr<Objective> mlp_classifier(std::size_t dims, std::size_t hidden, int classes) {
  return std::make_unique<Mlp>(dims, hidden, classes);
}

double accuracy(const Objective& obj, const Vector& w, const Dataset& data, Rows rows) {
  if (!obj.is_classifier()) throw Error(ErrorKind::NotAClassifier, obj.name());
  if (rows.empty()) throw Error(ErrorKind::InvalidArgument, "accuracy on an empty set");
  std::size_t hits = 0;
  for (std::size_t r : rows) hits += obj.predict(w, data, r) == data.labels.at(r) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

std::vector<std::size_t> all_rows(const Dataset& data) {
  std::vector<std::size_t> rows(data.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

double accuracy(const Objective& obj, const Vector& w, const Dataset& data) {
  const auto rows = all_rows(data);
  return accuracy(obj, w, data, rows);
}

double global_loss(const Objective& obj, const Vector& w, const Dataset& data, const Partition& part) {
  double s = 0.0;
  for (const auto& shard : part.shards) s += obj.loss(w, data, shard);
  return s / static_cast<double>(part.size());
}

Vector global_gradient(const Objective& obj, const Vector& w, const Dataset& data, const Partition& part) {
  Vector g = Vector::Zero(w.size());
  Vector gi;
  for (const auto& shard : part.shards) {
    obj.gradient_into(w, data, shard, gi);
    g += gi;
  }
  return g / static_cast<double>(part.size());
}

Vector least_squares_optimum(const Dataset& data, const Partition& part) {
  if (data.targets.size() != data.rows()) throw Error(ErrorKind::DimensionMismatch, "least squares needs targets");
  const auto d = static_cast<Eigen::Index>(data.dims());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  Vector b = Vector::Zero(d);
  for (const auto& shard : part.shards) {
    const Eigen::MatrixXd x = gather(data, shard);
    Vector y(static_cast<Eigen::Index>(shard.size()));
    for (std::size_t k = 0; k < shard.size(); ++k) y(static_cast<Eigen::Index>(k)) = data.targets[shard[k]];
    a += x.transpose() * x / static_cast<double>(shard.size());
    b += x.transpose() * y / static_cast<double>(shard.size());
  }
  return a.ldlt().solve(b);
}

ConstantEstimates estimate_constants(const Objective& obj, const Dataset& data, const Partition& part,
                                     std::span<const Vector> points, std::size_t batch_size, std::uint64_t seed) {
  ConstantEstimates est;
  const std::size_t n = part.size();
  std::vector<Vector> local(n);
  for (const auto& w : points) {
    Vector mean = Vector::Zero(w.size());
    for (std::size_t i = 0; i < n; ++i) {
      obj.gradient_into(w, data, part.shards[i], local[i]);
      mean += local[i];
      est.B = std::max(est.B, local[i].norm());
    }
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) est.zeta = std::max(est.zeta, (local[i] - mean).norm());
    if (batch_size > 0) {
      for (std::size_t i = 0; i < n; ++i) {
        double var = 0.0;
        for (std::size_t r : part.shards[i]) {
          const std::size_t one[1] = {r};
          var += (obj.gradient(w, data, one) - local[i]).squaredNorm();
        }
        var /= static_cast<double>(part.shards[i].size()) * static_cast<double>(batch_size);
        est.sigma = std::max(est.sigma, std::sqrt(var));
      }
    }
  }

  bool closed_form = true;
  for (const auto& shard : part.shards) {
    if (auto l = obj.smoothness(data, shard)) {
      est.L = std::max(est.L, *l);
    } else {
      closed_form = false;
      break;
    }
  }
  if (!closed_form) {
    est.L = 0.0;
    Rng rng(seed);
    auto ratio = [&](const Vector& a, const Vector& b) {
      const double dist = (a - b).norm();
      if (dist <= 0.0) return;
      for (const auto& shard : part.shards) {
        est.L = std::max(est.L, (obj.gradient(a, data, shard) - obj.gradient(b, data, shard)).norm() / dist);
      }
    };
    for (std::size_t k = 0; k < points.size(); ++k) {
      if (k > 0) ratio(points[k], points[k - 1]);
      Vector probe = points[k];
      for (auto& x : probe) x += 1e-3 * rng.normal();
      ratio(points[k], probe);
    }
  }
  return est;
}

}  // namespace dflmesh
