#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dflmesh/data.hpp"

namespace dflmesh {

using Vector = Eigen::VectorXd;
using Rows = std::span<const std::size_t>;

/// A model family with a per-sample loss. Losses and gradients are averaged
/// over the given rows (repeats allowed, so with-replacement batches work).
/// Implementations are immutable and safe to share between threads.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::string name() const = 0;
  virtual std::size_t param_count() const = 0;
  virtual double loss(const Vector& w, const Dataset& data, Rows rows) const = 0;
  virtual void gradient_into(const Vector& w, const Dataset& data, Rows rows, Vector& out) const = 0;

  Vector gradient(const Vector& w, const Dataset& data, Rows rows) const {
    Vector g;
    gradient_into(w, data, rows, g);
    return g;
  }

  virtual bool is_classifier() const { return false; }
  /// Predicted class of one row. Throws NotAClassifier for regression.
  virtual int predict(const Vector& w, const Dataset& data, std::size_t row) const;

  /// Weights uniform in +-1/sqrt(fan_in), biases zero.
  virtual Vector initial_params(std::uint64_t seed) const = 0;

  /// Exact (or upper-bound) smoothness constant over `rows` when the model
  /// admits one in closed form.
  virtual std::optional<double> smoothness(const Dataset& /*data*/, Rows /*rows*/) const { return std::nullopt; }
};

/// f(w) = |Xw - y|^2 / (2 rows) on the dataset targets; P = dims.
std::unique_ptr<Objective> least_squares(std::size_t dims);

/// Binary cross-entropy with a bias term plus (l2/2)|w|^2; P = dims + 1.
std::unique_ptr<Objective> logistic_regression(std::size_t dims, double l2);

/// dims -> hidden (tanh) -> classes, softmax cross-entropy.
/// Layout: W1 (hidden x dims, row-major), b1, W2 (classes x hidden), b2.
std::unique_ptr<Objective> mlp_classifier(std::size_t dims, std::size_t hidden, int classes);

/// Fraction of rows whose argmax prediction equals the label.
double accuracy(const Objective& obj, const Vector& w, const Dataset& data, Rows rows);
double accuracy(const Objective& obj, const Vector& w, const Dataset& data);

/// All row indices of a dataset.
std::vector<std::size_t> all_rows(const Dataset& data);

/// Global objective f = (1/N) sum_i f_i over the shards of a partition.
double global_loss(const Objective& obj, const Vector& w, const Dataset& data, const Partition& part);
Vector global_gradient(const Objective& obj, const Vector& w, const Dataset& data, const Partition& part);

/// Minimizer of the global least-squares objective from the weighted normal
/// equations sum_i X_i'X_i/m_i w = sum_i X_i'y_i/m_i.
Vector least_squares_optimum(const Dataset& data, const Partition& part);

/// Empirical assumption constants used by the bound evaluators.
struct ConstantEstimates {
  double L = 0.0;      ///< smoothness
  double sigma = 0.0;  ///< stochastic-gradient noise (std. dev. of a batch gradient)
  double zeta = 0.0;   ///< max_i |grad f_i - grad f|
  double B = 0.0;      ///< max_i |grad f_i|
};

/// Evaluates the constants at the given points. L uses the closed form when
/// available, otherwise the largest observed gradient-difference ratio over
/// consecutive points and seeded perturbations. sigma is exact for
/// with-replacement batches of `batch_size` (0 means full-batch, sigma = 0).
ConstantEstimates estimate_constants(const Objective& obj, const Dataset& data, const Partition& part,
                                     std::span<const Vector> points, std::size_t batch_size, std::uint64_t seed);

}  // namespace dflmesh
