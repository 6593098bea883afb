#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "dflmesh/graph.hpp"

namespace dflmesh {

/// Symmetric doubly-stochastic gossip matrix with its mixing rate
/// lambda = max(|lambda_2(M)|, |lambda_N(M)|).
class MixingMatrix {
 public:
  /// Wraps `m` without checking the mixing-matrix axioms. Used for test
  /// doubles such as the identity.
  static MixingMatrix unchecked(Eigen::MatrixXd m);

  const Eigen::MatrixXd& matrix() const { return m_; }
  std::size_t size() const { return static_cast<std::size_t>(m_.rows()); }
  double lambda() const { return lambda_; }
  double operator()(std::size_t i, std::size_t j) const {
    return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

 private:
  friend MixingMatrix make_checked_mixing(Eigen::MatrixXd m, const Graph& g);
  MixingMatrix(Eigen::MatrixXd m, double lambda) : m_(std::move(m)), lambda_(lambda) {}

  Eigen::MatrixXd m_;
  double lambda_ = 1.0;
};

/// max(|lambda_2|, |lambda_N|) of a symmetric matrix with eigenvalues sorted
/// in non-increasing order.
double mixing_rate(const Eigen::MatrixXd& m);

/// Checks the four mixing-matrix axioms against `g`: off-diagonal pattern
/// equals the edge set, symmetry and unit row sums to 1e-12, spectrum inside
/// (-1 + 1e-9, 1] with a simple unit eigenvalue. Diagonal entries are not
/// required to be positive. Returns the validated matrix.
MixingMatrix make_checked_mixing(Eigen::MatrixXd m, const Graph& g);

/// M = I - 2 L / ((1 + theta) lambda_N(L)), theta in [0, 1).
MixingMatrix laplacian_mixing(const Graph& g, double theta);

/// 1 / kappa. Throws for kappa < 1.
double optimal_theta(double kappa);

/// The side condition 2/kappa - theta* <= 1 under which theta* = 1/kappa is
/// the equalizing choice. Always true for kappa >= 1.
bool optimal_theta_condition_holds(double kappa);

/// min(theta, 1 - 1e-6): keeps theta* = 1 (complete graphs) inside [0, 1).
double clamp_theta(double theta);

/// max{ |1 + theta - 2/kappa| / (1 + theta), (1 - theta) / (1 + theta) }.
double lambda_of_theta(double kappa, double theta);

MixingMatrix metropolis_hastings_mixing(const Graph& g);
MixingMatrix max_degree_mixing(const Graph& g);

/// Returns M X for an N x P parameter block.
Eigen::MatrixXd mix_step(const MixingMatrix& m, const Eigen::MatrixXd& x);

enum class MixingKind { Laplacian, MetropolisHastings, MaxDegree };

struct MixingSpec {
  MixingKind kind = MixingKind::Laplacian;
  std::optional<double> theta;  ///< Laplacian only; empty means clamped theta*.
};

/// Parses "laplacian:<theta>", "laplacian:auto", "mh" or "maxdeg".
MixingSpec parse_mixing_spec(const std::string& text);
std::string to_string(const MixingSpec& spec);

/// Builds the matrix selected by `spec`; also reports the theta used.
MixingMatrix build_mixing(const Graph& g, const MixingSpec& spec, double* theta_used = nullptr);

}  // namespace dflmesh
