#include "dflmesh/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dflmesh/error.hpp"
#include "dflmesh/spectral.hpp"

namespace dflmesh {

namespace {

constexpr double kAxiomTol = 1e-12;
constexpr double kSpectralMargin = 1e-9;

void require_connected(const Graph& g) {
  if (!is_connected(g)) throw Error(ErrorKind::Disconnected, "mixing matrices need a connected graph");
}

}  // namespace

MixingMatrix MixingMatrix::unchecked(Eigen::MatrixXd m) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::DimensionMismatch, "mixing matrix must be square");
  const double lambda = m.rows() > 1 && m.isApprox(m.transpose(), 1e-12) ? mixing_rate(m) : 1.0;
  return MixingMatrix(std::move(m), lambda);
}

double mixing_rate(const Eigen::MatrixXd& m) {
  if (m.rows() < 2) return 0.0;
  const auto ev = symmetric_eigenvalues(m);  // ascending
  const double second = ev[ev.size() - 2];
  const double last = ev.front();
  return std::max(std::abs(second), std::abs(last));
}

MixingMatrix make_checked_mixing(Eigen::MatrixXd m, const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.node_count());
  if (m.rows() != n || m.cols() != n) throw Error(ErrorKind::DimensionMismatch, "mixing matrix size differs from graph");
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      row += m(i, j);
      if (std::abs(m(i, j) - m(j, i)) > kAxiomTol) {
        throw Error(ErrorKind::SpectralViolation, "mixing matrix is not symmetric");
      }
      if (i == j) continue;
      const bool edge = g.has_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      if (edge && !(m(i, j) > 0.0)) throw Error(ErrorKind::SpectralViolation, "edge weight must be positive");
      if (!edge && m(i, j) != 0.0) throw Error(ErrorKind::SpectralViolation, "non-edge weight must be zero");
    }
    if (std::abs(row - 1.0) > kAxiomTol) throw Error(ErrorKind::SpectralViolation, "row does not sum to one");
  }
  const auto ev = symmetric_eigenvalues(m);
  if (n >= 2) {
    if (ev.back() > 1.0 + kSpectralMargin) throw Error(ErrorKind::SpectralViolation, "eigenvalue above one");
    if (ev[ev.size() - 2] > 1.0 - kSpectralMargin) {
      throw Error(ErrorKind::SpectralViolation, "unit eigenvalue is not simple");
    }
    if (ev.front() <= -1.0 + kSpectralMargin) {
      throw Error(ErrorKind::SpectralViolation, "smallest eigenvalue " + std::to_string(ev.front()) + " not above -1");
    }
  }
  const double lambda = n >= 2 ? std::max(std::abs(ev[ev.size() - 2]), std::abs(ev.front())) : 0.0;
  return MixingMatrix(std::move(m), lambda);
}

MixingMatrix laplacian_mixing(const Graph& g, double theta) {
  if (!(theta >= 0.0 && theta < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "theta out of range [0,1): " + std::to_string(theta));
  }
  require_connected(g);
  const auto ex = eigen_extremes(g);
  const auto n = static_cast<Eigen::Index>(g.node_count());
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) - (2.0 / ((1.0 + theta) * ex.lambdaN)) * g.laplacian();
  // Row sums are exactly 1 in exact arithmetic; remove rounding from the diagonal.
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) += 1.0 - m.row(i).sum();
  return make_checked_mixing(std::move(m), g);
}

double optimal_theta(double kappa) {
  if (!(kappa >= 1.0)) throw Error(ErrorKind::InvalidArgument, "kappa must be >= 1");
  return 1.0 / kappa;
}

bool optimal_theta_condition_holds(double kappa) { return 2.0 / kappa - optimal_theta(kappa) <= 1.0; }

double clamp_theta(double theta) { return std::min(theta, 1.0 - 1e-6); }

double lambda_of_theta(double kappa, double theta) {
  if (!(kappa >= 1.0)) throw Error(ErrorKind::InvalidArgument, "kappa must be >= 1");
  if (!(theta >= 0.0 && theta < 1.0)) throw Error(ErrorKind::InvalidArgument, "theta out of range [0,1)");
  const double second = std::abs(1.0 + theta - 2.0 / kappa) / (1.0 + theta);
  const double last = (1.0 - theta) / (1.0 + theta);
  return std::max(second, last);
}

MixingMatrix metropolis_hastings_mixing(const Graph& g) {
  require_connected(g);
  const auto n = static_cast<Eigen::Index>(g.node_count());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [i, j] : g.edges()) {
    const double w = 1.0 / (1.0 + static_cast<double>(std::max(g.degree(i), g.degree(j))));
    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
    m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = w;
  }
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) = 1.0 - m.row(i).sum();
  return make_checked_mixing(std::move(m), g);
}

MixingMatrix max_degree_mixing(const Graph& g) {
  require_connected(g);
  const auto n = static_cast<Eigen::Index>(g.node_count());
  const double w = 1.0 / (1.0 + static_cast<double>(g.max_degree()));
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [i, j] : g.edges()) {
    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
    m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = w;
  }
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) = 1.0 - static_cast<double>(g.degree(static_cast<std::size_t>(i))) * w;
  return make_checked_mixing(std::move(m), g);
}

Eigen::MatrixXd mix_step(const MixingMatrix& m, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.rows()) != m.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "parameter block has " + std::to_string(x.rows()) + " rows, mixing matrix " + std::to_string(m.size()));
  }
  return m.matrix() * x;
}

MixingSpec parse_mixing_spec(const std::string& text) {
  if (text == "mh") return {MixingKind::MetropolisHastings, std::nullopt};
  if (text == "maxdeg") return {MixingKind::MaxDegree, std::nullopt};
  if (text == "laplacian" || text == "laplacian:auto") return {MixingKind::Laplacian, std::nullopt};
  const std::string prefix = "laplacian:";
  if (text.starts_with(prefix)) {
    std::istringstream is(text.substr(prefix.size()));
    double theta = 0.0;
    if (is >> theta && is.eof()) {
      if (!(theta >= 0.0 && theta < 1.0)) throw Error(ErrorKind::Config, "mixing theta must lie in [0,1)");
      return {MixingKind::Laplacian, theta};
    }
  }
  throw Error(ErrorKind::Config, "unknown mixing spec '" + text + "'");
}

std::string to_string(const MixingSpec& spec) {
  switch (spec.kind) {
    case MixingKind::MetropolisHastings: return "mh";
    case MixingKind::MaxDegree: return "maxdeg";
    case MixingKind::Laplacian:
      return spec.theta ? "laplacian:" + std::to_string(*spec.theta) : std::string("laplacian:auto");
  }
  return "";
}

MixingMatrix build_mixing(const Graph& g, const MixingSpec& spec, double* theta_used) {
  switch (spec.kind) {
    case MixingKind::MetropolisHastings: return metropolis_hastings_mixing(g);
    case MixingKind::MaxDegree: return max_degree_mixing(g);
    case MixingKind::Laplacian: {
      const double theta = spec.theta ? *spec.theta : clamp_theta(optimal_theta(reduced_condition_number(g)));
      if (theta_used) *theta_used = theta;
      return laplacian_mixing(g, theta);
    }
  }
  throw Error(ErrorKind::Config, "unknown mixing kind");
}

}  // namespace dflmesh
