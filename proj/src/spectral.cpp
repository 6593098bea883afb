#include "dflmesh/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "dflmesh/error.hpp"

namespace dflmesh {

std::vector<double> symmetric_eigenvalues(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::DimensionMismatch, "eigensolve needs a square matrix");
  if (m.rows() == 0) return {};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::NotConverged, "symmetric eigensolver failed");
  const Eigen::VectorXd& values = solver.eigenvalues();
  const Eigen::MatrixXd& vectors = solver.eigenvectors();
  const double scale = std::max(1.0, m.cwiseAbs().rowwise().sum().maxCoeff());
  const Eigen::MatrixXd residual = m * vectors - vectors * values.asDiagonal();
  const double worst = residual.colwise().norm().maxCoeff();
  if (!(worst <= tol * scale)) {
    throw Error(ErrorKind::NotConverged, "eigen residual " + std::to_string(worst) + " above tolerance");
  }
  return {values.data(), values.data() + values.size()};
}

LaplacianExtremes eigen_extremes(const Graph& g, double tol) {
  if (g.node_count() < 2) throw Error(ErrorKind::InvalidArgument, "need at least two nodes");
  if (!is_connected(g)) throw Error(ErrorKind::Disconnected, "Laplacian has a repeated zero eigenvalue");
  const auto ev = symmetric_eigenvalues(g.laplacian(), tol);
  LaplacianExtremes out{ev[1], ev.back()};
  if (!(out.lambda2 > tol * out.lambdaN)) throw Error(ErrorKind::Disconnected, "lambda_2 is numerically zero");
  return out;
}

double reduced_condition_number(const Graph& g, double tol) {
  const auto ex = eigen_extremes(g, tol);
  return ex.lambdaN / ex.lambda2;
}

double ring_laplacian_eigenvalue(std::size_t n, std::size_t k) {
  return 2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
}

double ring_kappa_lower_bound(std::size_t n) {
  if (n < 3) throw Error(ErrorKind::InvalidArgument, "ring needs n >= 3");
  const double nn = static_cast<double>(n);
  return nn * nn / (std::numbers::pi * std::numbers::pi);
}

double ramanujan_kappa_upper_bound(std::size_t d) {
  if (d < 3) throw Error(ErrorKind::InvalidArgument, "Ramanujan kappa bound needs d >= 3");
  const double dd = static_cast<double>(d);
  const double s = 2.0 * std::sqrt(dd - 1.0);
  return (dd + s) / (dd - s);
}

double regular_kappa_upper_bound(std::size_t d, double lambda1_adjacency) {
  const double dd = static_cast<double>(d);
  if (!(lambda1_adjacency < dd)) throw Error(ErrorKind::InvalidArgument, "adjacency eigenvalue must be below d");
  return (dd + lambda1_adjacency) / (dd - lambda1_adjacency);
}

double adjacency_second_eigenvalue(const Graph& g, double tol) {
  if (g.node_count() < 2) throw Error(ErrorKind::InvalidArgument, "need at least two nodes");
  if (g.min_degree() != g.max_degree()) throw Error(ErrorKind::NotRegular, "degrees differ");
  if (!is_connected(g)) throw Error(ErrorKind::Disconnected, "trivial adjacency eigenvalue is not simple");
  const auto ev = symmetric_eigenvalues(g.adjacency(), tol);
  // ev.back() == d with eigenvector 1.
  return std::max(std::abs(ev.front()), std::abs(ev[ev.size() - 2]));
}

std::string to_json(const SpectralSummary& s) {
  nlohmann::json j;
  j["lambda2"] = s.lambda2;
  j["lambdaN"] = s.lambdaN;
  j["kappa"] = s.kappa;
  j["lambda_mix"] = s.lambda_mix;
  return j.dump();
}

}  // namespace dflmesh
