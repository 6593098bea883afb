#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dflmesh/graph.hpp"

namespace dflmesh {

inline constexpr double kDefaultEigenTol = 1e-9;

struct LaplacianExtremes {
  double lambda2 = 0.0;
  double lambdaN = 0.0;
};

struct SpectralSummary {
  double lambda2 = 0.0;
  double lambdaN = 0.0;
  double kappa = 0.0;
  double lambda_mix = 0.0;
};

/// Eigenvalues of a real symmetric matrix in ascending order (dense solve).
/// Throws NotConverged if the decomposition fails or its residual exceeds
/// `tol` relative to the matrix norm.
std::vector<double> symmetric_eigenvalues(const Eigen::MatrixXd& m, double tol = kDefaultEigenTol);

/// Second-smallest and largest Laplacian eigenvalues. Throws Disconnected.
LaplacianExtremes eigen_extremes(const Graph& g, double tol = kDefaultEigenTol);

/// kappa(L) = lambda_N(L) / lambda_2(L).
double reduced_condition_number(const Graph& g, double tol = kDefaultEigenTol);

/// 2 - 2 cos(2 pi k / n), the k-th Laplacian eigenvalue of the n-cycle.
double ring_laplacian_eigenvalue(std::size_t n, std::size_t k);

/// n^2 / pi^2, the quadratic lower bound on kappa of the n-cycle.
double ring_kappa_lower_bound(std::size_t n);

/// (d + 2 sqrt(d-1)) / (d - 2 sqrt(d-1)); requires d >= 3.
double ramanujan_kappa_upper_bound(std::size_t d);

/// Kappa bound for a d-regular graph from its nontrivial adjacency eigenvalue:
/// (d + lambda1) / (d - lambda1).
double regular_kappa_upper_bound(std::size_t d, double lambda1_adjacency);

/// Largest-magnitude adjacency eigenvalue after removing the trivial
/// eigenvalue d. Throws NotRegular / Disconnected.
double adjacency_second_eigenvalue(const Graph& g, double tol = kDefaultEigenTol);

std::string to_json(const SpectralSummary& s);

}  // namespace dflmesh
