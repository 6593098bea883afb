#pragma once

#include <cstddef>
#include <optional>
#include <string>

namespace dflmesh {

/// Constants of the convergence and stability bounds. Smoothness L, noise
/// sigma, heterogeneity zeta, gradient bound B; beta is the momentum.
struct BoundParams {
  double L = 1.0;
  double sigma = 0.0;
  double zeta = 0.0;
  double B = 0.0;
  double K = 1.0;
  double T = 1.0;
  double eta = 0.0;  ///< constant step of the convergence bound
  double c = 0.0;    ///< eta_t = c/t in the stability bound
  double beta = 0.0;
  double lambda = 0.5;
  double N = 1.0;  ///< clients
  double n = 1.0;  ///< samples per client
  double f_gap = 0.0;  ///< f(w_bar^1) - min f
  double sup_f = 0.0;
};

struct ConvergenceConstants {
  double gamma = 0.0;
  double alpha = 0.0;
  double xi = 0.0;
};

/// Throws StepsizeGuard unless 0 < eta <= 1/(8LK) and
/// 64 L^2 K^2 eta^2 + 64 L K eta < 1.
void check_stepsize_guards(const BoundParams& p);

/// gamma, alpha, Xi as functions of (K, eta). Throws StepsizeGuard or
/// GammaNonpositive; InvalidArgument on negative constants or beta outside [0,1).
ConvergenceConstants convergence_constants(const BoundParams& p);

/// Upper bound on min_t E|grad f(w_bar^t)|^2:
/// 2 f_gap / (gamma T) + alpha + Xi / (1 - lambda)^2.
double convergence_bound(const BoundParams& p);

/// 2 lambda^2 + 4 lambda^2 ln(1/lambda) + 2 lambda + 2 / ln(1/lambda).
double c_lambda(double lambda);

/// The step-size-sum lemma's own constant, with its min-terms kept:
/// min{2l, e^-1/ln(1/l)} + min{4 l ln(1/l), 4 e^-2/ln(1/l)}
///   + min{2l, e^-1/ln(1/l)} + 2/ln(1/l).
double c_lambda_lemma(double lambda);

/// Uniform-stability bound for eta_t = c/t, using c_lambda().
double stability_bound(const BoundParams& p);

struct LemmaCheck {
  double ratio = 0.0;     ///< max_t t * sum_j eta_{t-j} lambda^j / (c * C)
  std::size_t worst_t = 0;
  double constant = 0.0;  ///< c_lambda_lemma(lambda)
};

/// Evaluates sum_{j=1}^{t-1} (c/(t-j)) lambda^j for t in [2, t_max] by the
/// recurrence S_t = lambda S_{t-1} + lambda/(t-1) and reports the worst ratio
/// against c * C_lambda / t.
LemmaCheck verify_lemma_a4(double c, double lambda, std::size_t t_max);

/// Reads a BoundParams JSON object; unknown keys are rejected (Config).
BoundParams bound_params_from_json(const std::string& text);

/// Evaluates whatever the parameters allow: convergence terms when eta > 0,
/// stability when c > 0, and the lemma check for lambda. Failures are
/// reported per entry as {"error": ...}.
std::string bounds_report_json(const BoundParams& p, std::size_t t_max = 10000);

}  // namespace dflmesh
