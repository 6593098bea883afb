#include "dflmesh/bounds.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

#include "dflmesh/error.hpp"

namespace dflmesh {

namespace {

void require_lambda(double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw Error(ErrorKind::InvalidArgument, "lambda must lie in (0,1)");
}

void require_common(const BoundParams& p) {
  if (!(p.beta >= 0.0 && p.beta < 1.0)) throw Error(ErrorKind::InvalidArgument, "beta must lie in [0,1)");
  if (!(p.L > 0.0)) throw Error(ErrorKind::InvalidArgument, "L must be positive");
  if (!(p.K >= 1.0)) throw Error(ErrorKind::InvalidArgument, "K must be >= 1");
  if (!(p.T >= 1.0)) throw Error(ErrorKind::InvalidArgument, "T must be >= 1");
  if (p.sigma < 0.0 || p.zeta < 0.0 || p.B < 0.0 || p.f_gap < 0.0) {
    throw Error(ErrorKind::InvalidArgument, "sigma, zeta, B and f_gap must be nonnegative");
  }
}

}  // namespace

void check_stepsize_guards(const BoundParams& p) {
  const double x = p.L * p.K * p.eta;
  if (!(p.eta > 0.0) || p.eta > 1.0 / (8.0 * p.L * p.K)) {
    throw Error(ErrorKind::StepsizeGuard, "stepsize guard violated: need 0 < eta <= 1/(8LK)");
  }
  if (!(64.0 * x * x + 64.0 * x < 1.0)) {
    throw Error(ErrorKind::StepsizeGuard, "stepsize guard violated: need 64L^2K^2eta^2 + 64LKeta < 1");
  }
}

ConvergenceConstants convergence_constants(const BoundParams& p) {
  require_common(p);
  check_stepsize_guards(p);
  const double L = p.L, K = p.K, eta = p.eta, b = p.beta;
  const double s2 = p.sigma * p.sigma, z2 = p.zeta * p.zeta, B2 = p.B * p.B;
  const double gamma = eta * (K - b) / (1.0 - b) - 64.0 * (1.0 - b) * L * L * std::pow(K, 4) * std::pow(eta, 3) / (K - b) -
                       64.0 * L * K * K * eta * eta;
  if (!(gamma > 0.0)) throw Error(ErrorKind::GammaNonpositive, "gamma nonpositive");
  const double momentum = 64.0 * K * K * b * b * (s2 + B2) / ((1.0 - b) * (1.0 - b));
  const double noise = 8.0 * K * s2 + 32.0 * K * K * z2 + momentum;
  const double alpha = ((1.0 - b) * L * L * K * K * std::pow(eta, 3) / (K - b) + L * eta * eta) * noise / gamma;
  const double xi = (64.0 * (1.0 - b) * std::pow(L, 4) * std::pow(K, 4) * std::pow(eta, 5) / (K - b) +
                     64.0 * std::pow(L, 3) * K * K * std::pow(eta, 4)) *
                    ((noise + 32.0 * K * K * B2) / gamma);
  return {gamma, alpha, xi};
}

double convergence_bound(const BoundParams& p) {
  require_lambda(p.lambda);
  const auto k = convergence_constants(p);
  return 2.0 * p.f_gap / (k.gamma * p.T) + k.alpha + k.xi / ((1.0 - p.lambda) * (1.0 - p.lambda));
}

double c_lambda(double lambda) {
  require_lambda(lambda);
  const double ln = std::log(1.0 / lambda);
  return 2.0 * lambda * lambda + 4.0 * lambda * lambda * ln + 2.0 * lambda + 2.0 / ln;
}

double c_lambda_lemma(double lambda) {
  require_lambda(lambda);
  const double ln = std::log(1.0 / lambda);
  const double first = std::min(2.0 * lambda, std::exp(-1.0) / ln);
  const double second = std::min(4.0 * lambda * ln, 4.0 * std::exp(-2.0) / ln);
  return first + second + first + 2.0 / ln;
}

double stability_bound(const BoundParams& p) {
  require_lambda(p.lambda);
  if (!(p.c > 0.0 && p.L > 0.0 && p.K > 0.0 && p.T > 0.0 && p.n > 0.0 && p.N > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "c, L, K, T, n and N must be positive");
  }
  if (p.sigma < 0.0 || p.B < 0.0 || p.sup_f < 0.0) {
    throw Error(ErrorKind::InvalidArgument, "sigma, B and sup_f must be nonnegative");
  }
  const double a = p.c * p.L * p.K;
  const double growth = std::pow(p.T, a / (1.0 + a));
  const double first = p.sup_f * p.K * std::pow(a, 1.0 / (1.0 + a)) / p.n;
  const double second = (2.0 * p.sigma * p.B / (p.N * p.L)) / std::pow(a, a / (1.0 + a));
  return growth * (first + second) + p.B * (p.sigma + p.B) * (p.c * p.K + 2.0 * c_lambda(p.lambda)) / a;
}

LemmaCheck verify_lemma_a4(double c, double lambda, std::size_t t_max) {
  require_lambda(lambda);
  if (!(c > 0.0)) throw Error(ErrorKind::InvalidArgument, "c must be positive");
  if (t_max < 2) throw Error(ErrorKind::InvalidArgument, "t_max must be >= 2");
  LemmaCheck out;
  out.constant = c_lambda_lemma(lambda);
  double s = 0.0;  // sum_{j=1}^{t-1} lambda^j / (t - j), without the factor c
  for (std::size_t t = 2; t <= t_max; ++t) {
    s = lambda * s + lambda / static_cast<double>(t - 1);
    const double ratio = static_cast<double>(t) * s / out.constant;
    if (ratio > out.ratio) {
      out.ratio = ratio;
      out.worst_t = t;
    }
  }
  return out;
}

BoundParams bound_params_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Config, std::string("bounds parameters: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::Config, "bounds parameters: expected a JSON object");
  BoundParams p;
  const std::pair<const char*, double*> fields[] = {
      {"L", &p.L},       {"sigma", &p.sigma}, {"zeta", &p.zeta},     {"B", &p.B},       {"K", &p.K},
      {"T", &p.T},       {"eta", &p.eta},     {"c", &p.c},           {"beta", &p.beta}, {"lambda", &p.lambda},
      {"N", &p.N},       {"n", &p.n},         {"f_gap", &p.f_gap},   {"sup_f", &p.sup_f}};
  std::set<std::string> known;
  for (const auto& [name, target] : fields) {
    known.insert(name);
    if (!j.contains(name)) continue;
    if (!j[name].is_number()) throw Error(ErrorKind::Config, std::string("bounds parameters: '") + name + "' must be a number");
    *target = j[name].get<double>();
  }
  for (const auto& item : j.items()) {
    if (!known.contains(item.key())) throw Error(ErrorKind::Config, "bounds parameters: unknown key '" + item.key() + "'");
  }
  return p;
}

std::string bounds_report_json(const BoundParams& p, std::size_t t_max) {
  nlohmann::json out = nlohmann::json::object();
  auto guarded = [](auto&& fn) -> nlohmann::json {
    try {
      return fn();
    } catch (const Error& e) {
      return nlohmann::json{{"error", to_string(e.kind())}, {"message", e.detail()}};
    }
  };
  if (p.eta > 0.0) {
    out["convergence"] = guarded([&] {
      const auto k = convergence_constants(p);
      return nlohmann::json{{"gamma", k.gamma}, {"alpha", k.alpha}, {"xi", k.xi}, {"bound", convergence_bound(p)}};
    });
  }
  if (p.c > 0.0) {
    out["stability"] = guarded([&] {
      return nlohmann::json{{"c_lambda", c_lambda(p.lambda)}, {"epsilon", stability_bound(p)}};
    });
    out["lemma_check"] = guarded([&] {
      const auto r = verify_lemma_a4(p.c, p.lambda, t_max);
      return nlohmann::json{{"ratio", r.ratio}, {"worst_t", r.worst_t}, {"c_lambda_lemma", r.constant},
                            {"t_max", t_max}, {"holds", r.ratio <= 1.0 + 1e-9}};
    });
  }
  return out.dump(2);
}

}  // namespace dflmesh
