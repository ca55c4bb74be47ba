#pragma once

#include <vector>

#include "rbp/offspring_laws.hpp"

namespace rbp {

struct AnalyticTolerances {
  double quadrature_rel = 1e-12;
  double ode_rel = 1e-9;
  double ode_abs = 1e-12;
  /// Finite-t oracles are refused once Q(t) drops below this floor.
  double survival_floor = 1e-12;
};

/// f(s) = E[s^nu] for any law, by direct summation with the remainder bounded
/// by P(nu > k) s^(k+1) < tol.
double pgf(const OffspringLaw& law, double s, double tol = 1e-15);

/// Generating-function machinery of a critical offspring law.
///
/// Everything is evaluated on the logarithmic scale v = -ln(1 - s):
///   g(v)  = L(e^v) = (f(s) - s)/(1 - s),
///   rho(x) = int_0^x dw / g(w) = pi(1 - e^{-x}),
///   q(t)  = -ln Q(t), the inverse of rho, with q' = g(q).
/// The backward equation dF/dt = f(F) - F becomes dv/dt = g(v), which keeps
/// 1 - F(s,t) at full relative precision when it is tiny.
///
/// Immutable after construction; all methods are const and thread-safe.
class AnalyticModel {
 public:
  explicit AnalyticModel(OffspringLaw law, AnalyticTolerances tol = {});

  const OffspringLaw& law() const { return law_; }
  const AnalyticTolerances& tolerances() const { return tol_; }

  /// f(s) = E[s^nu] on [0,1].
  double pgf(double s) const;
  /// L(x) = (f(1 - 1/x) - (1 - 1/x)) * x for x > 1.
  double slowly_varying(double x) const;
  /// g(v) = L(e^v) for v >= 0; g(0) = P(nu = 0).
  double slowly_varying_log(double v) const;

  /// F(s,t) from the backward Kolmogorov equation.
  double solve_backward(double s, double t) const;
  /// -ln(1 - F(s,t)) as a function of v0 = -ln(1 - s): the flow of dv/dt = g(v).
  double advance_log(double v0, double t) const;
  /// Q(t) = 1 - F(0,t) via the ODE.
  double survival(double t) const;
  /// -ln Q(t) via the ODE.
  double log_survival_ode(double t) const;

  /// pi(s) = int_0^s dv / (f(v) - v), s in [0,1).
  double pi_integral(double s) const;
  /// rho(x) = pi(1 - e^{-x}).
  double rho(double x) const;
  /// q(t) = -ln Q(t) by root-solving rho(q) = t.
  double log_survival(double t) const;
  /// Growth scale of ln Z(t) given survival: q(1/g(q(t))), regularly varying
  /// with index beta/(1+beta)^2.
  double size_scale(double t) const;
  /// Delta(s,t) = rho(q(t) - ln(1-s)) - t.
  double delta(double s, double t) const;

  /// E[s^{Z(u,t)} | Z(t) > 0].
  double reduced_gf(double s, double u, double t) const;
  /// P(Z(u,t) = 1 | Z(t) > 0) = g(q(t)) / g(q(t-u)), the s-derivative of
  /// reduced_gf at s = 0.
  double reduced_prob_one(double u, double t) const;
  /// P(tau(t) <= t x | Z(t) > 0) at finite t.
  double mrca_cdf(double t, double x) const;

 private:
  double g_heavy(double v) const;
  double g_table(double v) const;
  double series_pgf(double s) const;
  double rho_between(double x0, double x1) const;
  void check_survival(double log_q, const char* what) const;

  OffspringLaw law_;
  AnalyticTolerances tol_;
  std::vector<double> head_tail_;  // P(nu > k) for k < head_size
  std::size_t head_size_ = 0;
};

/// Limit laws for the beta regime.
struct LimitLaws {
  double beta;
  double exponent() const { return beta / (1.0 + beta); }
  /// x^{beta/(1+beta)} on [0,1].
  double mrca_cdf(double x) const;
  /// beta/(1+beta) x^{-1/(1+beta)} on (0,1].
  double phi_density(double x) const;
  /// 1 - exp(-x^{beta+1}) on [0, inf).
  double size_cdf(double x) const;
  /// ((1-y)/(1-x))^{beta/(1+beta)} for 0 <= x <= y < 1.
  double marginal_one(double x, double y) const;
};

LimitLaws limit_cdfs(double beta);

/// Closed-form generating functions of the limit processes.
struct LimitGf {
  enum class Mode { alpha, zero };
  Mode mode;
  double alpha = 0.0;

  static LimitGf alpha_mode(double a);
  static LimitGf zero_mode() { return {Mode::zero, 0.0}; }
};

/// F_alpha(s,t) = 1 - (1 - e^{-t} + e^{-t}(1-s)^{-alpha})^{-1/alpha};
/// F_0(s,t) = 1 - (1-s)^{e^{-t}}.
double F_closed(const LimitGf& mode, double s, double t);

}  // namespace rbp
