#pragma once

#include <functional>

namespace rbp::numerics {

/// Adaptive Gauss-Kronrod (G15/K31) quadrature on [a,b]; b may be +inf.
/// Throws NumericalError when the error estimate stays above both
/// 1e3 * rel_tol * |integral| and abs_tol after the maximum subdivision depth.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-12, unsigned max_depth = 18, double abs_tol = 1e-14);

struct OdeOptions {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double min_step = 1e-14;
  unsigned long max_steps = 5'000'000;
};

struct OdeStats {
  unsigned long accepted = 0;
  unsigned long rejected = 0;
};

/// Integrates the autonomous scalar equation y' = rhs(y) from y(0)=y0 over
/// [0, duration] with the Dormand-Prince 5(4) embedded pair.
double integrate_autonomous(const std::function<double(double)>& rhs, double y0,
                            double duration, const OdeOptions& options = {},
                            OdeStats* stats = nullptr);

/// Safeguarded Newton iteration for an increasing function on [lo, hi] with
/// value(lo) < 0 < value(hi). `eval` returns {value, derivative}.
double solve_increasing(const std::function<std::pair<double, double>(double)>& eval,
                        double lo, double hi, double x_tol, unsigned max_iter = 200);

}  // namespace rbp::numerics

namespace rbp::numerics {

/// ln Gamma(x) for x > 0 (reentrant, unlike ::lgamma).
double log_gamma(double x);

/// ln B(a, b) for a, b > 0.
double log_beta(double a, double b);

}  // namespace rbp::numerics
