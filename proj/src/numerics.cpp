#include "rbp/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rbp/error.hpp"

namespace rbp::numerics {

namespace {

struct Piece {
  double value;
  double error;
  double l1;
};

Piece kronrod(const std::function<double(double)>& f, double a, double b) {
  Piece p{};
  p.value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 0, 0.0,
                                                                            &p.error, &p.l1);
  return p;
}

Piece adapt(const std::function<double(double)>& f, double a, double b, const Piece& whole,
            double rel_tol, double abs_tol, unsigned depth) {
  if (whole.error <= std::max(rel_tol * whole.l1, abs_tol) || depth == 0) {
    return whole;
  }
  const double mid = 0.5 * (a + b);
  const Piece left = kronrod(f, a, mid);
  const Piece right = kronrod(f, mid, b);
  const Piece l = adapt(f, a, mid, left, rel_tol, 0.5 * abs_tol, depth - 1);
  const Piece r = adapt(f, mid, b, right, rel_tol, 0.5 * abs_tol, depth - 1);
  return {l.value + r.value, l.error + r.error, l.l1 + r.l1};
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol, unsigned max_depth, double abs_tol) {
  if (a == b) {
    return 0.0;
  }
  if (std::isinf(b)) {
    // x = a + u/(1-u) maps [0,1) onto [a, inf).
    auto mapped = [&f, a](double u) {
      if (u >= 1.0) {
        return 0.0;
      }
      const double w = 1.0 - u;
      return f(a + u / w) / (w * w);
    };
    return integrate(mapped, 0.0, 1.0, rel_tol, max_depth, abs_tol);
  }
  const Piece whole = kronrod(f, a, b);
  const Piece result = adapt(f, a, b, whole, rel_tol, abs_tol, max_depth);
  if (!std::isfinite(result.value)) {
    std::ostringstream msg;
    msg << "quadrature on [" << a << ", " << b << "] produced a non-finite value";
    throw NumericalError(msg.str());
  }
  if (result.error > std::max(1e3 * rel_tol * result.l1, abs_tol)) {
    std::ostringstream msg;
    msg << "quadrature on [" << a << ", " << b << "] did not converge: estimate "
        << result.value << ", error " << result.error;
    throw NumericalError(msg.str());
  }
  return result.value;
}

double integrate_autonomous(const std::function<double(double)>& rhs, double y0,
                            double duration, const OdeOptions& options, OdeStats* stats) {
  if (duration < 0.0) {
    throw DomainError("ODE duration must be nonnegative");
  }
  if (duration == 0.0) {
    return y0;
  }
  // Dormand-Prince 5(4) tableau.
  constexpr double a21 = 1.0 / 5.0;
  constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
  constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                   a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
  constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                   a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
  constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                   b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
  constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                   e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

  double t = 0.0;
  double y = y0;
  double k1 = rhs(y);
  double h = std::min(duration, 1e-3 * std::max(1.0, std::abs(y0)) /
                                    std::max(std::abs(k1), 1e-300));
  h = std::max(h, std::min(duration, 1e-6));
  OdeStats local;
  while (t < duration) {
    if (local.accepted + local.rejected > options.max_steps) {
      std::ostringstream msg;
      msg << "ODE step budget exhausted at t=" << t << " of " << duration << ", y=" << y;
      throw NumericalError(msg.str());
    }
    bool last = false;
    if (t + h >= duration) {
      h = duration - t;
      last = true;
    }
    const double k2 = rhs(y + h * a21 * k1);
    const double k3 = rhs(y + h * (a31 * k1 + a32 * k2));
    const double k4 = rhs(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const double k5 = rhs(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const double k6 = rhs(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const double y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const double k7 = rhs(y_new);
    const double err =
        h * std::abs(e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double scale =
        options.abs_tol + options.rel_tol * std::max(std::abs(y), std::abs(y_new));
    const double ratio = err / scale;
    if (ratio <= 1.0 && std::isfinite(y_new)) {
      t = last ? duration : t + h;
      y = y_new;
      k1 = k7;
      ++local.accepted;
      const double grow = ratio == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(ratio, -0.2));
      h *= grow;
    } else {
      ++local.rejected;
      const double shrink =
          std::isfinite(ratio) ? std::max(0.1, 0.9 * std::pow(ratio, -0.25)) : 0.1;
      h *= shrink;
      if (h < options.min_step * std::max(1.0, t)) {
        std::ostringstream msg;
        msg << "ODE step size underflow at t=" << t << ", y=" << y << ", h=" << h
            << ", error ratio=" << ratio;
        throw NumericalError(msg.str());
      }
    }
  }
  if (stats != nullptr) {
    *stats = local;
  }
  return y;
}

double solve_increasing(const std::function<std::pair<double, double>(double)>& eval,
                        double lo, double hi, double x_tol, unsigned max_iter) {
  double x = 0.5 * (lo + hi);
  for (unsigned iter = 0; iter < max_iter; ++iter) {
    const auto [value, slope] = eval(x);
    if (value == 0.0) {
      return x;
    }
    if (value < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    double next = x - value / slope;
    if (!(slope > 0.0) || !(next > lo && next < hi)) {
      next = 0.5 * (lo + hi);
    }
    if (std::abs(next - x) <= x_tol * std::max(1.0, std::abs(x)) || hi - lo <= x_tol) {
      return next;
    }
    x = next;
  }
  std::ostringstream msg;
  msg << "root solve did not converge in bracket [" << lo << ", " << hi << "]";
  throw NumericalError(msg.str());
}

}  // namespace rbp::numerics

#include <boost/math/special_functions/gamma.hpp>

namespace rbp::numerics {

double log_gamma(double x) {
  if (!(x > 0.0)) {
    throw DomainError("log_gamma requires a positive argument");
  }
  return boost::math::lgamma(x);
}

double log_beta(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

}  // namespace rbp::numerics
