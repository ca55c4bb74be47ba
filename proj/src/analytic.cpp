#include "rbp/analytic.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "rbp/error.hpp"
#include "rbp/numerics.hpp"

namespace rbp {

namespace {

constexpr double kE = std::numbers::e;
constexpr std::size_t kHeadTerms = 1024;

// ln(e + e^y) without overflow.
double log_e_plus_exp(double y) {
  return y > 1.0 ? y + std::log1p(kE * std::exp(-y)) : std::log(kE + std::exp(y));
}

}  // namespace

AnalyticModel::AnalyticModel(OffspringLaw law, AnalyticTolerances tol)
    : law_(std::move(law)), tol_(tol) {
  if (law_.kind() != LawKind::heavy_tail && law_.kind() != LawKind::table) {
    throw ParameterError("AnalyticModel needs a critical heavy_tail or table law, got " +
                         law_.describe());
  }
  if (std::abs(law_.mean() - 1.0) > 1e-9) {
    throw ParameterError("AnalyticModel needs a critical law (mean 1), got " + law_.describe());
  }
  if (law_.pmf(1) >= 1.0) {
    throw ParameterError("AnalyticModel: degenerate law with f(s) = s");
  }
  if (law_.kind() == LawKind::heavy_tail) {
    head_size_ = kHeadTerms;
    head_tail_.resize(head_size_);
    for (std::size_t k = 0; k < head_size_; ++k) {
      head_tail_[k] = law_.tail(k);
    }
  }
}

double AnalyticModel::g_table(double v) const {
  // (f(s)-s)/(1-s) = (1 - E nu) + sum_k P(nu>k)(1 - s^k)
  const double log_s = v == 0.0 ? -std::numeric_limits<double>::infinity()
                                : std::log1p(-std::exp(-v));
  double total = 1.0 - law_.mean();
  const auto& pmf = law_.table_pmf();
  for (std::size_t k = 1; k < pmf.size(); ++k) {
    const double one_minus_sk = v == 0.0 ? 1.0 : -std::expm1(static_cast<double>(k) * log_s);
    total += law_.tail(k) * one_minus_sk;
  }
  return total;
}

double AnalyticModel::g_heavy(double v) const {
  const auto& hp = law_.heavy();
  if (v == 0.0) {
    return 1.0 - hp.tail0;
  }
  // s = 1 - e^{-v}, lambda = -ln s; g(v) = sum_{k>=1} P(nu>k)(1 - e^{-lambda k}).
  double lambda;
  double log_inv_lambda;
  if (v > 30.0) {
    const double ev = std::exp(-v);
    lambda = ev * (1.0 + 0.5 * ev);
    log_inv_lambda = v - std::log1p(0.5 * ev);
  } else {
    lambda = -std::log1p(-std::exp(-v));
    log_inv_lambda = -std::log(lambda);
  }
  double head = 0.0;
  for (std::size_t k = head_size_ - 1; k >= 1; --k) {
    head += head_tail_[k] * -std::expm1(-lambda * static_cast<double>(k));
  }
  // Euler-Maclaurin for k >= K of phi(x) = C h(x) m(x), m(x) = 1 - e^{-lambda x}.
  const double K = static_cast<double>(head_size_);
  const double b1 = 1.0 + hp.beta;
  const double lgK = std::log(kE + K);
  const double hK = 1.0 / (K * std::pow(lgK, b1));
  const double dhK = -hK * (1.0 / K + b1 / ((kE + K) * lgK));
  const double mK = -std::expm1(-lambda * K);
  const double dmK = lambda * std::exp(-lambda * K);
  const double phi = hp.C * hK * mK;
  const double dphi = hp.C * (dhK * mK + hK * dmK);
  const double em = 0.5 * phi - dphi / 12.0;

  const double log_K = std::log(K);
  // Below lambda x = e^{-40} the integrand is negligible; above lambda x = 40, m = 1.
  const double y_lo = std::max(log_K, log_inv_lambda - 40.0);
  const double y_hi = std::max(log_K, log_inv_lambda + std::log(40.0));
  double mid = 0.0;
  if (y_hi > y_lo) {
    mid = numerics::integrate(
        [&](double y) {
          return -std::expm1(-std::exp(y - log_inv_lambda)) / std::pow(log_e_plus_exp(y), b1);
        },
        y_lo, y_hi, tol_.quadrature_rel);
  }
  const double far = heavy_tail_integral(hp.beta, y_hi);
  return head + em + hp.C * (mid + far);
}

double AnalyticModel::slowly_varying_log(double v) const {
  if (!(v >= 0.0)) {
    throw DomainError("slowly_varying_log: v must be nonnegative");
  }
  return law_.kind() == LawKind::heavy_tail ? g_heavy(v) : g_table(v);
}

double AnalyticModel::slowly_varying(double x) const {
  if (!(x > 1.0)) {
    throw DomainError("slowly_varying: x must exceed 1");
  }
  return slowly_varying_log(std::log(x));
}

double AnalyticModel::series_pgf(double s) const {
  double total = law_.pmf(0);
  double power = 1.0;
  double prev_tail = law_.tail(0);
  for (std::uint64_t k = 1; k < 100000; ++k) {
    power *= s;
    const double t = law_.tail(k);
    total += (prev_tail - t) * power;
    prev_tail = t;
    if (power * s < 1e-18) {
      break;
    }
  }
  return total;
}

double pgf(const OffspringLaw& law, double s, double tol) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw DomainError("pgf: s must lie in [0,1]");
  }
  if (!(tol > 0.0)) {
    throw ParameterError("pgf: tol must be positive");
  }
  if (s == 1.0) {
    return 1.0;
  }
  // The terms past k add at most P(nu > k) s^(k+1).
  constexpr std::uint64_t kMaxTerms = 50'000'000;
  double total = 0.0;
  double power = 1.0;
  for (std::uint64_t k = 0; k < kMaxTerms; ++k) {
    total += law.pmf(k) * power;
    power *= s;
    if (law.tail(k) * power < tol) {
      return total;
    }
  }
  throw NumericalError("pgf: series did not reach the tolerance; s is too close to 1");
}

double AnalyticModel::pgf(double s) const {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw DomainError("pgf: s must lie in [0,1]");
  }
  if (s == 1.0) {
    return 1.0;
  }
  if (law_.kind() == LawKind::table) {
    const auto& pmf = law_.table_pmf();
    double total = 0.0;
    for (std::size_t k = pmf.size(); k-- > 0;) {
      total = total * s + pmf[k];
    }
    return total;
  }
  if (s <= 0.9) {
    return series_pgf(s);
  }
  return s + (1.0 - s) * slowly_varying_log(-std::log1p(-s));
}

double AnalyticModel::advance_log(double v0, double t) const {
  if (!(t >= 0.0)) {
    throw DomainError("advance_log: t must be nonnegative");
  }
  if (!(v0 >= 0.0)) {
    throw DomainError("advance_log: v0 must be nonnegative");
  }
  if (std::isinf(v0)) {
    return v0;
  }
  numerics::OdeOptions options;
  options.rel_tol = tol_.ode_rel;
  options.abs_tol = tol_.ode_abs;
  return numerics::integrate_autonomous([this](double v) { return slowly_varying_log(v); }, v0, t,
                                        options);
}

double AnalyticModel::solve_backward(double s, double t) const {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw DomainError("solve_backward: s must lie in [0,1]");
  }
  if (!(t >= 0.0)) {
    throw DomainError("solve_backward: t must be nonnegative");
  }
  if (s == 1.0) {
    return 1.0;
  }
  if (t == 0.0) {
    return s;
  }
  const double v = advance_log(-std::log1p(-s), t);
  return -std::expm1(-v);
}

double AnalyticModel::log_survival_ode(double t) const { return advance_log(0.0, t); }

double AnalyticModel::survival(double t) const { return std::exp(-log_survival_ode(t)); }

double AnalyticModel::rho_between(double x0, double x1) const {
  if (x1 == x0) {
    return 0.0;
  }
  return numerics::integrate([this](double w) { return 1.0 / slowly_varying_log(w); }, x0, x1,
                             tol_.quadrature_rel);
}

double AnalyticModel::rho(double x) const {
  if (!(x >= 0.0) || std::isinf(x)) {
    throw DomainError("rho: x must be finite and nonnegative");
  }
  return rho_between(0.0, x);
}

double AnalyticModel::pi_integral(double s) const {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw DomainError("pi_integral: s must lie in [0,1)");
  }
  if (s == 1.0) {
    throw DomainError("pi_integral: pi(1) diverges for a critical law");
  }
  constexpr double kSwitch = 0.9;
  auto direct = [this](double upper) {
    return numerics::integrate([this](double v) { return 1.0 / (pgf(v) - v); }, 0.0, upper,
                               tol_.quadrature_rel);
  };
  if (s <= kSwitch) {
    return direct(s);
  }
  return direct(kSwitch) + rho_between(-std::log1p(-kSwitch), -std::log1p(-s));
}

double AnalyticModel::log_survival(double t) const {
  if (!(t >= 0.0) || std::isinf(t)) {
    throw DomainError("log_survival: t must be finite and nonnegative");
  }
  if (t == 0.0) {
    return 0.0;
  }
  // rho is increasing and unbounded: double the bracket until it covers t.
  double lo = 0.0;
  double rho_lo = 0.0;
  double hi = 1.0;
  double rho_hi = rho_between(0.0, hi);
  int doublings = 0;
  while (rho_hi < t) {
    if (++doublings > 200) {
      std::ostringstream msg;
      msg << "log_survival: could not bracket rho(q) = " << t;
      throw NumericalError(msg.str());
    }
    lo = hi;
    rho_lo = rho_hi;
    hi *= 2.0;
    rho_hi = rho_lo + rho_between(lo, hi);
  }
  double x = lo + (t - rho_lo) * slowly_varying_log(lo);
  for (int iter = 0; iter < 100; ++iter) {
    if (!(x > lo && x < hi)) {
      x = 0.5 * (lo + hi);
    }
    const double r = rho_lo + rho_between(lo, x);
    if (r < t) {
      lo = x;
      rho_lo = r;
    } else {
      hi = x;
      rho_hi = r;
    }
    const double step = (t - r) * slowly_varying_log(x);
    const double next = x + step;
    if (std::abs(step) <= 1e-13 * std::max(1.0, x) || hi - lo <= 1e-14 * std::max(1.0, x)) {
      return next;
    }
    x = next;
  }
  throw NumericalError("log_survival: Newton iteration did not converge");
}

double AnalyticModel::size_scale(double t) const {
  if (!(t > 0.0)) {
    throw DomainError("size_scale: t must be positive");
  }
  const double gq = slowly_varying_log(log_survival(t));
  if (gq >= 1.0) {
    throw DomainError("size_scale: g(q(t)) >= 1, t is in the pre-asymptotic regime");
  }
  return log_survival(1.0 / gq);
}

double AnalyticModel::delta(double s, double t) const {
  if (!(s >= 0.0 && s < 1.0)) {
    throw DomainError("delta: s must lie in [0,1)");
  }
  const double qt = log_survival(t);
  // rho(q(t)) = t, so the difference is a single integral.
  return rho_between(qt, qt - std::log1p(-s));
}

void AnalyticModel::check_survival(double log_q, const char* what) const {
  if (log_q > -std::log(tol_.survival_floor)) {
    std::ostringstream msg;
    msg << what << ": Q(t) = exp(-" << log_q << ") is below the floor " << tol_.survival_floor
        << "; compare against the limit laws instead";
    throw NumericalError(msg.str());
  }
}

double AnalyticModel::reduced_gf(double s, double u, double t) const {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw DomainError("reduced_gf: s must lie in [0,1]");
  }
  if (!(u >= 0.0 && u <= t)) {
    throw DomainError("reduced_gf: need 0 <= u <= t");
  }
  const double log_qt = log_survival_ode(t);
  check_survival(log_qt, "reduced_gf");
  if (s == 1.0) {
    return 1.0;
  }
  // 1 - F(1 - Q(t-u)(1-s), u) = exp(-v) with v the flow from q(t-u) - ln(1-s).
  const double start = log_survival_ode(t - u) - std::log1p(-s);
  const double v = advance_log(start, u);
  return -std::expm1(log_qt - v);
}

double AnalyticModel::reduced_prob_one(double u, double t) const {
  if (!(u >= 0.0 && u <= t)) {
    throw DomainError("reduced_prob_one: need 0 <= u <= t");
  }
  const double log_qt = log_survival_ode(t);
  check_survival(log_qt, "reduced_prob_one");
  if (u == 0.0) {
    return 1.0;
  }
  return slowly_varying_log(log_qt) / slowly_varying_log(log_survival_ode(t - u));
}

double AnalyticModel::mrca_cdf(double t, double x) const {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError("mrca_cdf: x must lie in [0,1]");
  }
  if (!(t > 0.0)) {
    throw DomainError("mrca_cdf: t must be positive");
  }
  return reduced_prob_one(t * (1.0 - x), t);
}

double LimitLaws::mrca_cdf(double x) const {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError("mrca_cdf: x must lie in [0,1]");
  }
  return std::pow(x, exponent());
}

double LimitLaws::phi_density(double x) const {
  if (!(x > 0.0 && x <= 1.0)) {
    throw DomainError("phi_density: x must lie in (0,1]");
  }
  return exponent() * std::pow(x, -1.0 / (1.0 + beta));
}

double LimitLaws::size_cdf(double x) const {
  if (!(x >= 0.0)) {
    throw DomainError("size_cdf: x must be nonnegative");
  }
  return -std::expm1(-std::pow(x, beta + 1.0));
}

double LimitLaws::marginal_one(double x, double y) const {
  if (!(x >= 0.0 && x <= y && y < 1.0)) {
    throw DomainError("marginal_one: need 0 <= x <= y < 1");
  }
  return std::pow((1.0 - y) / (1.0 - x), exponent());
}

LimitLaws limit_cdfs(double beta) {
  if (!(beta > 0.0) || std::isinf(beta)) {
    throw ParameterError("limit_cdfs: beta must be positive and finite");
  }
  return LimitLaws{beta};
}

LimitGf LimitGf::alpha_mode(double a) {
  if (!(a > 0.0 && a <= 1.0)) {
    throw ParameterError("alpha mode needs alpha in (0,1]");
  }
  return {Mode::alpha, a};
}

double F_closed(const LimitGf& mode, double s, double t) {
  if (!(s >= 0.0 && s < 1.0)) {
    throw DomainError("F_closed: s must lie in [0,1)");
  }
  if (!(t >= 0.0)) {
    throw DomainError("F_closed: t must be nonnegative");
  }
  const double et = std::exp(-t);
  if (mode.mode == LimitGf::Mode::zero) {
    return -std::expm1(et * std::log1p(-s));
  }
  if (mode.alpha == 1.0) {
    return s * et / (1.0 - (1.0 - et) * s);
  }
  const double a = mode.alpha;
  // (1-s)^{-a} - 1 computed without cancellation for small a.
  const double w = std::expm1(-a * std::log1p(-s));
  return -std::expm1(-std::log1p(et * w) / a);
}

}  // namespace rbp
