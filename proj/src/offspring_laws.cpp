#include "rbp/offspring_laws.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "rbp/error.hpp"
#include "rbp/numerics.hpp"

namespace rbp {

namespace {

constexpr double kE = std::numbers::e;

double heavy_h(double beta, double x) { return 1.0 / (x * std::pow(std::log(kE + x), 1.0 + beta)); }

double heavy_h_prime(double beta, double x) {
  const double lg = std::log(kE + x);
  return -heavy_h(beta, x) * (1.0 / x + (1.0 + beta) / ((kE + x) * lg));
}

// Smallest k in (lo, hi] with tail(k) < u, given tail(lo) >= u > tail(hi).
template <class Tail>
std::uint64_t bisect_tail(const Tail& tail, double u, std::uint64_t lo, std::uint64_t hi) {
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (tail(mid) < u) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

template <class Tail>
std::uint64_t search_tail(const Tail& tail, double u, std::uint64_t first) {
  std::uint64_t lo = first - 1;  // tail(first - 1) >= u by the caller's contract
  std::uint64_t hi = first;
  while (tail(hi) >= u) {
    lo = hi;
    if (hi > (std::numeric_limits<std::uint64_t>::max() >> 2)) {
      return hi;
    }
    hi *= 2;
  }
  return bisect_tail(tail, u, lo, hi);
}

}  // namespace

std::string to_string(LawKind kind) {
  switch (kind) {
    case LawKind::heavy_tail:
      return "heavy_tail";
    case LawKind::alpha_limit:
      return "alpha_limit";
    case LawKind::zero_limit:
      return "zero_limit";
    case LawKind::sibuya:
      return "sibuya";
    case LawKind::table:
      return "table";
  }
  return "unknown";
}

double heavy_tail_integral(double beta, double log_x) {
  // Substituting w = ln(e + x) gives (1 + 1/(e^(w-1) - 1)) w^(-1-beta) dw.
  const double w0 = log_x > 1.0 ? log_x + std::log1p(kE * std::exp(-log_x))
                                : std::log(kE + std::exp(log_x));
  const double main = std::pow(w0, -beta) / beta;
  if (w0 > 45.0) {
    return main;
  }
  const double correction = numerics::integrate(
      [beta](double w) { return std::pow(w, -1.0 - beta) / std::expm1(w - 1.0); }, w0,
      w0 + 60.0, 1e-13);
  return main + correction;
}

SeriesValue heavy_tail_series(double beta, double tol) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw ParameterError("heavy_tail_series: beta must be positive and finite");
  }
  if (!(tol > 0.0)) {
    throw ParameterError("heavy_tail_series: tol must be positive");
  }
  // Euler-Maclaurin with two correction terms; the remainder is bounded by
  // |h'''(K)|/720 < h(K)/K^3.
  std::uint64_t K = 1024;
  while (heavy_h(beta, static_cast<double>(K)) / std::pow(static_cast<double>(K), 3) > 1e-2 * tol &&
         K < (std::uint64_t{1} << 24)) {
    K *= 2;
  }
  double head = 0.0;
  for (std::uint64_t k = K - 1; k >= 1; --k) {
    head += heavy_h(beta, static_cast<double>(k));
  }
  const double Kd = static_cast<double>(K);
  const double remainder = heavy_tail_integral(beta, std::log(Kd)) + 0.5 * heavy_h(beta, Kd) -
                           heavy_h_prime(beta, Kd) / 12.0;
  const double bound = heavy_h(beta, Kd) / (Kd * Kd * Kd) + 1e-15 * (head + remainder);
  return {head + remainder, bound};
}

double tail_alpha(double alpha, std::uint64_t k) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ParameterError("tail_alpha: alpha must lie in [0,1]");
  }
  if (k <= 1) {
    return 1.0;
  }
  if (alpha == 1.0) {
    return 0.0;
  }
  const double kd = static_cast<double>(k);
  if (alpha == 0.0) {
    return 1.0 / kd;
  }
  return std::exp(numerics::log_gamma(kd - alpha) - numerics::log_gamma(1.0 - alpha) -
                  numerics::log_gamma(kd + 1.0));
}

double pmf_alpha(double alpha, std::uint64_t k) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ParameterError("pmf_alpha: alpha must lie in [0,1]");
  }
  if (k < 2) {
    throw DomainError("pmf_alpha: support starts at k = 2");
  }
  const double kd = static_cast<double>(k);
  if (alpha == 1.0) {
    return k == 2 ? 1.0 : 0.0;
  }
  if (alpha == 0.0) {
    return 1.0 / (kd * (kd - 1.0));
  }
  return (1.0 + alpha) * std::exp(numerics::log_gamma(kd - 1.0 - alpha) -
                                  numerics::log_gamma(1.0 - alpha) -
                                  numerics::log_gamma(kd + 1.0));
}

double sibuya_pmf(double gamma, std::uint64_t k) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ParameterError("sibuya_pmf: gamma must lie in (0,1]");
  }
  if (k < 1) {
    throw DomainError("sibuya_pmf: support starts at k = 1");
  }
  if (gamma == 1.0) {
    return k == 1 ? 1.0 : 0.0;
  }
  if (k <= 64) {
    double p = gamma;
    for (std::uint64_t j = 1; j < k; ++j) {
      p *= (static_cast<double>(j) - gamma) / static_cast<double>(j + 1);
    }
    return p;
  }
  const double kd = static_cast<double>(k);
  return gamma * std::exp(numerics::log_gamma(kd - gamma) - numerics::log_gamma(1.0 - gamma) -
                          numerics::log_gamma(kd + 1.0));
}

double sibuya_tail(double gamma, std::uint64_t k) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ParameterError("sibuya_tail: gamma must lie in (0,1]");
  }
  if (k == 0) {
    return 1.0;
  }
  if (gamma == 1.0) {
    return 0.0;
  }
  const double kd = static_cast<double>(k);
  // prod_{j<=k} (1 - gamma/j)
  return std::exp(numerics::log_gamma(kd + 1.0 - gamma) - numerics::log_gamma(1.0 - gamma) -
                  numerics::log_gamma(kd + 1.0));
}

OffspringLaw OffspringLaw::heavy_tail(double beta, double tol, double tail0) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw ParameterError("heavy_tail: beta must be positive and finite");
  }
  if (!(tol > 0.0 && tol <= 1e-6)) {
    throw ParameterError("heavy_tail: tol must lie in (0, 1e-6]");
  }
  if (!(tail0 > 0.0 && tail0 < 1.0)) {
    throw ParameterError("heavy_tail: P(nu > 0) must lie in (0,1)");
  }
  const auto series = heavy_tail_series(beta, tol);
  OffspringLaw law;
  law.kind_ = LawKind::heavy_tail;
  law.heavy_.beta = beta;
  law.heavy_.tail0 = tail0;
  law.heavy_.series_sum = series.value;
  law.heavy_.series_error = series.error_bound;
  law.heavy_.C = (1.0 - tail0) / series.value;
  if (law.tail(1) > tail0) {
    std::ostringstream msg;
    msg << "heavy_tail: P(nu > 1) = " << law.tail(1) << " exceeds P(nu > 0) = " << tail0
        << " for beta = " << beta;
    throw ParameterError(msg.str());
  }
  return law;
}

OffspringLaw OffspringLaw::alpha_limit(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ParameterError("alpha_limit: alpha must lie in [0,1]");
  }
  if (alpha == 0.0) {
    return zero_limit();
  }
  OffspringLaw law;
  law.kind_ = LawKind::alpha_limit;
  law.param_ = alpha;
  return law;
}

OffspringLaw OffspringLaw::zero_limit() {
  OffspringLaw law;
  law.kind_ = LawKind::zero_limit;
  law.param_ = 0.0;
  return law;
}

OffspringLaw OffspringLaw::sibuya(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ParameterError("sibuya: gamma must lie in (0,1]");
  }
  OffspringLaw law;
  law.kind_ = LawKind::sibuya;
  law.param_ = gamma;
  return law;
}

OffspringLaw OffspringLaw::table(std::vector<double> pmf) {
  if (pmf.empty()) {
    throw ParameterError("table law needs at least one probability");
  }
  double total = 0.0;
  for (double p : pmf) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ParameterError("table law probabilities must be finite and nonnegative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-10) {
    throw ParameterError("table law probabilities must sum to 1");
  }
  while (pmf.size() > 1 && pmf.back() == 0.0) {
    pmf.pop_back();
  }
  OffspringLaw law;
  law.kind_ = LawKind::table;
  law.pmf_ = std::move(pmf);
  law.tail_.assign(law.pmf_.size(), 0.0);
  double suffix = 0.0;
  for (std::size_t k = law.pmf_.size(); k-- > 0;) {
    law.tail_[k] = suffix;
    suffix += law.pmf_[k];
  }
  return law;
}

OffspringLaw OffspringLaw::point_mass(std::uint64_t k) {
  std::vector<double> pmf(k + 1, 0.0);
  pmf[k] = 1.0;
  return table(std::move(pmf));
}

OffspringLaw OffspringLaw::binary() { return table({0.5, 0.0, 0.5}); }

double OffspringLaw::tail(std::uint64_t k) const {
  switch (kind_) {
    case LawKind::heavy_tail: {
      if (k == 0) {
        return heavy_.tail0;
      }
      const double kd = static_cast<double>(k);
      return heavy_.C / (kd * std::pow(std::log(kE + kd), 1.0 + heavy_.beta));
    }
    case LawKind::alpha_limit:
    case LawKind::zero_limit:
      return tail_alpha(param_, k);
    case LawKind::sibuya:
      return sibuya_tail(param_, k);
    case LawKind::table:
      return k < tail_.size() ? tail_[k] : 0.0;
  }
  return 0.0;
}

double OffspringLaw::pmf(std::uint64_t k) const {
  switch (kind_) {
    case LawKind::heavy_tail:
      return k == 0 ? 1.0 - heavy_.tail0 : tail(k - 1) - tail(k);
    case LawKind::alpha_limit:
    case LawKind::zero_limit:
      return k < 2 ? 0.0 : pmf_alpha(param_, k);
    case LawKind::sibuya:
      return k < 1 ? 0.0 : sibuya_pmf(param_, k);
    case LawKind::table:
      return k < pmf_.size() ? pmf_[k] : 0.0;
  }
  return 0.0;
}

double OffspringLaw::mean() const {
  switch (kind_) {
    case LawKind::heavy_tail:
      return 1.0;
    case LawKind::alpha_limit:
      return 1.0 + 1.0 / param_;
    case LawKind::zero_limit:
      return std::numeric_limits<double>::infinity();
    case LawKind::sibuya:
      return param_ == 1.0 ? 1.0 : std::numeric_limits<double>::infinity();
    case LawKind::table: {
      double m = 0.0;
      for (std::size_t k = 0; k < pmf_.size(); ++k) {
        m += static_cast<double>(k) * pmf_[k];
      }
      return m;
    }
  }
  return 0.0;
}

std::uint64_t OffspringLaw::support_max() const {
  if (kind_ == LawKind::table) {
    return pmf_.size() - 1;
  }
  if (kind_ == LawKind::alpha_limit && param_ == 1.0) {
    return 2;
  }
  if (kind_ == LawKind::sibuya && param_ == 1.0) {
    return 1;
  }
  return std::numeric_limits<std::uint64_t>::max();
}

std::uint64_t OffspringLaw::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) {
    throw DomainError("quantile: u must lie in (0,1)");
  }
  switch (kind_) {
    case LawKind::heavy_tail: {
      if (heavy_.tail0 < u) {
        return 0;
      }
      // Solve ln x + (1+beta) ln ln(e+x) = ln(C/u) for y = ln x.
      const double target = std::log(heavy_.C / u);
      const double b1 = 1.0 + heavy_.beta;
      auto lg = [](double y) {
        return y > 1.0 ? y + std::log1p(kE * std::exp(-y)) : std::log(kE + std::exp(y));
      };
      double y = std::max(0.0, target);
      for (int iter = 0; iter < 60; ++iter) {
        const double l = lg(y);
        const double value = y + b1 * std::log(l) - target;
        const double slope = 1.0 + b1 / (l * (1.0 + kE * std::exp(-y)));
        const double next = std::max(0.0, y - value / slope);
        if (std::abs(next - y) < 1e-12 * std::max(1.0, y)) {
          y = next;
          break;
        }
        y = next;
      }
      const double x = std::exp(y);
      std::uint64_t k =
          x >= 1.8e19 ? std::numeric_limits<std::uint64_t>::max() / 2
                      : std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::floor(x)));
      while (tail(k) >= u) {
        ++k;
      }
      while (k > 1 && tail(k - 1) < u) {
        --k;
      }
      return k;
    }
    case LawKind::zero_limit: {
      const double inv = 1.0 / u;
      std::uint64_t k = inv >= 1.8e19 ? std::numeric_limits<std::uint64_t>::max() / 2
                                      : static_cast<std::uint64_t>(std::floor(inv)) + 1;
      k = std::max<std::uint64_t>(k, 2);
      while (1.0 / static_cast<double>(k) >= u) {
        ++k;
      }
      while (k > 2 && 1.0 / static_cast<double>(k - 1) < u) {
        --k;
      }
      return k;
    }
    case LawKind::alpha_limit: {
      if (param_ == 1.0) {
        return 2;
      }
      const double a = param_;
      return search_tail([a](std::uint64_t k) { return tail_alpha(a, k); }, u, 2);
    }
    case LawKind::sibuya: {
      if (param_ == 1.0) {
        return 1;
      }
      const double g = param_;
      return search_tail([g](std::uint64_t k) { return sibuya_tail(g, k); }, u, 1);
    }
    case LawKind::table: {
      const auto it = std::partition_point(tail_.begin(), tail_.end(),
                                           [u](double t) { return t >= u; });
      return static_cast<std::uint64_t>(it - tail_.begin());
    }
  }
  return 0;
}

std::uint64_t OffspringLaw::sample(Stream& rng) const {
  if (kind_ == LawKind::table && pmf_.size() == 1) {
    return 0;
  }
  return quantile(rng.uniform());
}

std::string OffspringLaw::describe() const {
  std::ostringstream out;
  out << to_string(kind_);
  switch (kind_) {
    case LawKind::heavy_tail:
      out << "(beta=" << heavy_.beta << ", C=" << heavy_.C << ", tail0=" << heavy_.tail0 << ")";
      break;
    case LawKind::alpha_limit:
      out << "(alpha=" << param_ << ")";
      break;
    case LawKind::sibuya:
      out << "(gamma=" << param_ << ")";
      break;
    case LawKind::table:
      out << "(";
      for (std::size_t k = 0; k < pmf_.size(); ++k) {
        out << (k ? "," : "") << pmf_[k];
      }
      out << ")";
      break;
    case LawKind::zero_limit:
      break;
  }
  return out.str();
}

}  // namespace rbp
