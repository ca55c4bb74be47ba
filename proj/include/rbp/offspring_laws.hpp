#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rbp/rng.hpp"

namespace rbp {

enum class LawKind { heavy_tail, alpha_limit, zero_limit, sibuya, table };

std::string to_string(LawKind kind);

/// Parameters of the critical heavy-tailed family
///   P(nu > k) = C / (k * ln(e + k)^(1 + beta)),  k >= 1,
///   P(nu > 0) = tail0,
/// with C fixed by sum_{k>=1} P(nu > k) = 1 - tail0, which forces E[nu] = 1.
struct HeavyTailParams {
  double beta = 1.0;
  double C = 0.0;
  double tail0 = 0.5;
  double series_sum = 0.0;    // sum_{k>=1} 1/(k ln(e+k)^(1+beta))
  double series_error = 0.0;  // bound on |series_sum - exact|
};

/// Sum of 1/(x ln(e+x)^(1+beta)) over x = 1, 2, ... to absolute accuracy tol.
struct SeriesValue {
  double value;
  double error_bound;
};
SeriesValue heavy_tail_series(double beta, double tol);

/// Integral of 1/(x ln(e+x)^(1+beta)) over [e^log_x, inf).
double heavy_tail_integral(double beta, double log_x);

/// Limit reproduction law nu_alpha for alpha in (0,1] and nu_0 for alpha = 0.
/// Domain error for k < 2.
double pmf_alpha(double alpha, std::uint64_t k);
/// P(nu_alpha > k) for any k >= 0.
double tail_alpha(double alpha, std::uint64_t k);

/// Sibuya(gamma): generating function 1 - (1-s)^gamma on {1,2,...}.
double sibuya_pmf(double gamma, std::uint64_t k);
double sibuya_tail(double gamma, std::uint64_t k);

/// An offspring distribution on {0,1,2,...}. Immutable and shareable; every
/// sampling call uses the caller's stream.
class OffspringLaw {
 public:
  static OffspringLaw heavy_tail(double beta, double tol = 1e-10, double tail0 = 0.5);
  static OffspringLaw alpha_limit(double alpha);
  static OffspringLaw zero_limit();
  static OffspringLaw sibuya(double gamma);
  static OffspringLaw table(std::vector<double> pmf);
  static OffspringLaw point_mass(std::uint64_t k);
  /// P(nu=0) = P(nu=2) = 1/2.
  static OffspringLaw binary();

  LawKind kind() const { return kind_; }
  double pmf(std::uint64_t k) const;
  double tail(std::uint64_t k) const;
  /// +inf for the infinite-mean laws.
  double mean() const;
  /// Smallest k with tail(k) < U for U uniform on (0,1).
  std::uint64_t sample(Stream& rng) const;
  /// Inverse transform for a given U; exposed for tie-breaking tests.
  std::uint64_t quantile(double u) const;

  const HeavyTailParams& heavy() const { return heavy_; }
  double alpha() const { return param_; }
  double gamma() const { return param_; }
  const std::vector<double>& table_pmf() const { return pmf_; }
  /// Largest k with positive mass for table laws.
  std::uint64_t support_max() const;

  std::string describe() const;

 private:
  OffspringLaw() = default;

  LawKind kind_ = LawKind::table;
  HeavyTailParams heavy_{};
  double param_ = 0.0;
  std::vector<double> pmf_;
  std::vector<double> tail_;  // tail_[k] = sum_{i>k} pmf_[i]
};

/// Convenience alias of OffspringLaw::heavy_tail.
inline OffspringLaw build_heavy_tail(double beta, double tol = 1e-10) {
  return OffspringLaw::heavy_tail(beta, tol);
}

}  // namespace rbp
