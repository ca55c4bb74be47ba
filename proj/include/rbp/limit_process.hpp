#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rbp/offspring_laws.hpp"
#include "rbp/rng.hpp"

namespace rbp {

/// Which limit genealogy: Z_alpha(-log(1-x)) for alpha in (0,1], or
/// Z_0(-beta/(1+beta) log(1-x)) for beta > 0.
struct LimitMode {
  enum class Kind { alpha, zero };
  Kind kind = Kind::zero;
  double param = 1.0;  // alpha or beta

  static LimitMode alpha(double a);
  static LimitMode zero(double beta);

  /// Time-change exponent: 1 in alpha mode, beta/(1+beta) in zero mode.
  double exponent() const;
  /// Reproduction law at splits: nu_alpha or nu_0.
  OffspringLaw offspring() const;
};

struct LimitConfig {
  LimitMode mode = LimitMode::zero(1.0);
  /// Smallest tracked remaining interval; positions >= 1 - resolution are never queried.
  double resolution = 1e-3;
  /// Splits at or beyond this position are not expanded. Defaults to 1 - resolution.
  double horizon = -1.0;
  std::uint64_t node_cap = std::uint64_t{1} << 20;

  double effective_horizon() const { return horizon < 0.0 ? 1.0 - resolution : horizon; }
  void validate() const;
};

struct LimitNode {
  std::int64_t parent;
  double birth;
  double split;
  /// Number of daughters; 0 for nodes that were not expanded.
  std::uint64_t children;
  bool expanded;
};

/// Genealogical tree of the limit process on [0,1). Nodes are expanded in
/// order of split position, so when the node cap is hit the counts are
/// exact on [0, exact_until) and lower bounds after it.
struct LimitTree {
  std::vector<LimitNode> nodes;
  double horizon = 0.0;
  double resolution = 0.0;
  bool truncated = false;
  double exact_until = 1.0;
  /// Daughters that were drawn but not materialised because of the cap.
  std::uint64_t pending_children = 0;
};

/// Inverse CDF of tau: u^{(1+beta)/beta} in zero mode, u in alpha mode.
double tau_quantile(const LimitMode& mode, double u);
/// tau with density phi_beta (zero mode) or uniform (alpha mode).
double sample_tau(const LimitMode& mode, Stream& rng);

LimitTree sample_limit_tree(const LimitConfig& config, Stream& rng);

/// R(x) for sorted xs in [0, horizon]. Domain error for x beyond the horizon
/// or the resolution guard.
std::vector<std::uint64_t> trajectory_at(const LimitTree& tree, std::span<const double> xs);

/// Exact marginal R(x) without building a tree.
class MarginalSampler {
 public:
  MarginalSampler(const LimitMode& mode, double x, std::size_t series_cap = 4096);

  /// Throws NumericalError when the draw does not fit in 64 bits.
  std::uint64_t operator()(Stream& rng) const;
  /// ln R(x); usable where R(x) overflows an integer (alpha near 0, x near 1).
  double sample_log(Stream& rng) const;
  /// P(R(x) = k) from the closed-form generating function.
  double pmf(std::uint64_t k) const;
  /// P(R(x) > k) for real k >= 0.
  double tail(double k) const;

 private:
  LimitMode mode_;
  double x_;
  double gamma_ = 1.0;        // zero mode: Sibuya parameter
  double success_ = 1.0;      // alpha = 1: geometric success probability
  std::vector<double> cdf_;   // alpha in (0,1): cumulative pmf up to the cap
  std::vector<double> pmf_;

  double log_quantile(double u) const;
  double tail_inverted(double k) const;
};

std::uint64_t sample_marginal(const LimitMode& mode, double x, Stream& rng);

}  // namespace rbp
