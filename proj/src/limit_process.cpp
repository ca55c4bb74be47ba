#include "rbp/limit_process.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <queue>
#include <sstream>

#include "rbp/error.hpp"
#include "rbp/numerics.hpp"

namespace rbp {

LimitMode LimitMode::alpha(double a) {
  if (!(a > 0.0 && a <= 1.0)) {
    throw ParameterError("alpha mode needs alpha in (0,1]");
  }
  return {Kind::alpha, a};
}

LimitMode LimitMode::zero(double beta) {
  if (!(beta > 0.0) || std::isinf(beta)) {
    throw ParameterError("zero mode needs a positive finite beta");
  }
  return {Kind::zero, beta};
}

double LimitMode::exponent() const {
  return kind == Kind::alpha ? 1.0 : param / (1.0 + param);
}

OffspringLaw LimitMode::offspring() const {
  return kind == Kind::alpha ? OffspringLaw::alpha_limit(param) : OffspringLaw::zero_limit();
}

void LimitConfig::validate() const {
  if (!(resolution > 0.0 && resolution < 0.5)) {
    throw ParameterError("LimitConfig: resolution must lie in (0, 0.5)");
  }
  const double h = effective_horizon();
  if (!(h > 0.0 && h <= 1.0 - resolution)) {
    throw ParameterError("LimitConfig: horizon must lie in (0, 1 - resolution]");
  }
  if (node_cap == 0) {
    throw ParameterError("LimitConfig: node cap must be positive");
  }
}

double tau_quantile(const LimitMode& mode, double u) {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw DomainError("tau_quantile: u must lie in [0,1]");
  }
  return mode.kind == LimitMode::Kind::alpha ? u : std::pow(u, 1.0 / mode.exponent());
}

double sample_tau(const LimitMode& mode, Stream& rng) { return tau_quantile(mode, rng.uniform()); }

LimitTree sample_limit_tree(const LimitConfig& config, Stream& rng) {
  config.validate();
  const OffspringLaw law = config.mode.offspring();
  LimitTree tree;
  tree.horizon = config.effective_horizon();
  tree.resolution = config.resolution;

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
  tree.nodes.push_back({-1, 0.0, 1.0 - sample_tau(config.mode, rng), 0, false});
  frontier.emplace(tree.nodes[0].split, 0);
  while (!frontier.empty()) {
    const auto [split, index] = frontier.top();
    frontier.pop();
    if (split >= tree.horizon) {
      continue;
    }
    const std::uint64_t children = law.sample(rng);
    tree.nodes[index].children = children;
    tree.nodes[index].expanded = true;
    if (children > config.node_cap - std::min<std::uint64_t>(config.node_cap, tree.nodes.size())) {
      tree.truncated = true;
      tree.exact_until = split;
      tree.pending_children = children;
      break;
    }
    const double remaining = 1.0 - split;
    for (std::uint64_t c = 0; c < children; ++c) {
      const double child_split = 1.0 - remaining * sample_tau(config.mode, rng);
      tree.nodes.push_back(
          {static_cast<std::int64_t>(index), split, child_split, 0, false});
      frontier.emplace(child_split, tree.nodes.size() - 1);
    }
  }
  return tree;
}

std::vector<std::uint64_t> trajectory_at(const LimitTree& tree, std::span<const double> xs) {
  for (double x : xs) {
    if (!(x >= 0.0 && x <= tree.horizon && x < 1.0 - tree.resolution)) {
      std::ostringstream msg;
      msg << "trajectory_at: x = " << x << " is outside [0, " << tree.horizon
          << "] or beyond the resolution guard 1 - " << tree.resolution;
      throw DomainError(msg.str());
    }
  }
  std::vector<double> births;
  std::vector<double> ends;
  births.reserve(tree.nodes.size());
  for (const auto& node : tree.nodes) {
    births.push_back(node.birth);
    if (node.expanded) {
      ends.push_back(node.split);
    }
  }
  std::sort(births.begin(), births.end());
  std::sort(ends.begin(), ends.end());
  std::vector<std::uint64_t> counts;
  counts.reserve(xs.size());
  for (double x : xs) {
    const auto born = static_cast<std::uint64_t>(
        std::upper_bound(births.begin(), births.end(), x) - births.begin());
    const auto ended = static_cast<std::uint64_t>(
        std::upper_bound(ends.begin(), ends.end(), x) - ends.begin());
    std::uint64_t r = born - ended;
    if (tree.truncated && x >= tree.exact_until) {
      r += tree.pending_children;
    }
    counts.push_back(r);
  }
  return counts;
}

MarginalSampler::MarginalSampler(const LimitMode& mode, double x, std::size_t series_cap)
    : mode_(mode), x_(x) {
  if (!(x >= 0.0 && x < 1.0)) {
    throw DomainError("MarginalSampler: x must lie in [0,1)");
  }
  if (mode.kind == LimitMode::Kind::zero) {
    gamma_ = std::pow(1.0 - x, mode.exponent());
    return;
  }
  if (mode.param == 1.0) {
    success_ = 1.0 - x;
    return;
  }
  // Coefficients of 1 - F_alpha(s,t) = B(s)^{-1/alpha} with
  // B(s) = 1 + e^{-t}((1-s)^{-alpha} - 1), by the power-series recurrence
  // P_k = (1/k) sum_{j=1}^{k} ((m+1) j - k) B_j P_{k-j}, m = -1/alpha.
  const double a = mode.param;
  const double m = -1.0 / a;
  const double et = 1.0 - x;
  const std::size_t K = std::max<std::size_t>(series_cap, 2);
  std::vector<double> B(K + 1, 0.0);
  double coeff = 1.0;
  for (std::size_t j = 1; j <= K; ++j) {
    coeff *= (a + static_cast<double>(j) - 1.0) / static_cast<double>(j);
    B[j] = et * coeff;
  }
  std::vector<double> P(K + 1, 0.0);
  P[0] = 1.0;
  pmf_.assign(K + 1, 0.0);
  cdf_.assign(K + 1, 0.0);
  for (std::size_t k = 1; k <= K; ++k) {
    double sum = 0.0;
    const double kd = static_cast<double>(k);
    for (std::size_t j = 1; j <= k; ++j) {
      sum += ((m + 1.0) * static_cast<double>(j) - kd) * B[j] * P[k - j];
    }
    P[k] = sum / kd;
    pmf_[k] = std::max(0.0, -P[k]);
    cdf_[k] = cdf_[k - 1] + pmf_[k];
  }
}

double MarginalSampler::pmf(std::uint64_t k) const {
  if (k == 0) {
    return 0.0;
  }
  if (mode_.kind == LimitMode::Kind::zero) {
    return sibuya_pmf(gamma_, k);
  }
  if (mode_.param == 1.0) {
    return success_ * std::pow(1.0 - success_, static_cast<double>(k - 1));
  }
  if (k < pmf_.size()) {
    return pmf_[k];
  }
  const double kd = static_cast<double>(k);
  return tail(kd - 1.0) - tail(kd);
}

// Beyond the table, P(R > k) comes from sum_k P(R > k) s^k =
// (p + (1-p)(1-s)^alpha)^{-1/alpha}, p = 1 - x, inverted as a Laplace
// transform in lambda = -ln s by the fixed Talbot contour.
double MarginalSampler::tail_inverted(double k) const {
  using Complex = std::complex<double>;
  const double a = mode_.param;
  const double p = 1.0 - x_;
  const auto transform = [&](Complex lambda) {
    const Complex w = std::abs(lambda) < 1e-4
                          ? lambda * (1.0 - lambda * (0.5 - lambda / 6.0))
                          : 1.0 - std::exp(-lambda);
    return std::pow(p + (1.0 - p) * std::pow(w, a), -1.0 / a);
  };
  constexpr int kTerms = 32;
  const double r = 2.0 * kTerms / (5.0 * k);
  double sum = 0.5 * std::exp(r * k) * transform(Complex(r, 0.0)).real();
  for (int j = 1; j < kTerms; ++j) {
    const double theta = j * M_PI / kTerms;
    const double cot = 1.0 / std::tan(theta);
    const Complex s = r * theta * Complex(cot, 1.0);
    const double sigma = theta + (theta * cot - 1.0) * cot;
    sum += (std::exp(k * s) * transform(s) * Complex(1.0, sigma)).real();
  }
  return std::clamp(r / kTerms * sum, 0.0, 1.0);
}

double MarginalSampler::tail(double k) const {
  if (k < 1.0) {
    return 1.0;
  }
  if (mode_.kind == LimitMode::Kind::zero) {
    return k < 1.8e19 ? sibuya_tail(gamma_, static_cast<std::uint64_t>(k))
                      : std::exp(numerics::log_gamma(std::floor(k) + 1.0 - gamma_) -
                                 numerics::log_gamma(1.0 - gamma_) -
                                 numerics::log_gamma(std::floor(k) + 1.0));
  }
  if (mode_.param == 1.0) {
    return std::pow(1.0 - success_, std::floor(k));
  }
  const double kf = std::floor(k);
  if (kf < static_cast<double>(cdf_.size())) {
    return std::max(0.0, 1.0 - cdf_[static_cast<std::size_t>(kf)]);
  }
  return tail_inverted(kf);
}

// Smallest k with P(R > k) <= 1 - u, on a log scale.
double MarginalSampler::log_quantile(double u) const {
  if (mode_.kind == LimitMode::Kind::zero) {
    return std::log(static_cast<double>(OffspringLaw::sibuya(gamma_).quantile(u)));
  }
  if (mode_.param == 1.0) {
    if (success_ == 1.0) {
      return 0.0;
    }
    return std::log1p(std::floor(std::log(u) / std::log1p(-success_)));
  }
  const auto it = std::lower_bound(cdf_.begin() + 1, cdf_.end(), u);
  if (it != cdf_.end()) {
    return std::log(static_cast<double>(it - cdf_.begin()));
  }
  const double target = 1.0 - u;
  if (target < 1e-9) {
    std::ostringstream msg;
    msg << "MarginalSampler: draw deeper in the tail (" << target
        << ") than the transform inversion resolves at x = " << x_ << "; resample";
    throw NumericalError(msg.str());
  }
  double lo = std::log(static_cast<double>(cdf_.size() - 1));
  double hi = lo + 1.0;
  while (tail_inverted(std::exp(hi)) > target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 700.0) {
      throw NumericalError("MarginalSampler: tail inversion failed to bracket the quantile");
    }
  }
  while (hi - lo > 1e-12 * hi) {
    const double mid = 0.5 * (lo + hi);
    (tail_inverted(std::exp(mid)) > target ? lo : hi) = mid;
  }
  // Exact integer rounding only matters while k is representable.
  return hi < 36.0 ? std::log(std::ceil(std::exp(hi) - 1e-9)) : hi;
}

double MarginalSampler::sample_log(Stream& rng) const { return log_quantile(rng.uniform()); }

std::uint64_t MarginalSampler::operator()(Stream& rng) const {
  const double u = rng.uniform();
  if (mode_.kind == LimitMode::Kind::zero) {
    return OffspringLaw::sibuya(gamma_).quantile(u);
  }
  if (mode_.param == 1.0) {
    if (success_ == 1.0) {
      return 1;
    }
    return 1 + static_cast<std::uint64_t>(std::floor(std::log(u) / std::log1p(-success_)));
  }
  const double log_k = log_quantile(u);
  if (log_k >= 36.0) {
    std::ostringstream msg;
    msg << "MarginalSampler: draw exp(" << log_k << ") is too large for an integer; use sample_log";
    throw NumericalError(msg.str());
  }
  return static_cast<std::uint64_t>(std::llround(std::exp(log_k)));
}

std::uint64_t sample_marginal(const LimitMode& mode, double x, Stream& rng) {
  return MarginalSampler(mode, x)(rng);
}

}  // namespace rbp
