#include "rbp/coalescent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rbp/error.hpp"
#include "rbp/numerics.hpp"
#include "rbp/offspring_laws.hpp"

namespace rbp {

CoalescentSpec CoalescentSpec::with_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw ParameterError("CoalescentSpec: alpha must lie in [0,1)");
  }
  return {alpha};
}

namespace {

double log_rate(double alpha, std::uint64_t n, std::uint64_t k) {
  return std::log1p(-alpha) + numerics::log_beta(static_cast<double>(k) - 1.0 - alpha,
                                                 static_cast<double>(n - k) + 1.0);
}

double log_choose(std::uint64_t n, std::uint64_t k) {
  return numerics::log_gamma(static_cast<double>(n) + 1.0) -
         numerics::log_gamma(static_cast<double>(k) + 1.0) -
         numerics::log_gamma(static_cast<double>(n - k) + 1.0);
}

}  // namespace

double merger_rate(const CoalescentSpec& spec, std::uint64_t n, std::uint64_t k) {
  if (!(spec.alpha >= 0.0 && spec.alpha < 1.0)) {
    throw ParameterError("merger_rate: alpha must lie in [0,1)");
  }
  if (n < 2 || k < 2 || k > n) {
    throw DomainError("merger_rate: need 2 <= k <= n");
  }
  return std::exp(log_rate(spec.alpha, n, k));
}

std::vector<double> next_merger_law(const CoalescentSpec& spec, std::uint64_t n) {
  if (n < 2) {
    throw DomainError("next_merger_law: need n >= 2");
  }
  std::vector<double> logw(n + 1, -std::numeric_limits<double>::infinity());
  double top = -std::numeric_limits<double>::infinity();
  for (std::uint64_t k = 2; k <= n; ++k) {
    logw[k] = log_choose(n, k) + log_rate(spec.alpha, n, k);
    top = std::max(top, logw[k]);
  }
  std::vector<double> probs(n + 1, 0.0);
  double total = 0.0;
  for (std::uint64_t k = 2; k <= n; ++k) {
    probs[k] = std::exp(logw[k] - top);
    total += probs[k];
  }
  for (auto& p : probs) {
    p /= total;
  }
  return probs;
}

std::vector<LinkRow> link_table(double alpha, std::uint64_t n_max) {
  const auto spec = CoalescentSpec::with_alpha(alpha);
  if (n_max < 2) {
    throw DomainError("link_table: need n_max >= 2");
  }
  std::vector<LinkRow> rows;
  std::vector<double> offspring(n_max + 1, 0.0);
  for (std::uint64_t k = 2; k <= n_max; ++k) {
    offspring[k] = pmf_alpha(alpha, k);
  }
  for (std::uint64_t n = 2; n <= n_max; ++n) {
    const auto merger = next_merger_law(spec, n);
    double mass = 0.0;
    for (std::uint64_t k = 2; k <= n; ++k) {
      mass += offspring[k];
    }
    for (std::uint64_t k = 2; k <= n; ++k) {
      rows.push_back({n, k, merger[k], offspring[k] / mass});
    }
  }
  return rows;
}

double verify_link(double alpha, std::uint64_t n_max) {
  double worst = 0.0;
  for (const auto& row : link_table(alpha, n_max)) {
    worst = std::max(worst, std::abs(row.merger_prob - row.conditional_offspring_prob));
  }
  return worst;
}

}  // namespace rbp
