#pragma once

#include <cstdint>
#include <vector>

namespace rbp {

/// Lambda-coalescent with Lambda(dx) = (1 - alpha) x^{-alpha} dx on [0,1].
/// alpha = 0 is the Bolthausen-Sznitman coalescent.
struct CoalescentSpec {
  double alpha = 0.0;

  static CoalescentSpec with_alpha(double alpha);
};

/// lambda_{n,k} = int_0^1 x^{k-2} (1-x)^{n-k} Lambda(dx) = (1-alpha) B(k-1-alpha, n-k+1).
double merger_rate(const CoalescentSpec& spec, std::uint64_t n, std::uint64_t k);

/// P(Y_n = k) for k = 0..n (entries 0 and 1 are zero).
std::vector<double> next_merger_law(const CoalescentSpec& spec, std::uint64_t n);

/// max over 2 <= k <= n <= n_max of |P(Y_n = k) - P(nu_alpha = k | nu_alpha <= n)|.
double verify_link(double alpha, std::uint64_t n_max);

struct LinkRow {
  std::uint64_t n;
  std::uint64_t k;
  double merger_prob;
  double conditional_offspring_prob;
};

std::vector<LinkRow> link_table(double alpha, std::uint64_t n_max);

}  // namespace rbp
