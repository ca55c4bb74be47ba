#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace rbp::stats {

/// One-sample Kolmogorov-Smirnov sup-distance between the empirical CDF of
/// `sample` and a continuous `cdf`. The sample need not be sorted.
double ks_distance(std::span<const double> sample, const std::function<double(double)>& cdf);

/// Same, but for a sample that is already sorted ascending.
double ks_distance_sorted(std::span<const double> sorted, const std::function<double(double)>& cdf);

/// KS distance for a sorted sample given the reference CDF at each point and
/// its left limit there (they differ only where the reference has an atom).
double ks_distance_values(std::span<const double> sorted, std::span<const double> cdf_at,
                          std::span<const double> cdf_left);

struct ChiSquare {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  std::size_t buckets = 0;
};

/// Pearson goodness of fit. Adjacent buckets are merged left to right until
/// each expected count is at least `min_expected`; a short last group joins
/// its neighbour. Expected counts must sum to the observed total.
ChiSquare chi_square(std::span<const double> observed, std::span<const double> expected,
                     double min_expected = 5.0);

/// Homogeneity test of two histograms over the same buckets.
ChiSquare chi_square_two_sample(std::span<const double> a, std::span<const double> b,
                                double min_expected = 5.0);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double statistic, double dof);

/// Total-variation distance between a histogram (normalised internally) and a
/// probability vector over the same buckets.
double total_variation(std::span<const double> counts, std::span<const double> probs);

struct BinomialInterval {
  double estimate;
  double lower;
  double upper;
  bool exact;  // Clopper-Pearson instead of the normal approximation
};

/// Two-sided interval at `confidence`; normal approximation with continuity
/// correction, Clopper-Pearson when fewer than 30 successes or failures.
BinomialInterval binomial_interval(std::uint64_t successes, std::uint64_t trials,
                                   double confidence = 0.9973);

/// (p_hat - p) / sqrt(p (1 - p) / n).
double binomial_z(std::uint64_t successes, std::uint64_t trials, double p);

double median(std::vector<double> values);

}  // namespace rbp::stats
