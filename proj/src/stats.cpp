#include "rbp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "rbp/error.hpp"

namespace rbp::stats {

double ks_distance_sorted(std::span<const double> sorted,
                          const std::function<double(double)>& cdf) {
  if (sorted.empty()) {
    throw StatisticsError("ks_distance: empty sample");
  }
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_distance_values(std::span<const double> sorted, std::span<const double> cdf_at,
                          std::span<const double> cdf_left) {
  if (sorted.empty() || cdf_at.size() != sorted.size() || cdf_left.size() != sorted.size()) {
    throw StatisticsError("ks_distance_values: empty sample or size mismatch");
  }
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) {
      ++j;
    }
    // ECDF is i/n just left of the tie block and (j+1)/n at it.
    d = std::max({d, std::abs(static_cast<double>(j + 1) / n - cdf_at[i]),
                  std::abs(cdf_left[i] - static_cast<double>(i) / n)});
    i = j + 1;
  }
  return d;
}

double ks_distance(std::span<const double> sample, const std::function<double(double)>& cdf) {
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  return ks_distance_sorted(sorted, cdf);
}

namespace {

// Bucket boundaries [start, end) such that each group has expected >= min.
std::vector<std::pair<std::size_t, std::size_t>> merge_groups(std::span<const double> expected,
                                                              double min_expected) {
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  std::size_t start = 0;
  double acc = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    acc += expected[i];
    if (acc >= min_expected) {
      groups.emplace_back(start, i + 1);
      start = i + 1;
      acc = 0.0;
    }
  }
  if (start < expected.size()) {
    if (groups.empty()) {
      groups.emplace_back(start, expected.size());
    } else {
      groups.back().second = expected.size();
    }
  }
  return groups;
}

double group_sum(std::span<const double> v, std::pair<std::size_t, std::size_t> g) {
  return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(g.first),
                         v.begin() + static_cast<std::ptrdiff_t>(g.second), 0.0);
}

}  // namespace

double chi_square_sf(double statistic, double dof) {
  if (!(dof > 0.0)) {
    throw StatisticsError("chi_square_sf: dof must be positive");
  }
  if (statistic <= 0.0) {
    return 1.0;
  }
  return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

ChiSquare chi_square(std::span<const double> observed, std::span<const double> expected,
                     double min_expected) {
  if (observed.size() != expected.size() || observed.empty()) {
    throw StatisticsError("chi_square: observed and expected must be nonempty and equal length");
  }
  const double n_obs = std::accumulate(observed.begin(), observed.end(), 0.0);
  const double n_exp = std::accumulate(expected.begin(), expected.end(), 0.0);
  if (!(n_obs > 0.0) || std::abs(n_obs - n_exp) > 1e-6 * n_obs) {
    throw StatisticsError("chi_square: expected counts must sum to the observed total");
  }
  const auto groups = merge_groups(expected, min_expected);
  if (groups.size() < 2) {
    throw StatisticsError("chi_square: fewer than two buckets after merging");
  }
  ChiSquare out;
  for (const auto& g : groups) {
    const double o = group_sum(observed, g);
    const double e = group_sum(expected, g);
    out.statistic += (o - e) * (o - e) / e;
  }
  out.buckets = groups.size();
  out.dof = static_cast<double>(groups.size() - 1);
  out.p_value = chi_square_sf(out.statistic, out.dof);
  return out;
}

ChiSquare chi_square_two_sample(std::span<const double> a, std::span<const double> b,
                                double min_expected) {
  if (a.size() != b.size() || a.empty()) {
    throw StatisticsError("chi_square_two_sample: histograms must be nonempty and equal length");
  }
  const double na = std::accumulate(a.begin(), a.end(), 0.0);
  const double nb = std::accumulate(b.begin(), b.end(), 0.0);
  if (!(na > 0.0 && nb > 0.0)) {
    throw StatisticsError("chi_square_two_sample: empty histogram");
  }
  // Merge on the smaller of the two expected counts per bucket.
  std::vector<double> smaller(a.size());
  const double share = std::min(na, nb) / (na + nb);
  for (std::size_t i = 0; i < a.size(); ++i) {
    smaller[i] = (a[i] + b[i]) * share;
  }
  const auto groups = merge_groups(smaller, min_expected);
  if (groups.size() < 2) {
    throw StatisticsError("chi_square_two_sample: fewer than two buckets after merging");
  }
  ChiSquare out;
  for (const auto& g : groups) {
    const double oa = group_sum(a, g);
    const double ob = group_sum(b, g);
    const double ea = (oa + ob) * na / (na + nb);
    const double eb = (oa + ob) * nb / (na + nb);
    out.statistic += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
  }
  out.buckets = groups.size();
  out.dof = static_cast<double>(groups.size() - 1);
  out.p_value = chi_square_sf(out.statistic, out.dof);
  return out;
}

double total_variation(std::span<const double> counts, std::span<const double> probs) {
  if (counts.size() != probs.size() || counts.empty()) {
    throw StatisticsError("total_variation: size mismatch");
  }
  const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (!(n > 0.0)) {
    throw StatisticsError("total_variation: empty histogram");
  }
  double tv = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    tv += std::abs(counts[i] / n - probs[i]);
  }
  return 0.5 * tv;
}

BinomialInterval binomial_interval(std::uint64_t successes, std::uint64_t trials,
                                   double confidence) {
  if (trials == 0 || successes > trials) {
    throw StatisticsError("binomial_interval: need 0 <= successes <= trials, trials > 0");
  }
  const double n = static_cast<double>(trials);
  const double k = static_cast<double>(successes);
  const double alpha = 1.0 - confidence;
  BinomialInterval out{k / n, 0.0, 1.0, false};
  if (std::min(successes, trials - successes) < 30) {
    out.exact = true;
    out.lower = successes == 0
                    ? 0.0
                    : boost::math::quantile(boost::math::beta_distribution<>(k, n - k + 1.0),
                                            alpha / 2.0);
    out.upper = successes == trials
                    ? 1.0
                    : boost::math::quantile(boost::math::beta_distribution<>(k + 1.0, n - k),
                                            1.0 - alpha / 2.0);
    return out;
  }
  const double z = boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);
  const double half = z * std::sqrt(out.estimate * (1.0 - out.estimate) / n) + 0.5 / n;
  out.lower = std::max(0.0, out.estimate - half);
  out.upper = std::min(1.0, out.estimate + half);
  return out;
}

double binomial_z(std::uint64_t successes, std::uint64_t trials, double p) {
  if (trials == 0) {
    throw StatisticsError("binomial_z: no trials");
  }
  if (!(p > 0.0 && p < 1.0)) {
    throw StatisticsError("binomial_z: p must lie in (0,1)");
  }
  const double n = static_cast<double>(trials);
  return (static_cast<double>(successes) / n - p) / std::sqrt(p * (1.0 - p) / n);
}

double median(std::vector<double> values) {
  if (values.empty()) {
    throw StatisticsError("median: empty input");
  }
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (values.size() % 2 == 1) {
    return *mid;
  }
  const double upper = *mid;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace rbp::stats
