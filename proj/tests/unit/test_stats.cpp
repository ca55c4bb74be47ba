#include <doctest.h>

#include <cmath>
#include <vector>

#include "rbp/error.hpp"
#include "rbp/rng.hpp"
#include "rbp/stats.hpp"

using namespace rbp;

TEST_CASE("ks on a perfect quantile grid") {
  constexpr int n = 1000;
  std::vector<double> grid;
  for (int i = 0; i < n; ++i) {
    grid.push_back((i + 0.5) / n);
  }
  const double d = stats::ks_distance(grid, [](double x) { return x; });
  CHECK(d <= 0.5 / n + 1e-15);
}

TEST_CASE("ks of uniform sample against x^2") {
  Stream rng(21, 0);
  std::vector<double> u(10000);
  for (double& x : u) {
    x = rng.uniform();
  }
  const double d = stats::ks_distance(u, [](double x) { return x * x; });
  CHECK(d == doctest::Approx(0.25).epsilon(0.06));
  CHECK_THROWS_AS(stats::ks_distance({}, [](double x) { return x; }), StatisticsError);
}

TEST_CASE("ks with atoms") {
  // sample {0,0,1,1} against a fair coin on {0,1}: no discrepancy
  const std::vector<double> s{0, 0, 1, 1};
  const std::vector<double> at{0.5, 0.5, 1.0, 1.0};
  const std::vector<double> left{0.0, 0.0, 0.5, 0.5};
  CHECK(stats::ks_distance_values(s, at, left) == doctest::Approx(0.0));
  const std::vector<double> s2{0, 1, 1, 1};
  const std::vector<double> at2{0.5, 1.0, 1.0, 1.0};
  const std::vector<double> left2{0.0, 0.5, 0.5, 0.5};
  CHECK(stats::ks_distance_values(s2, at2, left2) == doctest::Approx(0.25));
}

TEST_CASE("chi-square edge cases") {
  const std::vector<double> h{10, 20, 30, 40};
  const auto same = stats::chi_square_two_sample(h, h);
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == doctest::Approx(1.0));
  const auto exact = stats::chi_square(h, h);
  CHECK(exact.statistic == 0.0);
  CHECK(exact.p_value == doctest::Approx(1.0));
  const std::vector<double> tiny{1, 1};
  CHECK_THROWS_AS(stats::chi_square(tiny, tiny), StatisticsError);
  const std::vector<double> other{10, 20, 30, 41};
  CHECK_THROWS_AS(stats::chi_square(h, other), StatisticsError);
}

TEST_CASE("chi-square merging and value") {
  // expected {2,3,50,45}: first two merge into one group of 5
  const std::vector<double> obs{1, 6, 48, 45};
  const std::vector<double> exp{2, 3, 50, 45};
  const auto r = stats::chi_square(obs, exp);
  CHECK(r.buckets == 3);
  CHECK(r.dof == 2);
  const double stat = 4.0 / 5.0 + 4.0 / 50.0;
  CHECK(r.statistic == doctest::Approx(stat));
  CHECK(r.p_value == doctest::Approx(std::exp(-stat / 2.0)));
  CHECK(stats::chi_square_sf(0.0, 3) == 1.0);
}

TEST_CASE("total variation") {
  const std::vector<double> counts{25, 25, 50};
  const std::vector<double> p{0.25, 0.25, 0.5};
  CHECK(stats::total_variation(counts, p) == doctest::Approx(0.0));
  const std::vector<double> q{0.5, 0.25, 0.25};
  CHECK(stats::total_variation(counts, q) == doctest::Approx(0.25));
}

TEST_CASE("binomial intervals") {
  const auto small = stats::binomial_interval(0, 50);
  CHECK(small.exact);
  CHECK(small.lower == 0.0);
  CHECK(small.upper > 0.0);
  const auto big = stats::binomial_interval(500, 1000);
  CHECK_FALSE(big.exact);
  CHECK(big.estimate == 0.5);
  const double half = 3.0 * std::sqrt(0.25 / 1000.0) + 0.5 / 1000.0;
  CHECK(big.upper - 0.5 == doctest::Approx(half).epsilon(1e-3));
  CHECK(stats::binomial_z(60, 100, 0.5) == doctest::Approx(2.0));
  CHECK(stats::median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(stats::median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}
