#include <doctest.h>

#include <cmath>
#include <numeric>

#include "rbp/coalescent.hpp"
#include "rbp/error.hpp"
#include "rbp/offspring_laws.hpp"

using namespace rbp;

TEST_CASE("merger rates by hand") {
  const auto bs = CoalescentSpec::with_alpha(0.0);
  CHECK(merger_rate(bs, 2, 2) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(merger_rate(bs, 3, 2) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(merger_rate(bs, 3, 3) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(merger_rate(CoalescentSpec::with_alpha(0.5), 2, 2) == doctest::Approx(1.0).epsilon(1e-14));
  // uniform Lambda: lambda_{n,k} = (k-2)! (n-k)! / (n-1)!
  CHECK(merger_rate(bs, 6, 3) == doctest::Approx(1.0 * 6.0 / 120.0).epsilon(1e-13));
  CHECK_THROWS_AS(merger_rate(bs, 3, 4), DomainError);
  CHECK_THROWS_AS(merger_rate(bs, 3, 1), DomainError);
  CHECK_THROWS_AS(CoalescentSpec::with_alpha(1.0), ParameterError);
}

TEST_CASE("next merger law") {
  const auto bs = CoalescentSpec::with_alpha(0.0);
  const auto two = next_merger_law(bs, 2);
  CHECK(two[2] == doctest::Approx(1.0));
  const auto three = next_merger_law(bs, 3);
  CHECK(three[0] == 0.0);
  CHECK(three[1] == 0.0);
  CHECK(three[2] == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(three[3] == doctest::Approx(0.25).epsilon(1e-14));
  // the conditional offspring side of the same identity
  CHECK(pmf_alpha(0.0, 2) / (pmf_alpha(0.0, 2) + pmf_alpha(0.0, 3)) == doctest::Approx(0.75));
  for (double a : {0.0, 0.3, 0.9}) {
    for (std::uint64_t n : {2u, 10u, 250u, 1000u}) {
      const auto law = next_merger_law(CoalescentSpec::with_alpha(a), n);
      CHECK(std::abs(std::accumulate(law.begin(), law.end(), 0.0) - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("rates are positive and decrease in n") {
  for (double a : {0.0, 0.5}) {
    const auto spec = CoalescentSpec::with_alpha(a);
    for (std::uint64_t k = 2; k <= 10; ++k) {
      double previous = INFINITY;
      for (std::uint64_t n = k; n <= 200; ++n) {
        const double r = merger_rate(spec, n, k);
        REQUIRE(r > 0.0);
        REQUIRE(r < previous);
        previous = r;
      }
    }
  }
}

TEST_CASE("link identity") {
  CHECK(verify_link(0.0, 2) == 0.0);
  for (int i = 0; i <= 9; ++i) {
    const double a = 0.1 * i;
    CAPTURE(a);
    CHECK(verify_link(a, 50) < 1e-12);
  }
  const auto rows = link_table(0.5, 4);
  CHECK(rows.size() == 6);  // (2,2) (3,2) (3,3) (4,2) (4,3) (4,4)
  for (const auto& r : rows) {
    CHECK(r.merger_prob == doctest::Approx(r.conditional_offspring_prob).epsilon(1e-12));
  }
}
