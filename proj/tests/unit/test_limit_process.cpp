#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rbp/analytic.hpp"
#include "rbp/error.hpp"
#include "rbp/limit_process.hpp"
#include "rbp/stats.hpp"

using namespace rbp;

TEST_CASE("tau inverse transform") {
  CHECK(tau_quantile(LimitMode::zero(1.0), 0.25) == doctest::Approx(0.0625));
  CHECK(tau_quantile(LimitMode::zero(3.0), 1.0) == 1.0);
  CHECK(tau_quantile(LimitMode::alpha(0.4), 0.3) == 0.3);
  CHECK(tau_quantile(LimitMode::zero(0.2), 1.0 - 1e-12) == doctest::Approx(1.0));
}

TEST_CASE("tau sample follows x^{beta/(1+beta)}") {
  const LimitMode mode = LimitMode::zero(1.0);
  Stream rng(5, 0);
  std::vector<double> tau(1'000'000);
  for (double& x : tau) {
    x = sample_tau(mode, rng);
  }
  CHECK(stats::ks_distance(tau, [](double x) { return std::sqrt(x); }) < 0.002);
}

TEST_CASE("yule tree splits are binary") {
  LimitConfig cfg;
  cfg.mode = LimitMode::alpha(1.0);
  Stream rng(2, 0);
  for (int i = 0; i < 20; ++i) {
    const LimitTree tree = sample_limit_tree(cfg, rng);
    for (const auto& n : tree.nodes) {
      if (n.expanded) {
        REQUIRE(n.children == 2);
      }
    }
  }
}

TEST_CASE("first split position in zero mode") {
  LimitConfig cfg;
  cfg.mode = LimitMode::zero(1.0);
  cfg.node_cap = 64;
  std::vector<double> first;
  for (std::uint64_t i = 0; i < 100000; ++i) {
    Stream rng(8, i);
    first.push_back(sample_limit_tree(cfg, rng).nodes[0].split);
  }
  // P(split <= x) = 1 - (1-x)^{1/2}
  CHECK(stats::ks_distance(first, [](double x) { return 1.0 - std::sqrt(1.0 - x); }) < 0.01);
}

TEST_CASE("trajectories start at one and never decrease") {
  LimitConfig cfg;
  cfg.mode = LimitMode::zero(1.0);
  cfg.node_cap = 1 << 14;
  std::vector<double> xs;
  for (double x = 0.0; x < 0.99; x += 0.01) {
    xs.push_back(x);
  }
  for (std::uint64_t i = 0; i < 50; ++i) {
    Stream rng(4, i);
    const LimitTree tree = sample_limit_tree(cfg, rng);
    const auto r = trajectory_at(tree, xs);
    CHECK(r.front() == 1);
    for (std::size_t j = 1; j < r.size(); ++j) {
      REQUIRE(r[j] >= r[j - 1]);
    }
    const std::vector<double> before{0.0, 0.999 * tree.nodes[0].split};
    const auto early = trajectory_at(tree, before);
    CHECK(early[1] == 1);
  }
  Stream rng(4, 0);
  const LimitTree tree = sample_limit_tree(cfg, rng);
  const std::vector<double> beyond{0.9995};
  CHECK_THROWS_AS(trajectory_at(tree, beyond), DomainError);
}

TEST_CASE("marginal sampler point values") {
  Stream rng(1, 0);
  for (int i = 0; i < 100; ++i) {
    REQUIRE(sample_marginal(LimitMode::zero(1.0), 0.0, rng) == 1);
    REQUIRE(sample_marginal(LimitMode::alpha(0.5), 0.0, rng) == 1);
  }
  const double x = 1.0 - std::exp(-1.0);
  const MarginalSampler yule(LimitMode::alpha(1.0), x);
  CHECK(yule.pmf(1) == doctest::Approx(std::exp(-1.0)));
  // geometric pmf e^{-t} (1 - e^{-t})^{k-1} at t = 1
  CHECK(yule.pmf(4) == doctest::Approx(std::exp(-1.0) * std::pow(1 - std::exp(-1.0), 3)));
  constexpr int n = 200000;
  int ones = 0;
  for (int i = 0; i < n; ++i) {
    ones += yule(rng) == 1 ? 1 : 0;
  }
  const double p = std::exp(-1.0);
  CHECK(std::abs(ones / double(n) - p) < 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("zero mode marginal is Sibuya") {
  const double x = 0.5;
  const double gamma = std::sqrt(1.0 - x);
  const MarginalSampler m(LimitMode::zero(1.0), x);
  for (std::uint64_t k : {1u, 2u, 10u, 300u}) {
    CHECK(m.pmf(k) == doctest::Approx(sibuya_pmf(gamma, k)).epsilon(1e-12));
  }
}

TEST_CASE("alpha mode marginal agrees with the closed-form generating function") {
  for (double a : {0.1, 0.3, 0.7}) {
    CAPTURE(a);
    const double x = 0.6;
    const double t = -std::log(1.0 - x);
    const MarginalSampler m(LimitMode::alpha(a), x);
    // sum_k pmf(k) s^k over a truncated range versus F_alpha(s,t)
    for (double s : {0.2, 0.5}) {
      double acc = 0.0;
      for (std::uint64_t k = 1; k < 400; ++k) {
        acc += m.pmf(k) * std::pow(s, static_cast<double>(k));
      }
      CHECK(acc == doctest::Approx(F_closed(LimitGf::alpha_mode(a), s, t)).epsilon(1e-10));
    }
    // tail continuity across the series cap
    CHECK(m.tail(4095.0) - m.tail(4096.0) == doctest::Approx(m.pmf(4096)).epsilon(1e-6));
  }
}

TEST_CASE("log sampler handles draws beyond 64 bits") {
  const MarginalSampler m(LimitMode::alpha(0.1), 0.99);
  Stream rng(7, 0);
  std::vector<double> logs;
  for (int i = 0; i < 2001; ++i) {
    logs.push_back(m.sample_log(rng));
  }
  for (double l : logs) {
    REQUIRE(std::isfinite(l));
    REQUIRE(l >= 0.0);
  }
  // median of ln R: tail(e^m) = 1/2
  const double med = stats::median(logs);
  CHECK(m.tail(std::exp(med)) == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("two point coupling") {
  LimitConfig cfg;
  cfg.mode = LimitMode::zero(1.0);
  cfg.node_cap = 1 << 12;
  const std::vector<double> xs{0.2, 0.6};
  std::uint64_t at_x = 0;
  std::uint64_t both = 0;
  for (std::uint64_t i = 0; i < 20000; ++i) {
    Stream rng(12, i);
    const auto r = trajectory_at(sample_limit_tree(cfg, rng), xs);
    if (r[0] == 1) {
      ++at_x;
      both += r[1] == 1 ? 1 : 0;
    }
  }
  const double p = limit_cdfs(1.0).marginal_one(0.2, 0.6);
  CHECK(std::abs(stats::binomial_z(both, at_x, p)) < 3.0);
}
