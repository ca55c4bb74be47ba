#include <doctest.h>

#include <cmath>
#include <vector>

#include "rbp/error.hpp"
#include "rbp/harness.hpp"
#include "rbp/simulator.hpp"

using namespace rbp;

namespace {

SimConfig config_at(double horizon) {
  SimConfig c;
  c.horizon = horizon;
  return c;
}

}  // namespace

TEST_CASE("childless point mass survives with probability e^-t") {
  const OffspringLaw law = OffspringLaw::point_mass(0);
  const SimConfig cfg = config_at(1.0);
  constexpr int n = 100000;
  int alive = 0;
  for (int i = 0; i < n; ++i) {
    Stream rng(cfg.seed, i);
    alive += simulate(law, cfg, rng, false).survived ? 1 : 0;
  }
  const double p = std::exp(-1.0);
  CHECK(std::abs(alive / double(n) - p) < 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("point mass at one is an immortal lineage") {
  const OffspringLaw law = OffspringLaw::point_mass(1);
  const SimConfig cfg = config_at(5.0);
  for (int i = 0; i < 50; ++i) {
    Stream rng(9, i);
    const SimOutcome out = simulate(law, cfg, rng);
    REQUIRE(out.survived);
    CHECK(out.z_t == 1);
    const ReducedTrajectory r = reduce(out.genealogy, cfg.horizon);
    for (double u : {0.0, 1.0, 2.5, 5.0}) {
      CHECK(r.value_at(u) == 1);
    }
    CHECK(r.values.size() == 1);
    // Z(u,t) = 1 for every u, so P(tau <= t-u) = 1 for every u and tau = 0:
    // the lone survivor is its own most recent common ancestor.
    CHECK(r.mrca_time == 0.0);
  }
  Stream rng(9, 0);
  const MrcaSample m = mrca_sample(law, cfg, rng);
  CHECK(m.rejections == 0);
  CHECK(m.tau == 0.0);
}

TEST_CASE("two-node tree by hand") {
  Genealogy g;
  g.nodes.push_back({kNoParent, 0.0, 2.0});
  g.nodes.push_back({0, 2.0, kAliveAtHorizon});
  g.nodes.push_back({0, 2.0, kAliveAtHorizon});
  const ReducedTrajectory r = reduce(g, 5.0);
  CHECK(r.value_at(0.0) == 1);
  CHECK(r.value_at(1.999) == 1);
  CHECK(r.value_at(2.0) == 2);
  CHECK(r.value_at(5.0) == 2);
  CHECK(r.final_value() == 2);
  CHECK(r.mrca_time == doctest::Approx(3.0));
}

TEST_CASE("reduce skips branches that die out") {
  Genealogy g;
  g.nodes.push_back({kNoParent, 0.0, 1.0});
  g.nodes.push_back({0, 1.0, 2.0});             // dies childless
  g.nodes.push_back({0, 1.0, 3.0});
  g.nodes.push_back({2, 3.0, kAliveAtHorizon});
  g.nodes.push_back({2, 3.0, kAliveAtHorizon});
  const ReducedTrajectory r = reduce(g, 4.0);
  CHECK(r.value_at(0.5) == 1);
  CHECK(r.value_at(1.5) == 1);
  CHECK(r.value_at(3.5) == 2);
  CHECK(r.mrca_time == doctest::Approx(1.0));

  Genealogy extinct;
  extinct.nodes.push_back({kNoParent, 0.0, 1.0});
  CHECK_THROWS_AS(reduce(extinct, 2.0), DomainError);
}

TEST_CASE("binary survival at t=8") {
  const OffspringLaw law = OffspringLaw::binary();
  SimConfig cfg = config_at(8.0);
  constexpr std::uint64_t n = 1'000'000;
  const auto alive = harness::parallel_map<char>(0, n, 1, [&](std::uint64_t i) {
    Stream rng(cfg.seed, i);
    return static_cast<char>(simulate(law, cfg, rng, false).survived);
  });
  double k = 0;
  for (char a : alive) {
    k += a;
  }
  CHECK(std::abs(k / n - 0.2) < 3.0 * std::sqrt(0.2 * 0.8 / n));
}

TEST_CASE("genealogy invariants on heavy-tailed runs") {
  const OffspringLaw law = build_heavy_tail(1.0);
  const SimConfig cfg = config_at(10.0);
  int checked = 0;
  for (std::uint64_t i = 0; checked < 100 && i < 100000; ++i) {
    Stream rng(cfg.seed, i);
    const SimOutcome out = simulate(law, cfg, rng);
    if (!out.survived || out.censored) {
      continue;
    }
    ++checked;
    std::uint64_t alive = 0;
    for (std::size_t j = 0; j < out.genealogy.size(); ++j) {
      const auto& node = out.genealogy.nodes[j];
      if (node.death == kAliveAtHorizon) {
        ++alive;
      }
      if (node.parent != kNoParent) {
        REQUIRE(static_cast<std::size_t>(node.parent) < j);
        REQUIRE(out.genealogy.nodes[node.parent].death == node.birth);
      }
    }
    CHECK(alive == out.z_t);
    const ReducedTrajectory r = reduce(out.genealogy, cfg.horizon);
    CHECK(r.values.front() == 1);
    CHECK(r.final_value() == out.z_t);
    for (std::size_t j = 1; j < r.values.size(); ++j) {
      REQUIRE(r.values[j] >= r.values[j - 1]);
      REQUIRE(r.times[j] > r.times[j - 1]);
    }
    CHECK(r.mrca_time >= 0.0);
    CHECK(r.mrca_time <= cfg.horizon);
  }
  CHECK(checked == 100);
}

TEST_CASE("replicate outcome depends only on seed and index") {
  const OffspringLaw law = build_heavy_tail(1.0);
  const SimConfig cfg = config_at(12.0);
  for (std::uint64_t i : {3u, 77u, 1234u}) {
    Stream a(cfg.seed, i);
    Stream b(cfg.seed, i);
    const SimOutcome x = simulate(law, cfg, a);
    const SimOutcome y = simulate(law, cfg, b);
    CHECK(x.z_t == y.z_t);
    CHECK(x.events == y.events);
    REQUIRE(x.genealogy.size() == y.genealogy.size());
    for (std::size_t j = 0; j < x.genealogy.size(); ++j) {
      CHECK(x.genealogy.nodes[j].death == y.genealogy.nodes[j].death);
    }
  }
}

TEST_CASE("caps censor instead of throwing") {
  const OffspringLaw law = OffspringLaw::point_mass(3);
  SimConfig cfg = config_at(50.0);
  cfg.max_population = 1000;
  Stream rng(1, 0);
  const SimOutcome out = simulate(law, cfg, rng, false);
  CHECK(out.censored);
  SimConfig bad = cfg;
  bad.horizon = -1.0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("criticality: mean population stays at one") {
  const OffspringLaw law = OffspringLaw::binary();
  const SimConfig cfg = config_at(10.0);
  constexpr std::uint64_t n = 1'000'000;
  double sum = 0.0;
  double sq = 0.0;
  for (std::uint64_t i = 0; i < n; ++i) {
    Stream rng(cfg.seed, i);
    const double z = static_cast<double>(simulate(law, cfg, rng, false).z_t);
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  const double sd = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::abs(mean - 1.0) < 3.0 * sd);
}

TEST_CASE("budget exhaustion raises") {
  const OffspringLaw law = OffspringLaw::point_mass(0);
  const SimConfig cfg = config_at(40.0);
  Stream rng(1, 0);
  CHECK_THROWS_AS(mrca_sample(law, cfg, rng, 100), BudgetError);
}
