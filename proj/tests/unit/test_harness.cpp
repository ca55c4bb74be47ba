#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rbp/error.hpp"
#include "rbp/harness.hpp"

using namespace rbp;
using namespace rbp::harness;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("experiment names round trip") {
  for (const auto& name : experiment_names()) {
    CHECK(to_string(experiment_from_string(name)) == name);
  }
  CHECK_THROWS_AS(experiment_from_string("theorem3"), ParameterError);
}

TEST_CASE("spec json round trip and validation") {
  ExperimentSpec spec;
  spec.experiment = Experiment::theorem2_marginals;
  spec.betas = {0.5, 2.0};
  spec.survivors = 123;
  spec.seed = 99;
  spec.workers = 7;
  const auto j = to_json(spec);
  CHECK_FALSE(j.contains("workers"));
  const ExperimentSpec back = spec_from_json(j);
  CHECK(to_json(back) == j);
  auto bad = j;
  bad["mystery"] = 1;
  CHECK_THROWS_AS(spec_from_json(bad), ParameterError);

  ExperimentSpec badt = spec;
  badt.t_grid = {10.0, 0.0};
  CHECK_THROWS_AS(badt.validate(), ParameterError);
  ExperimentSpec neg = spec;
  neg.betas = {-1.0};
  CHECK_THROWS_AS(neg.validate(), ParameterError);
  CHECK_FALSE(spec.resolved().t_grid.empty());
}

TEST_CASE("parallel map keeps index order and rethrows") {
  const auto squares =
      parallel_map<std::uint64_t>(0, 1000, 4, [](std::uint64_t i) { return i * i; });
  for (std::uint64_t i = 0; i < 1000; ++i) {
    REQUIRE(squares[i] == i * i);
  }
  CHECK_THROWS_AS(parallel_map<int>(0, 1000, 4,
                                    [](std::uint64_t i) -> int {
                                      if (i == 517) {
                                        throw std::runtime_error("boom");
                                      }
                                      return 0;
                                    }),
                  std::runtime_error);
}

TEST_CASE("survivor collection is independent of worker count") {
  const OffspringLaw law = build_heavy_tail(1.0);
  SimConfig cfg;
  cfg.horizon = 10.0;
  const std::vector<double> u{2.0, 5.0};
  const SurvivorSet a = collect_survivors(law, cfg, 300, 10'000'000, 1, true, u);
  const SurvivorSet b = collect_survivors(law, cfg, 300, 10'000'000, 3, true, u);
  REQUIRE(a.survivors.size() == 300);
  REQUIRE(b.survivors.size() == 300);
  CHECK(a.attempts == b.attempts);
  CHECK(a.events == b.events);
  for (std::size_t i = 0; i < a.survivors.size(); ++i) {
    CHECK(a.survivors[i].replicate == b.survivors[i].replicate);
    CHECK(a.survivors[i].tau == b.survivors[i].tau);
    CHECK(a.survivors[i].reduced_at == b.survivors[i].reduced_at);
  }
  const SurvivorSet starved = collect_survivors(law, cfg, 300, 100, 1, false);
  CHECK(starved.budget_exhausted);
}

TEST_CASE("reports are byte-identical across worker counts") {
  ExperimentSpec spec;
  spec.experiment = Experiment::theorem2_marginals;
  spec.survivors = 200;
  spec.samples = 2000;
  spec.trees = 50;
  spec.node_cap = 1 << 12;
  spec.workers = 1;
  const std::string one = run(spec).to_json(false).dump();
  spec.workers = 4;
  const std::string four = run(spec).to_json(false).dump();
  CHECK(one == four);
  const auto j = nlohmann::json::parse(one);
  CHECK(j["schema"] == kReportSchema);
  CHECK(j["schema_version"] == kReportSchemaVersion);
  CHECK(j.contains("verdicts"));
  CHECK(j["seeds"]["master"] == spec.seed);
}

TEST_CASE("report spec echo re-runs to the same verdicts") {
  ExperimentSpec spec;
  spec.experiment = Experiment::coalescent_link;
  const ExperimentReport first = run(spec);
  const ExperimentSpec echoed = spec_from_json(first.to_json()["spec"]);
  CHECK(run(echoed).to_json(false) == first.to_json(false));
  CHECK(first.passed());
}

TEST_CASE("failed info verdicts do not fail a report") {
  ExperimentReport r;
  r.verdicts.push_back({"a", "info", false, 1.0, 0.0, ""});
  CHECK(r.passed());
  r.verdicts.push_back({"b", "trend", false, 1.0, 0.0, ""});
  CHECK_FALSE(r.passed());
  ExperimentReport f;
  f.failures.push_back("budget");
  CHECK_FALSE(f.passed());
}

TEST_CASE("output directory override and csv writing") {
  ::unsetenv("RBP_OUTPUT_DIR");
  CHECK(output_directory("fallback") == "fallback");
  ::setenv("RBP_OUTPUT_DIR", "/tmp/rbp_env_dir", 1);
  CHECK(output_directory("fallback") == "/tmp/rbp_env_dir");
  ::unsetenv("RBP_OUTPUT_DIR");

  const auto dir = std::filesystem::temp_directory_path() / "rbp_harness_test";
  std::filesystem::remove_all(dir);
  const std::string path = write_csv(dir.string(), "t.csv", "a,b", {"1,2", "3,4"});
  CHECK(slurp(path) == "a,b\n1,2\n3,4\n");
  std::filesystem::remove_all(dir);
}

TEST_CASE("work per replicate at beta=1, t=20") {
  SimConfig cfg;
  cfg.horizon = 20.0;
  const WorkStats w = work_stats(build_heavy_tail(1.0), cfg, 20000, 1);
  CHECK(w.mean_events <= 2.0 * (cfg.horizon + 1.0));
  CHECK(w.replicates == 20000);
}
