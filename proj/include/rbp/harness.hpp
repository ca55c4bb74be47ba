#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rbp/analytic.hpp"
#include "rbp/limit_process.hpp"
#include "rbp/offspring_laws.hpp"
#include "rbp/simulator.hpp"

namespace rbp::harness {

inline constexpr const char* kReportSchema = "rbp-report";
inline constexpr int kReportSchemaVersion = 1;

enum class Experiment {
  theorem1,
  zubkov_mrca,
  theorem2_marginals,
  figure1_trajectories,
  coalescent_link,
  oracle_consistency,
  sampler_fit,
};

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& name);
const std::vector<std::string>& experiment_names();

/// Everything a run depends on. `workers` and `output_dir` only affect how
/// and where work happens, so they are not echoed into reports.
struct ExperimentSpec {
  Experiment experiment = Experiment::oracle_consistency;
  std::string law = "heavy";  // heavy | binary
  std::vector<double> betas;  // empty: experiment default
  std::vector<double> alphas;
  std::vector<double> t_grid;
  std::vector<double> u_grid;  // theorem2_marginals, absolute times
  std::vector<double> x_grid;  // limit positions in [0,1)
  std::vector<double> s_grid;  // oracle_consistency
  std::uint64_t survivors = 2000;
  std::uint64_t samples = 100000;
  std::uint64_t trees = 200;
  std::uint64_t nmax = 50;
  std::uint64_t survival_budget = 50'000'000;
  std::uint64_t max_events = 100'000'000;
  std::uint64_t max_population = 10'000'000;
  std::uint64_t node_cap = std::uint64_t{1} << 17;
  double resolution = 1e-3;
  double scaling_t = 1e6;
  std::uint64_t seed = kDefaultSeed;

  unsigned workers = 1;
  std::string output_dir;

  /// Copy with every empty grid replaced by the experiment's default.
  ExperimentSpec resolved() const;
  void validate() const;
};

nlohmann::json to_json(const ExperimentSpec& spec);
/// Inverse of to_json; unknown keys are rejected.
ExperimentSpec spec_from_json(const nlohmann::json& j);

/// kind: "hard" and "trend" verdicts decide the exit status, "info" never does.
struct Verdict {
  std::string criterion;
  std::string kind;
  bool pass;
  double value;
  double threshold;
  std::string detail;
};

struct ExperimentReport {
  ExperimentSpec spec;
  nlohmann::json statistics = nlohmann::json::array();
  std::vector<Verdict> verdicts;
  std::vector<std::string> failures;
  std::uint64_t censored = 0;
  std::uint64_t rejected = 0;
  double wall_clock_seconds = 0.0;

  bool passed() const;
  nlohmann::json to_json(bool include_wall_clock = true) const;
};

ExperimentReport run(const ExperimentSpec& spec);

// ---------------------------------------------------------------------------
// Building blocks, also used directly by the acceptance suite.

/// out[i - begin] = fn(i) for i in [begin, end), spread over `workers` threads.
/// Results depend only on the index, never on scheduling.
template <class Result, class Fn>
std::vector<Result> parallel_map(std::uint64_t begin, std::uint64_t end, unsigned workers, Fn fn) {
  std::vector<Result> out(end - begin);
  const unsigned n = std::max(1u, workers);
  if (n == 1 || out.size() < 2) {
    for (std::uint64_t i = begin; i < end; ++i) {
      out[i - begin] = fn(i);
    }
    return out;
  }
  std::atomic<std::uint64_t> next{begin};
  std::mutex error_lock;
  std::exception_ptr error;
  constexpr std::uint64_t kChunk = 64;
  auto work = [&] {
    try {
      for (;;) {
        const std::uint64_t lo = next.fetch_add(kChunk);
        if (lo >= end) {
          return;
        }
        const std::uint64_t hi = std::min(end, lo + kChunk);
        for (std::uint64_t i = lo; i < hi; ++i) {
          out[i - begin] = fn(i);
        }
      }
    } catch (...) {
      const std::lock_guard<std::mutex> hold(error_lock);
      if (!error) {
        error = std::current_exception();
      }
      next = end;
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < n; ++w) {
    pool.emplace_back(work);
  }
  for (auto& th : pool) {
    th.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
  return out;
}

struct Survivor {
  std::uint64_t replicate = 0;
  std::uint64_t z_t = 0;
  double tau = 0.0;
  std::vector<std::uint64_t> reduced_at;  // Z(u,t) on the requested u grid
};

struct SurvivorSet {
  std::vector<Survivor> survivors;
  std::uint64_t attempts = 0;  // replicates consumed, in index order
  std::uint64_t censored = 0;
  std::uint64_t events = 0;    // total splits over all consumed replicates
  bool budget_exhausted = false;
};

/// First `target` survivors in replicate-index order. Replicate i runs on
/// Stream(seed, i), so the set is the same for any worker count.
SurvivorSet collect_survivors(const OffspringLaw& law, const SimConfig& config, std::uint64_t target,
                              std::uint64_t budget, unsigned workers, bool need_genealogy,
                              std::span<const double> u_grid = {});

struct OracleGrid {
  double flow_residual = 0.0;       // |pi(F(s,t)) - pi(s) - t|
  double survival_residual = 0.0;   // |1 - F(s,t) - Q(pi(s) + t)|
  double semigroup_residual = 0.0;  // |F(F(s,t1),t2) - F(s,t1+t2)|
  double derivative_residual = 0.0; // relative |q'(t) - g(q(t))|
};
OracleGrid oracle_grid(const AnalyticModel& model, std::span<const double> s_grid,
                       std::span<const double> t_grid);

/// max over t in (0, t_max] of |Q(t) - 2/(t+2)| for the binary law.
double binary_survival_residual(double t_max);

struct ScalingIndices {
  double c_index;
  double q_index;
  double c_target;  // beta/(1+beta)^2
  double q_target;  // 1/(1+beta)
};
/// [ln h(2t) - ln h(t)] / ln 2 for h = c and h = q.
ScalingIndices scaling_indices(double beta, double t);

struct SamplerFit {
  std::string law;
  double chi_square;
  double dof;
  double p_value;
  double total_variation;
  std::uint64_t draws;
};
SamplerFit sampler_fit(const OffspringLaw& law, std::uint64_t draws, std::uint64_t seed,
                       unsigned workers);

struct WorkStats {
  double mean_events;
  double mean_population;
  std::uint64_t replicates;
  std::uint64_t censored;
};
WorkStats work_stats(const OffspringLaw& law, const SimConfig& config, std::uint64_t replicates,
                     unsigned workers);

/// Sample median of ln R(x) from `draws` exact marginal draws.
double median_log_marginal(const LimitMode& mode, double x, std::uint64_t draws,
                           std::uint64_t seed);

/// Writes `header` and rows to dir/name, creating dir if needed. Returns the path.
std::string write_csv(const std::string& dir, const std::string& name, const std::string& header,
                      const std::vector<std::string>& rows);

/// Writes `content` to dir/name, creating dir if needed. Returns the path.
std::string write_text(const std::string& dir, const std::string& name, const std::string& content);

/// Output directory: the environment override RBP_OUTPUT_DIR wins over `fallback`.
std::string output_directory(const std::string& fallback);

}  // namespace rbp::harness
