// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Tolerances, sample sizes and runtime budgets are fixed here on purpose.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "rbp/analytic.hpp"
#include "rbp/coalescent.hpp"
#include "rbp/harness.hpp"
#include "rbp/offspring_laws.hpp"

using namespace rbp;
using namespace rbp::harness;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> check;
};

std::string g(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

std::vector<Verdict> select(const ExperimentReport& r, const std::string& criterion) {
  std::vector<Verdict> out;
  for (const auto& v : r.verdicts) {
    if (v.criterion == criterion) {
      out.push_back(v);
    }
  }
  return out;
}

// All verdicts with this id pass (and at least one exists). Appends a summary.
bool all_pass(const ExperimentReport& r, const std::string& criterion, std::string& detail) {
  const auto vs = select(r, criterion);
  bool ok = !vs.empty();
  double worst = 0.0;
  int failed = 0;
  for (const auto& v : vs) {
    if (!v.pass) {
      ok = false;
      ++failed;
    }
    worst = std::max(worst, std::abs(v.value));
  }
  detail += " " + criterion + "[" + std::to_string(vs.size() - failed) + "/" +
            std::to_string(vs.size()) + " max|v|=" + g(worst) + "]";
  return ok;
}

bool no_failures(const ExperimentReport& r, std::string& detail) {
  for (const auto& f : r.failures) {
    detail += " failure: " + f;
  }
  bool censor = true;
  for (const auto& v : select(r, "censoring_rate")) {
    censor = censor && v.pass;
  }
  if (!censor) {
    detail += " censoring above 0.1%";
  }
  return r.failures.empty() && censor;
}

Outcome c1_analytic_identities() {
  ExperimentSpec spec;
  spec.experiment = Experiment::oracle_consistency;
  spec.betas = {0.2, 1.0, 5.0};
  const auto r = run(spec);
  std::string d;
  bool ok = all_pass(r, "flow_identity", d);
  ok = all_pass(r, "survival_identity", d) && ok;
  all_pass(r, "semigroup", d);
  return {ok, d};
}

Outcome c2_binary_closed_form() {
  const double residual = binary_survival_residual(100.0);
  return {residual < 1e-6, "max |Q(t) - 2/(t+2)| over t<=100 = " + g(residual)};
}

Outcome c3_samplers() {
  ExperimentSpec spec;
  spec.experiment = Experiment::sampler_fit;
  spec.samples = 1'000'000;
  const auto r = run(spec);
  std::string d;
  bool ok = all_pass(r, "sampler_chi_square", d);
  ok = all_pass(r, "sampler_total_variation", d) && ok;
  double min_p = 1.0;
  for (const auto& v : select(r, "sampler_chi_square")) {
    min_p = std::min(min_p, v.value);
  }
  d += " min p=" + g(min_p);
  return {ok, d};
}

Outcome c4_reduced_marginals() {
  ExperimentSpec spec;
  spec.experiment = Experiment::theorem2_marginals;
  spec.betas = {1.0};
  spec.t_grid = {15.0};
  spec.u_grid = {3.0, 7.5, 12.0};
  spec.survivors = 2000;
  spec.samples = 0;
  const auto r = run(spec);
  std::string d;
  bool ok = all_pass(r, "reduced_marginal_exact", d);
  ok = no_failures(r, d) && ok;
  for (const auto& v : select(r, "reduced_marginal_exact")) {
    d += " z=" + g(v.value);
  }
  return {ok, d};
}

Outcome c5_zubkov() {
  ExperimentSpec heavy;
  heavy.experiment = Experiment::zubkov_mrca;
  heavy.betas = {1.0};
  heavy.t_grid = {10.0, 20.0, 40.0};
  heavy.survivors = 2000;
  const auto rh = run(heavy);
  std::string d;
  bool ok = all_pass(rh, "mrca_trend", d);
  ok = no_failures(rh, d) && ok;
  for (const auto& s : rh.statistics) {
    if (s.contains("ks_limit")) {
      d += " ks(t=" + g(s["t"].get<double>()) + ")=" + g(s["ks_limit"].get<double>());
    }
  }
  ExperimentSpec binary;
  binary.experiment = Experiment::zubkov_mrca;
  binary.law = "binary";
  binary.t_grid = {50.0};
  binary.survivors = 10000;
  const auto rb = run(binary);
  ok = all_pass(rb, "mrca_uniform", d) && ok;
  ok = no_failures(rb, d) && ok;
  return {ok, d};
}

Outcome c6_size_law() {
  ExperimentSpec spec;
  spec.experiment = Experiment::theorem1;
  spec.betas = {1.0};
  spec.t_grid = {15.0, 30.0};
  spec.survivors = 4000;
  const auto r = run(spec);
  std::string d;
  bool ok = all_pass(r, "size_law_trend", d);
  ok = all_pass(r, "size_law_level", d) && ok;
  ok = no_failures(r, d) && ok;
  for (const auto& s : r.statistics) {
    if (s.contains("ks")) {
      d += " ks(t=" + g(s["t"].get<double>()) + ")=" + g(s["ks"].get<double>()) +
           " atom=" + g(s["exact_atom_at_one"].get<double>());
    }
  }
  return {ok, d};
}

Outcome c7_scaling_exponents() {
  bool ok = true;
  std::string d;
  for (double beta : {1.0, 3.0}) {
    const auto idx = scaling_indices(beta, 1e6);
    const double ce = std::abs(idx.c_index / idx.c_target - 1.0);
    const double qe = std::abs(idx.q_index / idx.q_target - 1.0);
    ok = ok && ce < 0.1 && qe < 0.1;
    d += " beta=" + g(beta) + " c " + g(idx.c_index) + " vs " + g(idx.c_target) + ", q " +
         g(idx.q_index) + " vs " + g(idx.q_target);
  }
  return {ok, d};
}

Outcome c8_limit_marginals() {
  ExperimentSpec spec;
  spec.experiment = Experiment::theorem2_marginals;
  spec.betas = {0.2, 1.0, 5.0};
  spec.x_grid = {0.2, 0.5, 0.6};
  spec.survivors = 0;
  spec.samples = 100'000;
  const auto r = run(spec);
  std::string d;
  bool ok = all_pass(r, "limit_marginal_fit", d);
  ok = all_pass(r, "two_point_coupling", d) && ok;
  all_pass(r, "tree_vs_marginal_sampler", d);
  double min_p = 1.0;
  for (const auto& v : select(r, "limit_marginal_fit")) {
    min_p = std::min(min_p, v.value);
  }
  d += " min p=" + g(min_p);
  return {ok, d};
}

Outcome c9_coalescent() {
  double worst = 0.0;
  for (int i = 0; i <= 9; ++i) {
    worst = std::max(worst, verify_link(0.1 * i, 50));
  }
  return {worst < 1e-12, "max discrepancy over alpha in {0..0.9}, n<=50: " + g(worst)};
}

Outcome c10_figure1() {
  ExperimentSpec spec;
  spec.experiment = Experiment::figure1_trajectories;
  spec.alphas = {1.0, 0.3, 0.1};
  spec.betas = {5.0, 1.0, 0.2};
  spec.trees = 200;
  const auto r = run(spec);
  std::string d;
  bool ok = all_pass(r, "figure1_alpha_order", d);
  ok = all_pass(r, "figure1_beta_peak", d) && ok;
  for (const auto& s : r.statistics) {
    d += " " + s["block"].get<std::string>() + ":" + g(s["median_log_R"].get<double>());
  }
  return {ok, d};
}

Outcome c11_engineering() {
  ExperimentSpec spec;
  spec.experiment = Experiment::theorem2_marginals;
  spec.betas = {1.0};
  spec.t_grid = {15.0};
  spec.survivors = 500;
  spec.samples = 5000;
  spec.workers = 1;
  const std::string one = run(spec).to_json(false).dump();
  spec.workers = 4;
  const std::string four = run(spec).to_json(false).dump();
  ExperimentSpec zub;
  zub.experiment = Experiment::zubkov_mrca;
  zub.t_grid = {10.0, 20.0};
  zub.survivors = 300;
  zub.workers = 1;
  const std::string z1 = run(zub).to_json(false).dump();
  zub.workers = 3;
  const std::string z3 = run(zub).to_json(false).dump();
  const bool identical = one == four && z1 == z3;

  SimConfig cfg;
  cfg.horizon = 20.0;
  const WorkStats w = work_stats(OffspringLaw::heavy_tail(1.0), cfg, 100'000, 1);
  const double limit = 2.0 * (cfg.horizon + 1.0);
  const bool cheap = w.mean_events <= limit;
  return {identical && cheap, std::string("reports ") + (identical ? "byte-identical" : "DIFFER") +
                                  " across worker counts; mean events " + g(w.mean_events) +
                                  " <= " + g(limit)};
}

}  // namespace

int main() {
  std::setvbuf(stdout, nullptr, _IOLBF, 0);
  const std::vector<Criterion> criteria{
      {1, "analytic_identities", 10.0, c1_analytic_identities},
      {2, "binary_closed_form", 1.0, c2_binary_closed_form},
      {3, "sampler_correctness", 30.0, c3_samplers},
      {4, "finite_t_reduced_marginals", 300.0, c4_reduced_marginals},
      {5, "zubkov_mrca_laws", 900.0, c5_zubkov},
      {6, "theorem1_size_law", 600.0, c6_size_law},
      {7, "theorem1_scaling_exponents", 10.0, c7_scaling_exponents},
      {8, "theorem2_limit_marginals", 120.0, c8_limit_marginals},
      {9, "coalescent_link", 1.0, c9_coalescent},
      {10, "figure1_ordering", 120.0, c10_figure1},
      {11, "determinism_and_work", 600.0, c11_engineering},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o{false, ""};
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("%s C%d %s (%.2f s of %.0f s)%s |%s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                secs, c.budget_seconds, in_time ? "" : " over budget", o.detail.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
