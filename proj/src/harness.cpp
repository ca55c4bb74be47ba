#include "rbp/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "rbp/coalescent.hpp"
#include "rbp/error.hpp"
#include "rbp/stats.hpp"

namespace rbp::harness {

using nlohmann::json;

namespace {

const std::vector<std::pair<Experiment, std::string>>& experiment_table() {
  static const std::vector<std::pair<Experiment, std::string>> table{
      {Experiment::theorem1, "theorem1"},
      {Experiment::zubkov_mrca, "zubkov_mrca"},
      {Experiment::theorem2_marginals, "theorem2_marginals"},
      {Experiment::figure1_trajectories, "figure1_trajectories"},
      {Experiment::coalescent_link, "coalescent_link"},
      {Experiment::oracle_consistency, "oracle_consistency"},
      {Experiment::sampler_fit, "sampler_fit"},
  };
  return table;
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Seed for one grid point of one block; stable under reordering of other blocks.
std::uint64_t point_seed(std::uint64_t master, std::uint64_t block, std::uint64_t point) {
  return derive_seed(derive_seed(master, block), point);
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) {
      return false;
    }
  }
  return true;
}

// Histogram over 0..top-1 plus one bucket for >= top.
std::vector<double> histogram(const std::vector<std::uint64_t>& values, std::uint64_t top) {
  std::vector<double> h(top + 1, 0.0);
  for (auto v : values) {
    h[std::min(v, top)] += 1.0;
  }
  return h;
}

json ecdf_quantiles(std::vector<double> sorted) {
  json q = json::object();
  for (int d = 1; d <= 9; ++d) {
    const auto idx = static_cast<std::size_t>(std::floor(d / 10.0 * static_cast<double>(sorted.size() - 1)));
    q["q" + std::to_string(d * 10)] = sorted[idx];
  }
  return q;
}

void write_ecdf(const std::string& dir, const std::string& name, const std::vector<double>& sorted,
                const std::vector<double>& reference) {
  if (dir.empty()) {
    return;
  }
  std::vector<std::string> rows;
  rows.reserve(sorted.size());
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    rows.push_back(fmt(sorted[i]) + "," + fmt(static_cast<double>(i + 1) / n) + "," +
                   fmt(reference[i]));
  }
  write_csv(dir, name, "value,ecdf,reference_cdf", rows);
}

void add(ExperimentReport& r, std::string criterion, std::string kind, bool pass, double value,
         double threshold, std::string detail) {
  r.verdicts.push_back(
      {std::move(criterion), std::move(kind), pass, value, threshold, std::move(detail)});
}

OffspringLaw law_for(const ExperimentSpec& spec, double beta) {
  if (spec.law == "binary") {
    return OffspringLaw::binary();
  }
  return OffspringLaw::heavy_tail(beta);
}

SimConfig sim_config(const ExperimentSpec& spec, double t, std::uint64_t seed) {
  SimConfig c;
  c.horizon = t;
  c.max_events = spec.max_events;
  c.max_population = spec.max_population;
  c.seed = seed;
  return c;
}

// Censoring must stay below 0.1% of the survivors behind a statistic.
void censoring_verdict(ExperimentReport& r, const SurvivorSet& set, const std::string& where) {
  const double n = static_cast<double>(std::max<std::size_t>(1, set.survivors.size()));
  const double rate = static_cast<double>(set.censored) / n;
  add(r, "censoring_rate", "hard", rate < 1e-3, rate, 1e-3, where);
  r.censored += set.censored;
  r.rejected += set.attempts - set.survivors.size() - set.censored;
}

bool budget_check(ExperimentReport& r, const SurvivorSet& set, std::uint64_t target,
                  const std::string& where) {
  if (!set.budget_exhausted) {
    return true;
  }
  std::ostringstream msg;
  msg << where << ": survival budget exhausted after " << set.attempts << " replicates with "
      << set.survivors.size() << " of " << target << " survivors";
  r.failures.push_back(msg.str());
  return false;
}

// P(tau(t) <= t x | Z(t) > 0) at sorted x, walking q(t x) forward.
void exact_mrca_cdf(const AnalyticModel& model, double t, const std::vector<double>& xs,
                    std::vector<double>& at, std::vector<double>& left) {
  const double gt = model.slowly_varying_log(model.log_survival_ode(t));
  double q = 0.0;
  double prev = 0.0;
  at.clear();
  left.clear();
  for (double x : xs) {
    if (x > prev) {
      q = model.advance_log(q, t * (x - prev));
      prev = x;
    }
    const double value = std::min(1.0, gt / model.slowly_varying_log(q));
    at.push_back(value);
    left.push_back(x == 0.0 ? 0.0 : value);
  }
}

// ------------------------------------------------------------------ experiments

void run_oracle(const ExperimentSpec& spec, ExperimentReport& r) {
  for (double beta : spec.betas) {
    const AnalyticModel model(OffspringLaw::heavy_tail(beta));
    const OracleGrid g = oracle_grid(model, spec.s_grid, spec.t_grid);
    r.statistics.push_back({{"beta", beta},
                            {"flow_residual", g.flow_residual},
                            {"survival_residual", g.survival_residual},
                            {"semigroup_residual", g.semigroup_residual},
                            {"derivative_residual", g.derivative_residual}});
    const std::string where = "beta=" + fmt(beta);
    add(r, "flow_identity", "hard", g.flow_residual < 1e-6, g.flow_residual, 1e-6, where);
    add(r, "survival_identity", "hard", g.survival_residual < 1e-6, g.survival_residual, 1e-6, where);
    add(r, "semigroup", "hard", g.semigroup_residual < 1e-6, g.semigroup_residual, 1e-6, where);
    add(r, "log_survival_derivative", "hard", g.derivative_residual < 1e-4, g.derivative_residual,
        1e-4, where);
  }
  const double binary = binary_survival_residual(100.0);
  r.statistics.push_back({{"law", "binary"}, {"closed_form_residual", binary}});
  add(r, "binary_closed_form", "hard", binary < 1e-6, binary, 1e-6, "t <= 100");
}

void run_coalescent(const ExperimentSpec& spec, ExperimentReport& r) {
  std::vector<std::string> rows;
  for (double alpha : spec.alphas) {
    const double d = verify_link(alpha, spec.nmax);
    r.statistics.push_back({{"alpha", alpha}, {"nmax", spec.nmax}, {"max_discrepancy", d}});
    add(r, "coalescent_link", "hard", d < 1e-12, d, 1e-12, "alpha=" + fmt(alpha));
    for (const auto& row : link_table(alpha, spec.nmax)) {
      rows.push_back(fmt(alpha) + "," + std::to_string(row.n) + "," + std::to_string(row.k) + "," +
                     fmt(row.merger_prob) + "," + fmt(row.conditional_offspring_prob) + "," +
                     fmt(std::abs(row.merger_prob - row.conditional_offspring_prob)));
    }
  }
  if (!spec.output_dir.empty()) {
    write_csv(spec.output_dir, "coalescent_link.csv",
              "alpha,n,k,merger_prob,conditional_offspring_prob,discrepancy", rows);
  }
}

void run_theorem1(const ExperimentSpec& spec, ExperimentReport& r) {
  for (std::size_t b = 0; b < spec.betas.size(); ++b) {
    const double beta = spec.betas[b];
    const OffspringLaw law = OffspringLaw::heavy_tail(beta);
    const AnalyticModel model(law);
    const LimitLaws limit = limit_cdfs(beta);
    std::vector<double> ks;
    for (std::size_t i = 0; i < spec.t_grid.size(); ++i) {
      const double t = spec.t_grid[i];
      const std::string where = "beta=" + fmt(beta) + " t=" + fmt(t);
      const auto cfg = sim_config(spec, t, point_seed(spec.seed, 1000 + b, i));
      const auto set = collect_survivors(law, cfg, spec.survivors, spec.survival_budget,
                                         spec.workers, false);
      censoring_verdict(r, set, where);
      if (!budget_check(r, set, spec.survivors, where)) {
        continue;
      }
      const double c = model.size_scale(t);
      std::vector<double> x;
      x.reserve(set.survivors.size());
      for (const auto& s : set.survivors) {
        x.push_back(std::log(static_cast<double>(s.z_t)) / c);
      }
      std::sort(x.begin(), x.end());
      std::vector<double> ref;
      ref.reserve(x.size());
      for (double v : x) {
        ref.push_back(limit.size_cdf(v));
      }
      const double d = stats::ks_distance_sorted(x, [&](double v) { return limit.size_cdf(v); });
      const double q = model.log_survival(t);
      const double atom = model.slowly_varying_log(q) / law.pmf(0);
      ks.push_back(d);
      r.statistics.push_back({{"beta", beta},
                              {"t", t},
                              {"survivors", set.survivors.size()},
                              {"attempts", set.attempts},
                              {"censored", set.censored},
                              {"survival_fraction", static_cast<double>(set.survivors.size()) /
                                                        static_cast<double>(set.attempts)},
                              {"survival_exact", std::exp(-q)},
                              {"size_scale", c},
                              {"ks", d},
                              {"exact_atom_at_one", atom},
                              {"ecdf_quantiles", ecdf_quantiles(x)}});
      write_ecdf(spec.output_dir, "theorem1_beta" + fmt(beta) + "_t" + fmt(t) + ".csv", x, ref);
    }
    if (ks.size() == spec.t_grid.size() && ks.size() >= 2) {
      add(r, "size_law_trend", "trend", strictly_decreasing(ks), ks.back(), ks.front(),
          "KS along t grid must strictly decrease, beta=" + fmt(beta));
    }
    if (ks.size() == spec.t_grid.size() && !ks.empty()) {
      add(r, "size_law_level", "trend", ks.back() < 0.15, ks.back(), 0.15,
          "KS at the largest t, beta=" + fmt(beta));
    }
    const auto idx = scaling_indices(beta, spec.scaling_t);
    const double c_err = std::abs(idx.c_index / idx.c_target - 1.0);
    const double q_err = std::abs(idx.q_index / idx.q_target - 1.0);
    r.statistics.push_back({{"beta", beta},
                            {"scaling_t", spec.scaling_t},
                            {"c_index", idx.c_index},
                            {"c_target", idx.c_target},
                            {"q_index", idx.q_index},
                            {"q_target", idx.q_target}});
    add(r, "scaling_exponent_c", "hard", c_err < 0.1, c_err, 0.1,
        "relative error of the c index, beta=" + fmt(beta));
    add(r, "scaling_exponent_q", "hard", q_err < 0.1, q_err, 0.1,
        "relative error of the q index, beta=" + fmt(beta));
  }
}

void run_zubkov(const ExperimentSpec& spec, ExperimentReport& r) {
  const bool binary = spec.law == "binary";
  const std::vector<double> betas = binary ? std::vector<double>{1.0} : spec.betas;
  for (std::size_t b = 0; b < betas.size(); ++b) {
    const double beta = betas[b];
    const OffspringLaw law = law_for(spec, beta);
    const AnalyticModel model(law);
    const double exponent = binary ? 1.0 : beta / (1.0 + beta);
    std::vector<double> ks;
    for (std::size_t i = 0; i < spec.t_grid.size(); ++i) {
      const double t = spec.t_grid[i];
      const std::string where = (binary ? std::string("binary") : "beta=" + fmt(beta)) + " t=" + fmt(t);
      const auto cfg = sim_config(spec, t, point_seed(spec.seed, 2000 + b, i));
      const auto set = collect_survivors(law, cfg, spec.survivors, spec.survival_budget,
                                         spec.workers, true);
      censoring_verdict(r, set, where);
      if (!budget_check(r, set, spec.survivors, where)) {
        continue;
      }
      std::vector<double> x;
      for (const auto& s : set.survivors) {
        x.push_back(s.tau / t);
      }
      std::sort(x.begin(), x.end());
      const auto limit_cdf = [exponent](double v) { return std::pow(std::clamp(v, 0.0, 1.0), exponent); };
      const double d = stats::ks_distance_sorted(x, limit_cdf);
      std::vector<double> at;
      std::vector<double> left;
      exact_mrca_cdf(model, t, x, at, left);
      const double d_exact = stats::ks_distance_values(x, at, left);
      ks.push_back(d);
      r.statistics.push_back({{"law", law.describe()},
                              {"t", t},
                              {"survivors", set.survivors.size()},
                              {"attempts", set.attempts},
                              {"censored", set.censored},
                              {"ks_limit", d},
                              {"ks_exact", d_exact},
                              {"exact_atom_at_zero", at.empty() ? 0.0 : at.front()},
                              {"ecdf_quantiles", ecdf_quantiles(x)}});
      std::vector<double> ref;
      for (double v : x) {
        ref.push_back(limit_cdf(v));
      }
      write_ecdf(spec.output_dir, "zubkov_" + std::string(binary ? "binary" : "beta" + fmt(beta)) +
                                      "_t" + fmt(t) + ".csv",
                 x, ref);
      add(r, "mrca_exact_ks", "info", true, d_exact, 0.0,
          "KS against the finite-t law, " + where);
      if (binary) {
        add(r, "mrca_uniform", "hard", d < 0.05, d, 0.05, where);
      }
    }
    if (!binary && ks.size() == spec.t_grid.size() && ks.size() >= 2) {
      add(r, "mrca_trend", "trend", strictly_decreasing(ks), ks.back(), ks.front(),
          "KS to x^(beta/(1+beta)) must strictly decrease along t, beta=" + fmt(beta));
    }
  }
}

void limit_tier(const ExperimentSpec& spec, ExperimentReport& r, std::size_t b, double beta) {
  const LimitMode mode = LimitMode::zero(beta);
  const double exponent = mode.exponent();
  LimitConfig lc;
  lc.mode = mode;
  lc.resolution = spec.resolution;
  lc.node_cap = spec.node_cap;
  lc.horizon = *std::max_element(spec.x_grid.begin(), spec.x_grid.end());
  const std::uint64_t seed = point_seed(spec.seed, 3500 + b, 0);
  const auto per_tree = parallel_map<std::vector<std::uint64_t>>(
      0, spec.samples, spec.workers, [&](std::uint64_t i) {
        Stream rng(seed, i);
        const auto tree = sample_limit_tree(lc, rng);
        auto counts = trajectory_at(tree, spec.x_grid);
        counts.push_back(tree.truncated ? 1 : 0);
        return counts;
      });
  std::uint64_t truncated = 0;
  for (const auto& c : per_tree) {
    truncated += c.back();
  }
  const std::string tag = "beta=" + fmt(beta);
  constexpr std::uint64_t kTop = 4096;
  for (std::size_t xi = 0; xi < spec.x_grid.size(); ++xi) {
    const double x = spec.x_grid[xi];
    std::vector<std::uint64_t> values;
    values.reserve(per_tree.size());
    for (const auto& c : per_tree) {
      values.push_back(c[xi]);
    }
    const double gamma = std::pow(1.0 - x, exponent);
    const auto observed = histogram(values, kTop);
    std::vector<double> expected(kTop + 1, 0.0);
    const double n = static_cast<double>(values.size());
    for (std::uint64_t k = 1; k < kTop; ++k) {
      expected[k] = n * sibuya_pmf(gamma, k);
    }
    expected[kTop] = n * sibuya_tail(gamma, kTop - 1);
    const std::string where = tag + " x=" + fmt(x);
    json entry = {{"beta", beta}, {"x", x}, {"trees", values.size()}, {"truncated_trees", truncated}};
    if (x == 0.0) {
      const bool all_one = std::all_of(values.begin(), values.end(), [](auto v) { return v == 1; });
      add(r, "limit_marginal_fit", "hard", all_one, all_one ? 1.0 : 0.0, 1.0, where + " R(0)=1");
    } else {
      const auto chi = stats::chi_square(observed, expected);
      entry["chi_square"] = chi.statistic;
      entry["dof"] = chi.dof;
      entry["p_value"] = chi.p_value;
      add(r, "limit_marginal_fit", "hard", chi.p_value > 0.01, chi.p_value, 0.01, where);
      // Same marginal from the tree-free sampler.
      const MarginalSampler sampler(mode, x);
      const std::uint64_t mseed = point_seed(spec.seed, 3600 + b, xi);
      const auto direct = parallel_map<std::uint64_t>(0, spec.samples, spec.workers,
                                                      [&](std::uint64_t i) {
                                                        Stream rng(mseed, i);
                                                        return sampler(rng);
                                                      });
      const auto two = stats::chi_square_two_sample(observed, histogram(direct, kTop));
      entry["two_sample_p_value"] = two.p_value;
      add(r, "tree_vs_marginal_sampler", "hard", two.p_value > 0.01, two.p_value, 0.01, where);
    }
    r.statistics.push_back(entry);
  }
  // P(R(y) = 1 | R(x) = 1) at the first and last grid points.
  const double x0 = spec.x_grid.front();
  const double y0 = spec.x_grid.back();
  std::uint64_t given = 0;
  std::uint64_t both = 0;
  for (const auto& c : per_tree) {
    if (c.front() == 1) {
      ++given;
      both += c[spec.x_grid.size() - 1] == 1 ? 1 : 0;
    }
  }
  const double p = limit_cdfs(beta).marginal_one(x0, y0);
  const double z = stats::binomial_z(both, given, p);
  const auto ci = stats::binomial_interval(both, given);
  r.statistics.push_back({{"beta", beta},
                          {"x", x0},
                          {"y", y0},
                          {"given", given},
                          {"both", both},
                          {"empirical", ci.estimate},
                          {"ci_lower", ci.lower},
                          {"ci_upper", ci.upper},
                          {"exact", p},
                          {"z", z}});
  add(r, "two_point_coupling", "hard", std::abs(z) <= 3.0, z, 3.0,
      tag + " (x,y)=(" + fmt(x0) + "," + fmt(y0) + ")");
}

void prelimit_tier(const ExperimentSpec& spec, ExperimentReport& r, std::size_t b, double beta) {
  const OffspringLaw law = OffspringLaw::heavy_tail(beta);
  const AnalyticModel model(law);
  const double exponent = beta / (1.0 + beta);
  for (std::size_t i = 0; i < spec.t_grid.size(); ++i) {
    const double t = spec.t_grid[i];
    std::vector<double> us;
    for (double u : spec.u_grid) {
      if (u <= t) {
        us.push_back(u);
      }
    }
    const std::string where = "beta=" + fmt(beta) + " t=" + fmt(t);
    const auto cfg = sim_config(spec, t, point_seed(spec.seed, 3000 + b, i));
    const auto set =
        collect_survivors(law, cfg, spec.survivors, spec.survival_budget, spec.workers, true, us);
    censoring_verdict(r, set, where);
    if (!budget_check(r, set, spec.survivors, where)) {
      continue;
    }
    const auto n = static_cast<std::uint64_t>(set.survivors.size());
    for (std::size_t j = 0; j < us.size(); ++j) {
      const double u = us[j];
      std::vector<std::uint64_t> values;
      for (const auto& s : set.survivors) {
        values.push_back(s.reduced_at[j]);
      }
      const auto ones = static_cast<std::uint64_t>(std::count(values.begin(), values.end(), 1));
      const double exact = model.reduced_prob_one(u, t);
      const double z = stats::binomial_z(ones, n, exact);
      const auto ci = stats::binomial_interval(ones, n);
      // Asymptotic comparison against the limit marginal at x = u/t.
      const double x = u / t;
      const double gamma = std::pow(1.0 - x, exponent);
      constexpr std::uint64_t kTop = 64;
      const auto observed = histogram(values, kTop);
      std::vector<double> probs(kTop + 1, 0.0);
      for (std::uint64_t k = 1; k < kTop; ++k) {
        probs[k] = sibuya_pmf(gamma, k);
      }
      probs[kTop] = sibuya_tail(gamma, kTop - 1);
      const double tv = stats::total_variation(observed, probs);
      r.statistics.push_back({{"beta", beta},
                              {"t", t},
                              {"u", u},
                              {"survivors", n},
                              {"attempts", set.attempts},
                              {"p_one_empirical", ci.estimate},
                              {"ci_lower", ci.lower},
                              {"ci_upper", ci.upper},
                              {"p_one_exact", exact},
                              {"z", z},
                              {"p_one_limit", gamma},
                              {"tv_to_limit_marginal", tv}});
      add(r, "reduced_marginal_exact", "hard", std::abs(z) <= 3.0, z, 3.0,
          where + " u=" + fmt(u));
      add(r, "reduced_marginal_limit", "info", true, tv, 0.0,
          "TV to the Sibuya limit marginal, " + where + " u=" + fmt(u));
    }
  }
}

void run_theorem2(const ExperimentSpec& spec, ExperimentReport& r) {
  for (std::size_t b = 0; b < spec.betas.size(); ++b) {
    if (spec.survivors > 0) {
      prelimit_tier(spec, r, b, spec.betas[b]);
    }
    if (spec.samples > 0) {
      limit_tier(spec, r, b, spec.betas[b]);
    }
  }
}

void run_figure1(const ExperimentSpec& spec, ExperimentReport& r) {
  struct Block {
    std::string name;
    LimitMode mode;
  };
  std::vector<Block> blocks;
  for (double a : spec.alphas) {
    blocks.push_back({"alpha" + fmt(a), LimitMode::alpha(a)});
  }
  for (double b : spec.betas) {
    blocks.push_back({"beta" + fmt(b), LimitMode::zero(b)});
  }
  const double x_final = spec.x_grid.back();
  std::map<std::string, double> medians;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& block = blocks[bi];
    LimitConfig lc;
    lc.mode = block.mode;
    lc.resolution = spec.resolution;
    lc.node_cap = spec.node_cap;
    lc.horizon = x_final;
    const std::uint64_t seed = point_seed(spec.seed, 4000 + bi, 0);
    struct TreeRow {
      std::vector<std::uint64_t> counts;
      bool truncated;
      double exact_until;
    };
    const auto trees = parallel_map<TreeRow>(0, spec.trees, spec.workers, [&](std::uint64_t i) {
      Stream rng(seed, i);
      const auto tree = sample_limit_tree(lc, rng);
      return TreeRow{trajectory_at(tree, spec.x_grid), tree.truncated, tree.exact_until};
    });
    std::vector<std::string> rows;
    std::vector<double> tree_logs;
    std::uint64_t truncated = 0;
    for (std::size_t i = 0; i < trees.size(); ++i) {
      truncated += trees[i].truncated ? 1 : 0;
      for (std::size_t j = 0; j < spec.x_grid.size(); ++j) {
        rows.push_back(std::to_string(i) + "," + fmt(spec.x_grid[j]) + "," +
                       std::to_string(trees[i].counts[j]) + "," +
                       (trees[i].truncated && spec.x_grid[j] >= trees[i].exact_until ? "1" : "0"));
      }
      tree_logs.push_back(std::log(static_cast<double>(trees[i].counts.back())));
    }
    if (!spec.output_dir.empty()) {
      write_csv(spec.output_dir, "figure1_" + block.name + ".csv", "replicate_id,x,R,lower_bound",
                rows);
    }
    const double exact_median =
        median_log_marginal(block.mode, x_final, spec.trees, point_seed(spec.seed, 4100 + bi, 0));
    medians[block.name] = exact_median;
    r.statistics.push_back({{"block", block.name},
                            {"x", x_final},
                            {"trees", spec.trees},
                            {"truncated_trees", truncated},
                            {"median_log_R", exact_median},
                            {"median_log_R_trees_lower_bound", stats::median(tree_logs)}});
  }
  // Growth increases as alpha decreases.
  std::vector<double> alphas = spec.alphas;
  std::sort(alphas.begin(), alphas.end(), std::greater<>());
  if (alphas.size() >= 2) {
    bool ok = true;
    std::string chain;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      const double m = medians["alpha" + fmt(alphas[i])];
      chain += (i ? " <= " : "") + fmt(m);
      if (i > 0 && m < medians["alpha" + fmt(alphas[i - 1])]) {
        ok = false;
      }
    }
    add(r, "figure1_alpha_order", "trend", ok, medians["alpha" + fmt(alphas.back())],
        medians["alpha" + fmt(alphas.front())], "median ln R(x) by decreasing alpha: " + chain);
  }
  // Beta family peaks at beta = 1.
  const bool has_peak = std::count(spec.betas.begin(), spec.betas.end(), 1.0) > 0;
  if (has_peak && spec.betas.size() >= 2) {
    const double peak = medians["beta1"];
    double worst = -std::numeric_limits<double>::infinity();
    std::string others;
    for (double b : spec.betas) {
      if (b != 1.0) {
        worst = std::max(worst, medians["beta" + fmt(b)]);
        others += " beta=" + fmt(b) + ":" + fmt(medians["beta" + fmt(b)]);
      }
    }
    add(r, "figure1_beta_peak", "trend", peak >= worst, peak, worst,
        "median ln R(x) at beta=1 must dominate" + others);
  }
  std::vector<double> betas = spec.betas;
  std::sort(betas.begin(), betas.end());
  bool monotone = true;
  for (std::size_t i = 1; i < betas.size(); ++i) {
    monotone = monotone && medians["beta" + fmt(betas[i])] >= medians["beta" + fmt(betas[i - 1])];
  }
  add(r, "figure1_beta_monotone", "info", monotone, 0.0, 0.0,
      "median ln R(x) nondecreasing in beta");
}

void run_sampler_fit(const ExperimentSpec& spec, ExperimentReport& r) {
  std::vector<OffspringLaw> laws;
  for (double b : spec.betas) {
    laws.push_back(OffspringLaw::heavy_tail(b));
  }
  for (double a : spec.alphas) {
    laws.push_back(a == 0.0 ? OffspringLaw::zero_limit() : OffspringLaw::alpha_limit(a));
  }
  laws.push_back(OffspringLaw::sibuya(0.3));
  laws.push_back(OffspringLaw::sibuya(0.7));
  laws.push_back(OffspringLaw::binary());
  for (std::size_t i = 0; i < laws.size(); ++i) {
    const auto fit = sampler_fit(laws[i], spec.samples, point_seed(spec.seed, 5000, i), spec.workers);
    r.statistics.push_back({{"law", fit.law},
                            {"draws", fit.draws},
                            {"chi_square", fit.chi_square},
                            {"dof", fit.dof},
                            {"p_value", fit.p_value},
                            {"total_variation", fit.total_variation}});
    add(r, "sampler_chi_square", "hard", fit.p_value > 0.001, fit.p_value, 0.001, fit.law);
    add(r, "sampler_total_variation", "hard", fit.total_variation < 5e-3, fit.total_variation, 5e-3,
        fit.law);
  }
}

std::vector<double> default_x_grid_figure() {
  // Uniform in -ln(1 - x) from 0 to -ln(0.01).
  std::vector<double> xs;
  for (int i = 0; i < 100; ++i) {
    xs.push_back(-std::expm1(i / 99.0 * std::log(0.01)));
  }
  xs.back() = 0.99;
  return xs;
}

}  // namespace

std::string to_string(Experiment e) {
  for (const auto& [id, name] : experiment_table()) {
    if (id == e) {
      return name;
    }
  }
  return "unknown";
}

Experiment experiment_from_string(const std::string& name) {
  for (const auto& [id, n] : experiment_table()) {
    if (n == name) {
      return id;
    }
  }
  throw ParameterError("unknown experiment '" + name + "'");
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& entry : experiment_table()) {
      out.push_back(entry.second);
    }
    return out;
  }();
  return names;
}

ExperimentSpec ExperimentSpec::resolved() const {
  ExperimentSpec s = *this;
  auto fill = [](std::vector<double>& v, std::vector<double> d) {
    if (v.empty()) {
      v = std::move(d);
    }
  };
  switch (experiment) {
    case Experiment::oracle_consistency:
      fill(s.betas, {0.2, 1.0, 5.0});
      fill(s.s_grid, {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
      fill(s.t_grid, {0.5, 1.0, 2.0, 5.0, 10.0});
      break;
    case Experiment::coalescent_link:
      fill(s.alphas, {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
      break;
    case Experiment::theorem1:
      fill(s.betas, {1.0});
      fill(s.t_grid, {15.0, 30.0});
      break;
    case Experiment::zubkov_mrca:
      fill(s.betas, {1.0});
      fill(s.t_grid, s.law == "binary" ? std::vector<double>{50.0}
                                       : std::vector<double>{10.0, 20.0, 40.0});
      break;
    case Experiment::theorem2_marginals:
      fill(s.betas, {1.0});
      fill(s.t_grid, {15.0});
      fill(s.u_grid, {3.0, 7.5, 12.0});
      fill(s.x_grid, {0.2, 0.5, 0.6});
      break;
    case Experiment::figure1_trajectories:
      fill(s.alphas, {1.0, 0.3, 0.1});
      fill(s.betas, {5.0, 1.0, 0.2});
      fill(s.x_grid, default_x_grid_figure());
      break;
    case Experiment::sampler_fit:
      fill(s.betas, {0.2, 1.0, 5.0});
      fill(s.alphas, {0.0, 0.3, 0.7, 1.0});
      break;
  }
  return s;
}

void ExperimentSpec::validate() const {
  auto positive = [](const std::vector<double>& v, const char* what) {
    for (double x : v) {
      if (!(x > 0.0) || !std::isfinite(x)) {
        throw ParameterError(std::string(what) + " entries must be positive and finite");
      }
    }
  };
  if (law != "heavy" && law != "binary") {
    throw ParameterError("law must be 'heavy' or 'binary'");
  }
  positive(betas, "betas");
  positive(t_grid, "t_grid");
  for (double a : alphas) {
    const bool coalescent = experiment == Experiment::coalescent_link;
    if (!(a >= 0.0 && (coalescent ? a < 1.0 : a <= 1.0))) {
      throw ParameterError(coalescent ? "alphas must lie in [0,1)" : "alphas must lie in [0,1]");
    }
  }
  if (experiment == Experiment::figure1_trajectories) {
    for (double a : alphas) {
      if (a == 0.0) {
        throw ParameterError("figure1 alpha blocks need alpha in (0,1]; use a beta block instead");
      }
    }
  }
  for (double u : u_grid) {
    if (!(u >= 0.0)) {
      throw ParameterError("u_grid entries must be nonnegative");
    }
  }
  if (!std::is_sorted(x_grid.begin(), x_grid.end())) {
    throw ParameterError("x_grid must be sorted");
  }
  for (double x : x_grid) {
    if (!(x >= 0.0 && x < 1.0 - resolution)) {
      throw ParameterError("x_grid entries must lie in [0, 1 - resolution)");
    }
  }
  for (double s : s_grid) {
    if (!(s >= 0.0 && s < 1.0)) {
      throw ParameterError("s_grid entries must lie in [0,1)");
    }
  }
  if (!(resolution > 0.0 && resolution < 0.5)) {
    throw ParameterError("resolution must lie in (0, 0.5)");
  }
  if (nmax < 2) {
    throw ParameterError("nmax must be at least 2");
  }
  if (trees == 0 || survival_budget == 0 || max_events == 0 || max_population == 0 ||
      node_cap == 0) {
    throw ParameterError("counts and caps must be positive");
  }
  if (!(scaling_t > 0.0)) {
    throw ParameterError("scaling_t must be positive");
  }
  const bool sims = experiment == Experiment::theorem1 || experiment == Experiment::zubkov_mrca;
  if (sims && survivors == 0) {
    throw ParameterError("survivors must be positive");
  }
  if ((experiment == Experiment::sampler_fit) && samples == 0) {
    throw ParameterError("samples must be positive");
  }
}

json to_json(const ExperimentSpec& s) {
  return {{"experiment", to_string(s.experiment)},
          {"law", s.law},
          {"betas", s.betas},
          {"alphas", s.alphas},
          {"t_grid", s.t_grid},
          {"u_grid", s.u_grid},
          {"x_grid", s.x_grid},
          {"s_grid", s.s_grid},
          {"survivors", s.survivors},
          {"samples", s.samples},
          {"trees", s.trees},
          {"nmax", s.nmax},
          {"survival_budget", s.survival_budget},
          {"max_events", s.max_events},
          {"max_population", s.max_population},
          {"node_cap", s.node_cap},
          {"resolution", s.resolution},
          {"scaling_t", s.scaling_t},
          {"seed", s.seed}};
}

ExperimentSpec spec_from_json(const json& j) {
  if (!j.is_object()) {
    throw ParameterError("spec must be a JSON object");
  }
  static const std::set<std::string> known{
      "experiment", "law",       "betas",     "alphas", "t_grid",          "u_grid",
      "x_grid",     "s_grid",    "survivors", "samples", "trees",          "nmax",
      "survival_budget", "max_events", "max_population", "node_cap", "resolution", "scaling_t",
      "seed"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) {
      throw ParameterError("unknown spec key '" + item.key() + "'");
    }
  }
  ExperimentSpec s;
  try {
    s.experiment = experiment_from_string(j.at("experiment").get<std::string>());
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) {
        j.at(key).get_to(field);
      }
    };
    get("law", s.law);
    get("betas", s.betas);
    get("alphas", s.alphas);
    get("t_grid", s.t_grid);
    get("u_grid", s.u_grid);
    get("x_grid", s.x_grid);
    get("s_grid", s.s_grid);
    get("survivors", s.survivors);
    get("samples", s.samples);
    get("trees", s.trees);
    get("nmax", s.nmax);
    get("survival_budget", s.survival_budget);
    get("max_events", s.max_events);
    get("max_population", s.max_population);
    get("node_cap", s.node_cap);
    get("resolution", s.resolution);
    get("scaling_t", s.scaling_t);
    get("seed", s.seed);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("malformed spec: ") + e.what());
  }
  return s;
}

bool ExperimentReport::passed() const {
  if (!failures.empty()) {
    return false;
  }
  return std::all_of(verdicts.begin(), verdicts.end(),
                     [](const Verdict& v) { return v.kind == "info" || v.pass; });
}

json ExperimentReport::to_json(bool include_wall_clock) const {
  json verdict_list = json::array();
  for (const auto& v : verdicts) {
    verdict_list.push_back({{"criterion", v.criterion},
                            {"kind", v.kind},
                            {"pass", v.pass},
                            {"value", v.value},
                            {"threshold", v.threshold},
                            {"detail", v.detail}});
  }
  json j = {{"schema", kReportSchema},
            {"schema_version", kReportSchemaVersion},
            {"spec", harness::to_json(spec)},
            {"seeds", {{"master", spec.seed}}},
            {"statistics", statistics},
            {"verdicts", verdict_list},
            {"failures", failures},
            {"censored", censored},
            {"rejected", rejected},
            {"passed", passed()}};
  if (include_wall_clock) {
    j["wall_clock_seconds"] = wall_clock_seconds;
  }
  return j;
}

ExperimentReport run(const ExperimentSpec& input) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.spec = input.resolved();
  report.spec.validate();
  const ExperimentSpec& spec = report.spec;
  switch (spec.experiment) {
    case Experiment::oracle_consistency:
      run_oracle(spec, report);
      break;
    case Experiment::coalescent_link:
      run_coalescent(spec, report);
      break;
    case Experiment::theorem1:
      run_theorem1(spec, report);
      break;
    case Experiment::zubkov_mrca:
      run_zubkov(spec, report);
      break;
    case Experiment::theorem2_marginals:
      run_theorem2(spec, report);
      break;
    case Experiment::figure1_trajectories:
      run_figure1(spec, report);
      break;
    case Experiment::sampler_fit:
      run_sampler_fit(spec, report);
      break;
  }
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ------------------------------------------------------------------ building blocks

SurvivorSet collect_survivors(const OffspringLaw& law, const SimConfig& config, std::uint64_t target,
                              std::uint64_t budget, unsigned workers, bool need_genealogy,
                              std::span<const double> u_grid) {
  struct Run {
    bool survived = false;
    bool censored = false;
    std::uint64_t events = 0;
    Survivor record;
  };
  const bool genealogy = need_genealogy || !u_grid.empty();
  SurvivorSet out;
  // Fixed batch size keeps the consumed index range independent of workers.
  constexpr std::uint64_t kBatch = 8192;
  std::uint64_t next = 0;
  while (out.survivors.size() < target) {
    if (next >= budget) {
      out.budget_exhausted = true;
      break;
    }
    const std::uint64_t end = std::min(budget, next + kBatch);
    auto runs = parallel_map<Run>(next, end, workers, [&](std::uint64_t i) {
      Stream rng(config.seed, i);
      auto outcome = simulate(law, config, rng, genealogy);
      Run run;
      run.survived = outcome.survived;
      run.censored = outcome.censored;
      run.events = outcome.events;
      if (outcome.survived) {
        run.record.replicate = i;
        run.record.z_t = outcome.z_t;
        if (genealogy) {
          const auto traj = reduce(outcome.genealogy, config.horizon);
          run.record.tau = traj.mrca_time;
          for (double u : u_grid) {
            run.record.reduced_at.push_back(traj.value_at(u));
          }
        }
      }
      return run;
    });
    for (auto& run : runs) {
      ++out.attempts;
      out.events += run.events;
      if (run.censored) {
        ++out.censored;
      } else if (run.survived) {
        out.survivors.push_back(std::move(run.record));
        if (out.survivors.size() == target) {
          break;
        }
      }
    }
    next = end;
  }
  return out;
}

OracleGrid oracle_grid(const AnalyticModel& model, std::span<const double> s_grid,
                       std::span<const double> t_grid) {
  OracleGrid g;
  for (double s : s_grid) {
    const double pi_s = model.pi_integral(s);
    for (double t : t_grid) {
      const double F = model.solve_backward(s, t);
      g.flow_residual = std::max(g.flow_residual, std::abs(model.pi_integral(F) - pi_s - t));
      g.survival_residual =
          std::max(g.survival_residual, std::abs(1.0 - F - model.survival(pi_s + t)));
      const double half = 0.5 * t;
      const double twice = model.solve_backward(model.solve_backward(s, half), half);
      g.semigroup_residual = std::max(g.semigroup_residual, std::abs(twice - F));
    }
  }
  for (double t : t_grid) {
    const double h = 1e-4 * t;
    const double dq = (model.log_survival_ode(t + h) - model.log_survival_ode(t - h)) / (2.0 * h);
    const double gq = model.slowly_varying_log(model.log_survival_ode(t));
    g.derivative_residual = std::max(g.derivative_residual, std::abs(dq / gq - 1.0));
  }
  return g;
}

double binary_survival_residual(double t_max) {
  const AnalyticModel model(OffspringLaw::binary());
  double worst = 0.0;
  for (double t = 0.5; t <= t_max + 1e-12; t += 0.5) {
    worst = std::max(worst, std::abs(model.survival(t) - 2.0 / (t + 2.0)));
  }
  return worst;
}

ScalingIndices scaling_indices(double beta, double t) {
  const AnalyticModel model(OffspringLaw::heavy_tail(beta));
  const double ln2 = std::log(2.0);
  ScalingIndices idx{};
  idx.c_index = std::log(model.size_scale(2.0 * t) / model.size_scale(t)) / ln2;
  idx.q_index = std::log(model.log_survival(2.0 * t) / model.log_survival(t)) / ln2;
  idx.c_target = beta / ((1.0 + beta) * (1.0 + beta));
  idx.q_target = 1.0 / (1.0 + beta);
  return idx;
}

SamplerFit sampler_fit(const OffspringLaw& law, std::uint64_t draws, std::uint64_t seed,
                       unsigned workers) {
  const double n = static_cast<double>(draws);
  // Individual buckets until the tail holds fewer than 20 expected draws.
  std::uint64_t top = 1;
  const std::uint64_t limit = std::min<std::uint64_t>(law.support_max(), 200000);
  while (top < limit && n * law.tail(top - 1) >= 20.0) {
    ++top;
  }
  if (law.support_max() <= 200000) {
    top = std::max<std::uint64_t>(top, law.support_max() + 1);
  }
  std::vector<double> expected(top + 1, 0.0);
  for (std::uint64_t k = 0; k < top; ++k) {
    expected[k] = n * law.pmf(k);
  }
  expected[top] = n * law.tail(top - 1);
  // Per-block histograms, folded in block order.
  constexpr std::uint64_t kBlock = 1 << 14;
  const std::uint64_t blocks = (draws + kBlock - 1) / kBlock;
  const auto partial = parallel_map<std::vector<double>>(0, blocks, workers, [&](std::uint64_t b) {
    std::vector<double> h(top + 1, 0.0);
    Stream rng(seed, b);
    const std::uint64_t hi = std::min(draws, (b + 1) * kBlock);
    for (std::uint64_t i = b * kBlock; i < hi; ++i) {
      h[std::min(law.sample(rng), top)] += 1.0;
    }
    return h;
  });
  std::vector<double> observed(top + 1, 0.0);
  for (const auto& h : partial) {
    for (std::size_t k = 0; k < h.size(); ++k) {
      observed[k] += h[k];
    }
  }
  SamplerFit fit{law.describe(), 0.0, 0.0, 1.0, 0.0, draws};
  std::vector<double> probs(expected.size());
  for (std::size_t k = 0; k < probs.size(); ++k) {
    probs[k] = expected[k] / n;
  }
  // TV on single values below 16 and dyadic bins above: per-value buckets in a
  // heavy tail would make the sampling noise floor alone exceed the threshold.
  std::vector<double> coarse_obs;
  std::vector<double> coarse_prob;
  for (std::uint64_t lo = 0; lo <= top;) {
    const std::uint64_t hi = lo < 16 ? lo + 1 : std::min<std::uint64_t>(2 * lo, top + 1);
    double o = 0.0;
    double q = 0.0;
    for (std::uint64_t k = lo; k < std::max(hi, lo + 1); ++k) {
      o += observed[k];
      q += probs[k];
    }
    coarse_obs.push_back(o);
    coarse_prob.push_back(q);
    lo = std::max(hi, lo + 1);
  }
  fit.total_variation = stats::total_variation(coarse_obs, coarse_prob);
  const auto nonzero = std::count_if(expected.begin(), expected.end(), [](double e) { return e > 0.0; });
  if (nonzero <= 1) {
    // Point mass: the only test is that every draw landed on it.
    fit.p_value = fit.total_variation == 0.0 ? 1.0 : 0.0;
    return fit;
  }
  const auto chi = stats::chi_square(observed, expected);
  fit.chi_square = chi.statistic;
  fit.dof = chi.dof;
  fit.p_value = chi.p_value;
  return fit;
}

WorkStats work_stats(const OffspringLaw& law, const SimConfig& config, std::uint64_t replicates,
                     unsigned workers) {
  struct One {
    std::uint64_t events;
    std::uint64_t z;
    bool censored;
  };
  const auto runs = parallel_map<One>(0, replicates, workers, [&](std::uint64_t i) {
    Stream rng(config.seed, i);
    const auto o = simulate(law, config, rng, false);
    return One{o.events, o.z_t, o.censored};
  });
  WorkStats w{0.0, 0.0, replicates, 0};
  for (const auto& r : runs) {
    w.mean_events += static_cast<double>(r.events);
    w.mean_population += static_cast<double>(r.z);
    w.censored += r.censored ? 1 : 0;
  }
  w.mean_events /= static_cast<double>(replicates);
  w.mean_population /= static_cast<double>(replicates);
  return w;
}

double median_log_marginal(const LimitMode& mode, double x, std::uint64_t draws,
                           std::uint64_t seed) {
  const MarginalSampler sampler(mode, x);
  std::vector<double> logs;
  logs.reserve(draws);
  for (std::uint64_t i = 0; i < draws; ++i) {
    Stream rng(seed, i);
    logs.push_back(sampler.sample_log(rng));
  }
  return stats::median(std::move(logs));
}

std::string write_csv(const std::string& dir, const std::string& name, const std::string& header,
                      const std::vector<std::string>& rows) {
  std::filesystem::create_directories(dir);
  const auto path = (std::filesystem::path(dir) / name).string();
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << header << '\n';
  for (const auto& row : rows) {
    out << row << '\n';
  }
  return path;
}

std::string write_text(const std::string& dir, const std::string& name, const std::string& content) {
  std::filesystem::create_directories(dir);
  const auto path = (std::filesystem::path(dir) / name).string();
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << content << '\n';
  return path;
}

std::string output_directory(const std::string& fallback) {
  if (const char* env = std::getenv("RBP_OUTPUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return fallback;
}

}  // namespace rbp::harness
