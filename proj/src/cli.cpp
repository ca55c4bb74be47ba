#include "rbp/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rbp/analytic.hpp"
#include "rbp/coalescent.hpp"
#include "rbp/error.hpp"
#include "rbp/harness.hpp"
#include "rbp/limit_process.hpp"
#include "rbp/simulator.hpp"

namespace rbp::cli {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LawOptions {
  std::string law = "heavy";
  double beta = 1.0;
  double alpha = 0.5;
  double gamma = 0.5;
  std::uint64_t k = 1;

  OffspringLaw build() const {
    if (law == "heavy") return OffspringLaw::heavy_tail(beta);
    if (law == "binary") return OffspringLaw::binary();
    if (law == "point") return OffspringLaw::point_mass(k);
    if (law == "zero") return OffspringLaw::zero_limit();
    if (law == "alpha") return OffspringLaw::alpha_limit(alpha);
    if (law == "sibuya") return OffspringLaw::sibuya(gamma);
    throw UsageError("unknown law '" + law + "'");
  }
};

struct State {
  // global
  std::string config;
  std::string output_dir = "rbp_output";
  std::uint64_t seed = kDefaultSeed;
  unsigned workers = 1;

  // simulate / reduce
  LawOptions law;
  double t = 10.0;
  std::uint64_t replicates = 10000;
  std::uint64_t survivors = 100;
  std::uint64_t max_events = 100'000'000;
  std::uint64_t max_population = 10'000'000;
  bool csv = false;

  // limit-sample
  std::string mode = "zero";
  double limit_beta = 1.0;
  double limit_alpha = 1.0;
  std::uint64_t trees = 10;
  std::uint64_t points = 100;
  double x_max = 0.99;
  double resolution = 1e-3;
  std::uint64_t node_cap = std::uint64_t{1} << 17;

  // verify
  harness::ExperimentSpec spec;
  std::string experiment;
  std::string from_report;

  // coalescent / oracle
  std::vector<double> alphas;
  std::vector<double> betas;
  std::uint64_t nmax = 50;
};

void add_law_options(CLI::App* sub, State& st) {
  sub->add_option("--law", st.law.law, "offspring law: heavy, binary, point, zero, alpha, sibuya")
      ->capture_default_str()
      ->check(CLI::IsMember({"heavy", "binary", "point", "zero", "alpha", "sibuya"}));
  sub->add_option("--beta", st.law.beta, "tail parameter of the heavy law")->capture_default_str();
  sub->add_option("--alpha", st.law.alpha, "parameter of the alpha limit law")->capture_default_str();
  sub->add_option("--gamma", st.law.gamma, "Sibuya parameter")->capture_default_str();
  sub->add_option("--k", st.law.k, "offspring count of the point law")->capture_default_str();
  sub->add_option("--t", st.t, "horizon")->capture_default_str();
  sub->add_option("--max-events", st.max_events, "split cap per replicate")->capture_default_str();
  sub->add_option("--max-population", st.max_population, "node cap per replicate")
      ->capture_default_str();
}

std::unique_ptr<CLI::App> build_app(State& st) {
  auto app = std::make_unique<CLI::App>(
      "Critical Markov branching processes with very heavy tails: simulation, limit "
      "genealogies and verification experiments.",
      "rbp");
  app->fallthrough();
  app->require_subcommand(1);
  app->add_option("--config", st.config,
                  "key=value file; keys are long option names, command-line flags win");
  app->add_option("--output-dir", st.output_dir,
                  "directory for CSV and JSON outputs (RBP_OUTPUT_DIR overrides the default)")
      ->capture_default_str();
  app->add_option("--seed", st.seed, "master seed")->capture_default_str();
  app->add_option("--workers", st.workers, "worker threads (results do not depend on it)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  auto* sim = app->add_subcommand("simulate", "raw process runs, summary JSON and optional CSV");
  add_law_options(sim, st);
  sim->add_option("--replicates", st.replicates, "number of replicates")->capture_default_str();
  sim->add_flag("--csv", st.csv, "write one CSV row per replicate");

  auto* red = app->add_subcommand("reduce", "reduced-process trajectory dumps of survivors");
  add_law_options(red, st);
  red->add_option("--survivors", st.survivors, "number of surviving replicates")
      ->capture_default_str();

  auto* lim = app->add_subcommand("limit-sample", "limit-genealogy trajectory CSV");
  lim->add_option("--mode", st.mode, "zero or alpha")
      ->capture_default_str()
      ->check(CLI::IsMember({"zero", "alpha"}));
  lim->add_option("--beta", st.limit_beta, "beta of the zero mode")->capture_default_str();
  lim->add_option("--alpha", st.limit_alpha, "alpha of the alpha mode")->capture_default_str();
  lim->add_option("--trees", st.trees, "number of trees")->capture_default_str();
  lim->add_option("--points", st.points, "x-grid size, uniform in -ln(1-x)")->capture_default_str();
  lim->add_option("--x-max", st.x_max, "last grid point")->capture_default_str();
  lim->add_option("--resolution", st.resolution, "positions above 1 - resolution are never queried")
      ->capture_default_str();
  lim->add_option("--node-cap", st.node_cap, "node cap per tree")->capture_default_str();

  auto* ver = app->add_subcommand("verify", "run a named experiment and write its JSON report");
  auto& sp = st.spec;
  ver->add_option("--experiment", st.experiment, "one of: theorem1, zubkov_mrca, theorem2_marginals, "
                                                  "figure1_trajectories, coalescent_link, "
                                                  "oracle_consistency, sampler_fit");
  ver->add_option("--from-report", st.from_report, "re-run the spec echoed in a report");
  ver->add_option("--law", sp.law, "heavy or binary")->capture_default_str();
  ver->add_option("--beta", sp.betas, "beta values (comma separated)")->delimiter(',');
  ver->add_option("--alpha", sp.alphas, "alpha values")->delimiter(',');
  ver->add_option("--t", sp.t_grid, "t grid")->delimiter(',');
  ver->add_option("--u", sp.u_grid, "u grid")->delimiter(',');
  ver->add_option("--x", sp.x_grid, "x grid")->delimiter(',');
  ver->add_option("--s", sp.s_grid, "s grid")->delimiter(',');
  ver->add_option("--survivors", sp.survivors, "surviving replicates per grid point")
      ->capture_default_str();
  ver->add_option("--samples", sp.samples, "draws or trees for distribution fits")
      ->capture_default_str();
  ver->add_option("--trees", sp.trees, "trees per Figure-1 block")->capture_default_str();
  ver->add_option("--nmax", sp.nmax, "largest n of the coalescent link")->capture_default_str();
  ver->add_option("--budget", sp.survival_budget, "replicates allowed per grid point")
      ->capture_default_str();
  ver->add_option("--max-events", sp.max_events, "split cap per replicate")->capture_default_str();
  ver->add_option("--max-population", sp.max_population, "node cap per replicate")
      ->capture_default_str();
  ver->add_option("--node-cap", sp.node_cap, "node cap per limit tree")->capture_default_str();
  ver->add_option("--resolution", sp.resolution, "limit-tree resolution")->capture_default_str();
  ver->add_option("--scaling-t", sp.scaling_t, "t of the scaling-exponent check")
      ->capture_default_str();

  auto* coal = app->add_subcommand("coalescent", "merger law vs conditional offspring law, as CSV");
  coal->add_option("--alpha", st.alphas, "alpha values in [0,1) (default 0)")->delimiter(',');
  coal->add_option("--nmax", st.nmax, "largest number of branches")->capture_default_str();

  auto* orc = app->add_subcommand("oracle", "analytic self-consistency grid, as CSV");
  orc->add_option("--beta", st.betas, "beta values (default 0.2,1,5)")->delimiter(',');
  return app;
}

std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw UsageError("cannot read config file '" + path + "'");
  }
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int number = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++number;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(number) + ": expected key=value");
    }
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return entries;
}

CLI::App* active_subcommand(CLI::App& app) {
  const auto subs = app.get_subcommands();
  return subs.empty() ? nullptr : subs.front();
}

std::vector<double> figure_grid(std::uint64_t points, double x_max) {
  std::vector<double> xs;
  const double end = -std::log1p(-x_max);
  for (std::uint64_t i = 0; i < points; ++i) {
    const double frac = points == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(points - 1);
    xs.push_back(-std::expm1(-frac * end));
  }
  xs.back() = x_max;
  return xs;
}

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

int cmd_simulate(const State& st, const std::string& dir, std::ostream& out) {
  const OffspringLaw law = st.law.build();
  SimConfig cfg;
  cfg.horizon = st.t;
  cfg.max_events = st.max_events;
  cfg.max_population = st.max_population;
  cfg.seed = st.seed;
  cfg.validate();
  struct Row {
    bool survived, censored;
    std::uint64_t z, events;
  };
  const auto rows = harness::parallel_map<Row>(0, st.replicates, st.workers, [&](std::uint64_t i) {
    Stream rng(cfg.seed, i);
    const auto o = simulate(law, cfg, rng, false);
    return Row{o.survived, o.censored, o.z_t, o.events};
  });
  std::uint64_t survived = 0, censored = 0;
  double z_sum = 0.0, ev_sum = 0.0;
  std::vector<std::string> csv;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    survived += rows[i].survived;
    censored += rows[i].censored;
    z_sum += static_cast<double>(rows[i].z);
    ev_sum += static_cast<double>(rows[i].events);
    if (st.csv) {
      csv.push_back(std::to_string(i) + "," + (rows[i].survived ? "1" : "0") + "," +
                    (rows[i].censored ? "1" : "0") + "," + std::to_string(rows[i].z) + "," +
                    std::to_string(rows[i].events));
    }
  }
  const double n = static_cast<double>(st.replicates);
  nlohmann::json summary = {{"law", law.describe()},
                            {"t", st.t},
                            {"seed", st.seed},
                            {"replicates", st.replicates},
                            {"survived", survived},
                            {"censored", censored},
                            {"survival_fraction", static_cast<double>(survived) / n},
                            {"mean_population", z_sum / n},
                            {"mean_events", ev_sum / n}};
  const bool critical = std::isfinite(law.mean()) && std::abs(law.mean() - 1.0) < 1e-12 &&
                        (law.kind() == LawKind::heavy_tail || law.kind() == LawKind::table) &&
                        law.pmf(1) < 1.0;
  if (critical) {
    summary["survival_exact"] = AnalyticModel(law).survival(st.t);
  }
  if (st.csv) {
    summary["csv"] = harness::write_csv(dir, "simulate.csv",
                                        "replicate_id,survived,censored,z_t,events", csv);
  }
  out << summary.dump(2) << '\n';
  return kExitPass;
}

int cmd_reduce(const State& st, const std::string& dir, std::ostream& out) {
  const OffspringLaw law = st.law.build();
  SimConfig cfg;
  cfg.horizon = st.t;
  cfg.max_events = st.max_events;
  cfg.max_population = st.max_population;
  cfg.seed = st.seed;
  cfg.validate();
  std::vector<std::string> rows;
  std::vector<std::string> mrca;
  std::uint64_t found = 0, attempts = 0, censored = 0;
  for (std::uint64_t i = 0; found < st.survivors; ++i) {
    if (i >= 100'000'000) {
      throw BudgetError("reduce: survivor budget exhausted; lower --t or --survivors");
    }
    Stream rng(cfg.seed, i);
    ++attempts;
    const auto o = simulate(law, cfg, rng, true);
    censored += o.censored;
    if (!o.survived) {
      continue;
    }
    const auto traj = reduce(o.genealogy, cfg.horizon);
    for (std::size_t j = 0; j < traj.times.size(); ++j) {
      rows.push_back(std::to_string(i) + "," + num(traj.times[j]) + "," +
                     std::to_string(traj.values[j]));
    }
    rows.push_back(std::to_string(i) + "," + num(cfg.horizon) + "," +
                   std::to_string(traj.final_value()));
    mrca.push_back(std::to_string(i) + "," + num(traj.mrca_time) + "," + std::to_string(o.z_t));
    ++found;
  }
  nlohmann::json summary = {
      {"law", law.describe()},
      {"t", st.t},
      {"survivors", found},
      {"attempts", attempts},
      {"censored", censored},
      {"trajectories", harness::write_csv(dir, "reduced_trajectories.csv", "replicate_id,u,Z", rows)},
      {"mrca", harness::write_csv(dir, "mrca.csv", "replicate_id,tau,z_t", mrca)}};
  out << summary.dump(2) << '\n';
  return kExitPass;
}

int cmd_limit(const State& st, const std::string& dir, std::ostream& out) {
  LimitConfig lc;
  lc.mode = st.mode == "zero" ? LimitMode::zero(st.limit_beta) : LimitMode::alpha(st.limit_alpha);
  lc.resolution = st.resolution;
  lc.node_cap = st.node_cap;
  lc.horizon = st.x_max;
  lc.validate();
  if (st.points == 0 || st.trees == 0) {
    throw UsageError("--points and --trees must be positive");
  }
  const auto xs = figure_grid(st.points, st.x_max);
  struct Row {
    std::vector<std::uint64_t> counts;
    bool truncated;
    double exact_until;
  };
  const auto trees = harness::parallel_map<Row>(0, st.trees, st.workers, [&](std::uint64_t i) {
    Stream rng(st.seed, i);
    const auto tree = sample_limit_tree(lc, rng);
    return Row{trajectory_at(tree, xs), tree.truncated, tree.exact_until};
  });
  std::vector<std::string> rows;
  std::uint64_t truncated = 0;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    truncated += trees[i].truncated;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      const bool bound = trees[i].truncated && xs[j] >= trees[i].exact_until;
      rows.push_back(std::to_string(i) + "," + num(xs[j]) + "," + std::to_string(trees[i].counts[j]) +
                     "," + (bound ? "1" : "0"));
    }
  }
  const std::string name = "limit_" + st.mode + "_" +
                           num(st.mode == "zero" ? st.limit_beta : st.limit_alpha) + ".csv";
  nlohmann::json summary = {
      {"mode", st.mode},
      {"trees", st.trees},
      {"truncated_trees", truncated},
      {"csv", harness::write_csv(dir, name, "replicate_id,x,R,lower_bound", rows)}};
  out << summary.dump(2) << '\n';
  return kExitPass;
}

int cmd_verify(const State& st, const std::string& dir, std::ostream& out) {
  harness::ExperimentSpec spec = st.spec;
  if (!st.from_report.empty()) {
    std::ifstream in(st.from_report);
    if (!in) {
      throw UsageError("cannot read report '" + st.from_report + "'");
    }
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(std::string("malformed report: ") + e.what());
    }
    if (!j.contains("spec")) {
      throw UsageError("report has no spec echo");
    }
    spec = harness::spec_from_json(j.at("spec"));
  } else {
    if (st.experiment.empty()) {
      throw UsageError("verify needs --experiment or --from-report");
    }
    spec.experiment = harness::experiment_from_string(st.experiment);
    spec.seed = st.seed;
  }
  spec.workers = st.workers;
  spec.output_dir = dir;
  const auto report = harness::run(spec);
  const auto path = harness::write_text(dir, harness::to_string(spec.experiment) + "_report.json",
                                        report.to_json().dump(2));
  for (const auto& v : report.verdicts) {
    out << (v.kind == "info" ? "INFO" : (v.pass ? "PASS" : "FAIL")) << ' ' << v.criterion << " ["
        << v.kind << "] value=" << num(v.value) << " threshold=" << num(v.threshold) << "  "
        << v.detail << '\n';
  }
  for (const auto& f : report.failures) {
    out << "FAIL " << f << '\n';
  }
  out << "report: " << path << '\n';
  return report.passed() ? kExitPass : kExitCriterionFailure;
}

int cmd_coalescent(const State& st, std::ostream& out) {
  const std::vector<double> alphas = st.alphas.empty() ? std::vector<double>{0.0} : st.alphas;
  double worst = 0.0;
  out << "alpha,n,k,merger_prob,conditional_offspring_prob,discrepancy\n";
  for (double a : alphas) {
    for (const auto& row : link_table(a, st.nmax)) {
      const double d = std::abs(row.merger_prob - row.conditional_offspring_prob);
      worst = std::max(worst, d);
      out << num(a) << ',' << row.n << ',' << row.k << ',' << num(row.merger_prob) << ','
          << num(row.conditional_offspring_prob) << ',' << num(d) << '\n';
    }
  }
  out << "# max_discrepancy=" << num(worst) << '\n';
  return worst < 1e-12 ? kExitPass : kExitCriterionFailure;
}

int cmd_oracle(const State& st, std::ostream& out) {
  const std::vector<double> betas = st.betas.empty() ? std::vector<double>{0.2, 1.0, 5.0} : st.betas;
  const std::vector<double> ss{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  const std::vector<double> ts{0.5, 1.0, 2.0, 5.0, 10.0};
  double worst = 0.0;
  out << "beta,s,t,F,flow_residual,survival_residual\n";
  for (double beta : betas) {
    const AnalyticModel model(OffspringLaw::heavy_tail(beta));
    for (double s : ss) {
      const double pi_s = model.pi_integral(s);
      for (double t : ts) {
        const double F = model.solve_backward(s, t);
        const double flow = std::abs(model.pi_integral(F) - pi_s - t);
        const double surv = std::abs(1.0 - F - model.survival(pi_s + t));
        worst = std::max({worst, flow, surv});
        out << num(beta) << ',' << num(s) << ',' << num(t) << ',' << num(F) << ',' << num(flow)
            << ',' << num(surv) << '\n';
      }
    }
  }
  out << "# max_residual=" << num(worst) << '\n';
  return worst < 1e-6 ? kExitPass : kExitCriterionFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  State st;
  auto app = build_app(st);
  try {
    app->parse(argc, argv);
    if (!st.config.empty()) {
      // Config values become extra flags for every key not given on the command line.
      CLI::App* sub = active_subcommand(*app);
      std::vector<std::string> extra;
      for (const auto& [key, value] : read_config(st.config)) {
        const std::string flag = "--" + key;
        CLI::Option* opt = sub != nullptr ? sub->get_option_no_throw(flag) : nullptr;
        if (opt == nullptr) {
          opt = app->get_option_no_throw(flag);
        }
        if (opt == nullptr || key == "config") {
          throw UsageError("config key '" + key + "' is not an option of this command");
        }
        if (opt->count() > 0) {
          continue;
        }
        if (opt->get_type_size() == 0) {
          if (value == "true" || value == "1") {
            extra.push_back(flag);
          } else if (value != "false" && value != "0") {
            throw UsageError("config key '" + key + "' is a flag; use true or false");
          }
          continue;
        }
        extra.push_back(flag);
        extra.push_back(value);
      }
      std::vector<const char*> merged(argv, argv + argc);
      for (const auto& e : extra) {
        merged.push_back(e.c_str());
      }
      st = State{};
      app = build_app(st);
      app->parse(static_cast<int>(merged.size()), merged.data());
    }
  } catch (const CLI::CallForHelp& e) {
    out << app->help();
    return kExitPass;
  } catch (const CLI::CallForAllHelp& e) {
    out << app->help("", CLI::AppFormatMode::All);
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app->help();
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  // Precedence for the output directory: flag, then environment, then config/default.
  const bool flag_dir = std::any_of(argv, argv + argc, [](const char* a) {
    return std::string(a).rfind("--output-dir", 0) == 0;
  });
  const std::string dir = flag_dir ? st.output_dir : harness::output_directory(st.output_dir);

  const std::string name = active_subcommand(*app)->get_name();
  try {
    if (name == "simulate") return cmd_simulate(st, dir, out);
    if (name == "reduce") return cmd_reduce(st, dir, out);
    if (name == "limit-sample") return cmd_limit(st, dir, out);
    if (name == "verify") return cmd_verify(st, dir, out);
    if (name == "coalescent") return cmd_coalescent(st, out);
    if (name == "oracle") return cmd_oracle(st, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParameterError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitCriterionFailure;
  }
  err << "usage error: unknown subcommand\n";
  return kExitUsage;
}

}  // namespace rbp::cli
