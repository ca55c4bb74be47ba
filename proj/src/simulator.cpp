#include "rbp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "rbp/error.hpp"

namespace rbp {

void SimConfig::validate() const {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ParameterError("SimConfig: horizon must be positive and finite");
  }
  if (max_events == 0 || max_population == 0) {
    throw ParameterError("SimConfig: caps must be positive");
  }
}

std::uint64_t ReducedTrajectory::value_at(double u) const {
  if (!(u >= 0.0 && u <= horizon)) {
    throw DomainError("ReducedTrajectory::value_at: u must lie in [0, t]");
  }
  const auto it = std::upper_bound(times.begin(), times.end(), u);
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

SimOutcome simulate(const OffspringLaw& law, const SimConfig& config, Stream& rng,
                    bool record_genealogy) {
  config.validate();
  SimOutcome out;
  auto& nodes = out.genealogy.nodes;
  // Without a genealogy only births are needed on the stack.
  std::vector<std::pair<std::int64_t, double>> stack;
  std::uint64_t population = 1;
  stack.emplace_back(kNoParent, 0.0);
  while (!stack.empty()) {
    const auto [parent, birth] = stack.back();
    stack.pop_back();
    const double death = birth + rng.exponential();
    std::int64_t self = kNoParent;
    if (record_genealogy) {
      self = static_cast<std::int64_t>(nodes.size());
      nodes.push_back({parent, birth, death >= config.horizon ? kAliveAtHorizon : death});
    }
    if (death >= config.horizon) {
      ++out.z_t;
      continue;
    }
    if (++out.events > config.max_events) {
      out.censored = true;
      break;
    }
    const std::uint64_t children = law.sample(rng);
    if (children > config.max_population - population) {
      out.censored = true;
      break;
    }
    population += children;
    for (std::uint64_t c = 0; c < children; ++c) {
      stack.emplace_back(self, death);
    }
  }
  if (out.censored) {
    out.z_t = 0;
    out.survived = false;
  } else {
    out.survived = out.z_t > 0;
  }
  return out;
}

ReducedTrajectory reduce(const Genealogy& genealogy, double horizon) {
  const auto& nodes = genealogy.nodes;
  const std::size_t n = nodes.size();
  std::vector<std::uint64_t> marked_children(n, 0);
  std::vector<char> marked(n, 0);
  for (std::size_t i = n; i-- > 0;) {
    if (nodes[i].death == kAliveAtHorizon) {
      marked[i] = 1;
    }
    if (marked[i] && nodes[i].parent != kNoParent) {
      const auto p = static_cast<std::size_t>(nodes[i].parent);
      marked[p] = 1;
      ++marked_children[p];
    }
  }
  if (n == 0 || !marked[0]) {
    throw DomainError("reduce: the genealogy has no particle alive at the horizon");
  }
  std::vector<std::pair<double, std::uint64_t>> jumps;
  for (std::size_t i = 0; i < n; ++i) {
    if (marked[i] && marked_children[i] > 1) {
      jumps.emplace_back(nodes[i].death, marked_children[i] - 1);
    }
  }
  std::sort(jumps.begin(), jumps.end());
  ReducedTrajectory traj;
  traj.horizon = horizon;
  traj.times.push_back(0.0);
  traj.values.push_back(1);
  for (const auto& [time, step] : jumps) {
    if (time == traj.times.back()) {
      traj.values.back() += step;
    } else {
      traj.times.push_back(time);
      traj.values.push_back(traj.values.back() + step);
    }
  }
  traj.mrca_time = traj.times.size() > 1 ? horizon - traj.times[1] : 0.0;
  return traj;
}

MrcaSample mrca_sample(const OffspringLaw& law, const SimConfig& config, Stream& rng,
                       std::uint64_t max_attempts) {
  MrcaSample sample;
  for (std::uint64_t attempt = 0; attempt < max_attempts; ++attempt) {
    auto outcome = simulate(law, config, rng);
    if (outcome.censored) {
      ++sample.censored;
      continue;
    }
    if (!outcome.survived) {
      ++sample.rejections;
      continue;
    }
    sample.tau = reduce(outcome.genealogy, config.horizon).mrca_time;
    return sample;
  }
  std::ostringstream msg;
  msg << "mrca_sample: no survivor in " << max_attempts << " attempts at t=" << config.horizon
      << "; reduce t or raise the budget";
  throw BudgetError(msg.str());
}

}  // namespace rbp
