#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "rbp/offspring_laws.hpp"
#include "rbp/rng.hpp"

namespace rbp {

struct SimConfig {
  double horizon = 10.0;
  std::uint64_t max_events = 100'000'000;
  std::uint64_t max_population = 10'000'000;
  std::uint64_t seed = kDefaultSeed;

  void validate() const;
};

inline constexpr double kAliveAtHorizon = std::numeric_limits<double>::infinity();
inline constexpr std::int64_t kNoParent = -1;

/// One particle. `death` is kAliveAtHorizon for particles alive at the horizon.
struct GenealogyNode {
  std::int64_t parent;
  double birth;
  double death;
};

/// Flat arena of particles. Children always come after their parent, so a
/// single reverse pass visits every child before its parent.
struct Genealogy {
  std::vector<GenealogyNode> nodes;

  bool empty() const { return nodes.empty(); }
  std::size_t size() const { return nodes.size(); }
};

struct SimOutcome {
  bool survived = false;
  bool censored = false;
  std::uint64_t z_t = 0;
  /// Number of death (split) events before the horizon.
  std::uint64_t events = 0;
  Genealogy genealogy;
};

/// Right-continuous step function u -> Z(u,t) on [0,t] with its jump times.
struct ReducedTrajectory {
  double horizon = 0.0;
  std::vector<double> times;           // times[0] = 0, strictly increasing
  std::vector<std::uint64_t> values;   // values[i] on [times[i], times[i+1])
  double mrca_time = 0.0;              // t - sup{u : Z(u,t) = 1}

  std::uint64_t value_at(double u) const;
  std::uint64_t final_value() const { return values.back(); }
};

/// Event-driven run of the Markov branching process from one particle.
/// Depth-first over lineages with an explicit stack; a hit cap returns a
/// censored outcome instead of throwing.
SimOutcome simulate(const OffspringLaw& law, const SimConfig& config, Stream& rng,
                    bool record_genealogy = true);

/// Reduced process of a surviving run. Throws DomainError for extinct runs.
ReducedTrajectory reduce(const Genealogy& genealogy, double horizon);

struct MrcaSample {
  double tau = 0.0;
  std::uint64_t rejections = 0;
  std::uint64_t censored = 0;
};

/// Repeats simulate on `rng` until a run survives to the horizon, then
/// returns its MRCA time. Censored runs are discarded and counted.
MrcaSample mrca_sample(const OffspringLaw& law, const SimConfig& config, Stream& rng,
                       std::uint64_t max_attempts = 10'000'000);

}  // namespace rbp
