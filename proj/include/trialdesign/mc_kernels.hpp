#pragma once

// Replication kernels for the Monte Carlo studies. Each kernel has a serial
// reference implementation and an OpenMP implementation; both compute every
// replication from its own (seed, design_id, replication) stream and store it
// by index, so the two produce bit-identical output for any thread count.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trialdesign/domain.hpp"
#include "trialdesign/rng.hpp"

namespace trialdesign {

enum class Execution { kSerial, kParallel };

struct PotentialOutcomes {
  double y0 = 0.0;
  double y1 = 0.0;
};

/// kStored reveals the potential outcomes recorded for each trial unit; only
/// treatment is re-randomized. kRedraw draws fresh outcomes for every unit in
/// every replication from `OutcomeSampler`, i.e. replications are independent
/// trials from the outcome distribution at the design's covariate mix.
enum class OutcomeMode { kStored, kRedraw };

/// Must be safe to call concurrently (no shared mutable state).
using OutcomeSampler = std::function<PotentialOutcomes(LevelIndex, Rng&)>;

/// A trial sample flattened for the kernels.
struct ReplicationPlan {
  std::string design_id;
  std::vector<LevelIndex> levels;
  std::vector<double> y0;
  std::vector<double> y1;
};

struct ReplicationSettings {
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  OutcomeMode mode = OutcomeMode::kStored;
  OutcomeSampler sampler;
  /// Test hook: when set, every replication reuses this one stream.
  std::optional<std::uint64_t> fixed_stream;
};

/// IPSW estimate per (design, replication), laid out as [d * reps + r].
std::vector<double> ipsw_replicates_serial(std::span<const ReplicationPlan> plans, const Allocation& f0,
                                           const PropensityMap& e, const ReplicationSettings& settings);
std::vector<double> ipsw_replicates_parallel(std::span<const ReplicationPlan> plans, const Allocation& f0,
                                             const PropensityMap& e, const ReplicationSettings& settings);
std::vector<double> ipsw_replicates(std::span<const ReplicationPlan> plans, const Allocation& f0,
                                    const PropensityMap& e, const ReplicationSettings& settings, Execution exec);

/// Per-level Horvitz-Thompson CATE per replication for one plan, laid out as
/// [r * M + m]. Every level must hold at least one unit.
std::vector<double> cate_replicates_serial(const ReplicationPlan& plan, const PropensityMap& e,
                                           const ReplicationSettings& settings);
std::vector<double> cate_replicates_parallel(const ReplicationPlan& plan, const PropensityMap& e,
                                             const ReplicationSettings& settings);
std::vector<double> cate_replicates(const ReplicationPlan& plan, const PropensityMap& e,
                                    const ReplicationSettings& settings, Execution exec);

namespace detail {

/// One replication of a plan; `scratch` is reused across calls.
void fill_replication(const ReplicationPlan& plan, const PropensityMap& e, const ReplicationSettings& settings,
                      std::uint64_t rep, std::vector<UnitRecord>& scratch);

}  // namespace detail

}  // namespace trialdesign
