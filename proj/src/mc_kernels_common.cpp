#include "trialdesign/mc_kernels.hpp"

#include "trialdesign/errors.hpp"

namespace trialdesign {

namespace detail {

void fill_replication(const ReplicationPlan& plan, const PropensityMap& e, const ReplicationSettings& settings,
                      std::uint64_t rep, std::vector<UnitRecord>& scratch) {
  const std::size_t n = plan.levels.size();
  Rng rng(settings.fixed_stream ? *settings.fixed_stream : stream_seed(settings.seed, plan.design_id, rep));
  scratch.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const LevelIndex level = plan.levels[i];
    PotentialOutcomes po{plan.y0[i], plan.y1[i]};
    if (settings.mode == OutcomeMode::kRedraw) po = settings.sampler(level, rng);
    const bool treated = rng.bernoulli(e[level]);
    auto& u = scratch[i];
    u.s = 1;
    u.x = level;
    u.t = treated ? 1 : 0;
    u.y = treated ? po.y1 : po.y0;
  }
}

}  // namespace detail

namespace {

void check_settings(const ReplicationSettings& settings) {
  if (settings.mode == OutcomeMode::kRedraw && !settings.sampler)
    fail(ErrorKind::kInvalidArgument, "outcome redraw mode needs a sampler");
}

}  // namespace

std::vector<double> ipsw_replicates(std::span<const ReplicationPlan> plans, const Allocation& f0,
                                    const PropensityMap& e, const ReplicationSettings& settings, Execution exec) {
  check_settings(settings);
  return exec == Execution::kSerial ? ipsw_replicates_serial(plans, f0, e, settings)
                                    : ipsw_replicates_parallel(plans, f0, e, settings);
}

std::vector<double> cate_replicates(const ReplicationPlan& plan, const PropensityMap& e,
                                    const ReplicationSettings& settings, Execution exec) {
  check_settings(settings);
  return exec == Execution::kSerial ? cate_replicates_serial(plan, e, settings)
                                    : cate_replicates_parallel(plan, e, settings);
}

}  // namespace trialdesign
