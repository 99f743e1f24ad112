#include <vector>

#include "trialdesign/estimators.hpp"
#include "trialdesign/mc_kernels.hpp"

// Serial reference implementations. Kept deliberately plain: these define
// the expected output of the OpenMP kernels.

namespace trialdesign {

std::vector<double> ipsw_replicates_serial(std::span<const ReplicationPlan> plans, const Allocation& f0,
                                           const PropensityMap& e, const ReplicationSettings& settings) {
  const std::size_t reps = settings.reps;
  std::vector<double> out(plans.size() * reps);
  std::vector<UnitRecord> scratch;
  for (std::size_t d = 0; d < plans.size(); ++d) {
    for (std::size_t r = 0; r < reps; ++r) {
      detail::fill_replication(plans[d], e, settings, r, scratch);
      out[d * reps + r] = ipsw_ate(scratch, f0, e);
    }
  }
  return out;
}

std::vector<double> cate_replicates_serial(const ReplicationPlan& plan, const PropensityMap& e,
                                           const ReplicationSettings& settings) {
  const std::size_t m = e.domain().size();
  std::vector<double> out(settings.reps * m);
  std::vector<UnitRecord> scratch;
  for (std::size_t r = 0; r < settings.reps; ++r) {
    detail::fill_replication(plan, e, settings, r, scratch);
    for (std::size_t l = 0; l < m; ++l) out[r * m + l] = ht_cate(scratch, l, e);
  }
  return out;
}

}  // namespace trialdesign
