#include <omp.h>

#include <cstdint>
#include <exception>
#include <vector>

#include "trialdesign/estimators.hpp"
#include "trialdesign/mc_kernels.hpp"

namespace trialdesign {

namespace {

// Exceptions may not cross an OpenMP region; keep the first and rethrow.
class FirstError {
 public:
  void capture() {
#pragma omp critical(trialdesign_first_error)
    if (!error_) error_ = std::current_exception();
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::exception_ptr error_;
};

}  // namespace

std::vector<double> ipsw_replicates_parallel(std::span<const ReplicationPlan> plans, const Allocation& f0,
                                             const PropensityMap& e, const ReplicationSettings& settings) {
  const auto reps = static_cast<std::int64_t>(settings.reps);
  const auto jobs = static_cast<std::int64_t>(plans.size()) * reps;
  std::vector<double> out(static_cast<std::size_t>(jobs));
  FirstError error;
#pragma omp parallel
  {
    std::vector<UnitRecord> scratch;
#pragma omp for schedule(static)
    for (std::int64_t job = 0; job < jobs; ++job) {
      try {
        const auto d = static_cast<std::size_t>(job / reps);
        const auto r = static_cast<std::uint64_t>(job % reps);
        detail::fill_replication(plans[d], e, settings, r, scratch);
        out[static_cast<std::size_t>(job)] = ipsw_ate(scratch, f0, e);
      } catch (...) {
        error.capture();
      }
    }
  }
  error.rethrow();
  return out;
}

std::vector<double> cate_replicates_parallel(const ReplicationPlan& plan, const PropensityMap& e,
                                             const ReplicationSettings& settings) {
  const std::size_t m = e.domain().size();
  const auto reps = static_cast<std::int64_t>(settings.reps);
  std::vector<double> out(settings.reps * m);
  FirstError error;
#pragma omp parallel
  {
    std::vector<UnitRecord> scratch;
#pragma omp for schedule(static)
    for (std::int64_t r = 0; r < reps; ++r) {
      try {
        detail::fill_replication(plan, e, settings, static_cast<std::uint64_t>(r), scratch);
        for (std::size_t l = 0; l < m; ++l) out[static_cast<std::size_t>(r) * m + l] = ht_cate(scratch, l, e);
      } catch (...) {
        error.capture();
      }
    }
  }
  error.rethrow();
  return out;
}

}  // namespace trialdesign
