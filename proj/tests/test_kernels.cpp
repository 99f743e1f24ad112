#include <doctest.h>

#include <omp.h>

#include "support/helpers.hpp"
#include "trialdesign/estimators.hpp"
#include "trialdesign/mc_kernels.hpp"
#include "trialdesign/simulation.hpp"

using namespace trialdesign;
using testing_support::kind_of;

namespace {

struct Setup {
  Cohort cohort;
  std::vector<ReplicationPlan> plans;
  PropensityMap e;
  Allocation f0;
};

Setup make_setup(std::size_t designs, std::size_t n1) {
  auto spec = SyntheticDgpSpec::defaults(21);
  spec.n0 = 3000;
  Rng rng(21, "cohort", 0);
  Setup s{generate_synthetic_cohort(spec, rng), {}, {}, spec.f0};
  for (const auto& d : draw_candidate_designs(designs, n1, s.cohort, 21)) s.plans.push_back(make_plan(d, s.cohort));
  s.e = PropensityMap::constant(s.cohort.domain, 0.5);
  return s;
}

}  // namespace

TEST_CASE("ipsw kernels: serial and parallel are bit-identical for any thread count") {
  const auto s = make_setup(5, 120);
  for (auto mode : {OutcomeMode::kStored, OutcomeMode::kRedraw}) {
    ReplicationSettings settings{37, 99, mode, synthetic_sampler(s.cohort.domain), std::nullopt};
    const auto ref = ipsw_replicates_serial(s.plans, s.f0, s.e, settings);
    REQUIRE(ref.size() == 5 * 37);
    for (int threads : {1, 2, 3, 8}) {
      omp_set_num_threads(threads);
      const auto par = ipsw_replicates_parallel(s.plans, s.f0, s.e, settings);
      CHECK(par == ref);
    }
  }
}

TEST_CASE("ipsw kernel matches a direct replication") {
  const auto s = make_setup(2, 80);
  ReplicationSettings settings{4, 5, OutcomeMode::kStored, {}, std::nullopt};
  const auto v = ipsw_replicates(s.plans, s.f0, s.e, settings, Execution::kParallel);
  std::vector<UnitRecord> scratch;
  for (std::size_t d = 0; d < 2; ++d) {
    for (std::size_t r = 0; r < 4; ++r) {
      detail::fill_replication(s.plans[d], s.e, settings, r, scratch);
      CHECK(v[d * 4 + r] == ipsw_ate(scratch, s.f0, s.e));
    }
  }
}

TEST_CASE("stored mode only re-randomizes treatment") {
  const auto s = make_setup(1, 60);
  ReplicationSettings settings{2, 5, OutcomeMode::kStored, {}, std::nullopt};
  std::vector<UnitRecord> scratch;
  detail::fill_replication(s.plans[0], s.e, settings, 0, scratch);
  for (std::size_t i = 0; i < scratch.size(); ++i)
    CHECK(*scratch[i].y == (scratch[i].t ? s.plans[0].y1[i] : s.plans[0].y0[i]));
}

TEST_CASE("cate kernels: serial and parallel agree") {
  const auto s = make_setup(1, 150);
  ReplicationSettings settings{25, 4, OutcomeMode::kRedraw, synthetic_sampler(s.cohort.domain), std::nullopt};
  const auto ref = cate_replicates_serial(s.plans[0], s.e, settings);
  REQUIRE(ref.size() == 25 * 3);
  omp_set_num_threads(4);
  CHECK(cate_replicates_parallel(s.plans[0], s.e, settings) == ref);
  CHECK(cate_replicates(s.plans[0], s.e, settings, Execution::kSerial) == ref);
}

TEST_CASE("kernel errors surface from parallel regions") {
  auto s = make_setup(1, 60);
  ReplicationSettings redraw_without_sampler{3, 1, OutcomeMode::kRedraw, {}, std::nullopt};
  CHECK(kind_of([&] { ipsw_replicates(s.plans, s.f0, s.e, redraw_without_sampler, Execution::kParallel); }) ==
        ErrorKind::kInvalidArgument);
  // Remove every unit at level 2: the estimator inside the parallel loop must fail cleanly.
  auto& p = s.plans[0];
  ReplicationPlan gap{p.design_id, {}, {}, {}};
  for (std::size_t i = 0; i < p.levels.size(); ++i) {
    if (p.levels[i] == 1) continue;
    gap.levels.push_back(p.levels[i]);
    gap.y0.push_back(p.y0[i]);
    gap.y1.push_back(p.y1[i]);
  }
  std::vector<ReplicationPlan> plans{gap};
  ReplicationSettings stored{3, 1, OutcomeMode::kStored, {}, std::nullopt};
  CHECK(kind_of([&] { ipsw_replicates(plans, s.f0, s.e, stored, Execution::kParallel); }) ==
        ErrorKind::kPositivityViolation);
  CHECK(kind_of([&] { ipsw_replicates(plans, s.f0, s.e, stored, Execution::kSerial); }) ==
        ErrorKind::kPositivityViolation);
}
