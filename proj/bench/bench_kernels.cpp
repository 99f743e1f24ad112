#include <benchmark/benchmark.h>

#include "trialdesign/simulation.hpp"

using namespace trialdesign;

namespace {

struct Fixture {
  SyntheticDgpSpec dgp = SyntheticDgpSpec::defaults(11);
  Cohort cohort;
  std::vector<ReplicationPlan> plans;
  PropensityMap e;

  Fixture() {
    Rng rng(dgp.seed, "#cohort", 0);
    cohort = generate_synthetic_cohort(dgp, rng);
    for (const auto& d : draw_candidate_designs(16, dgp.n1, cohort, dgp.seed)) plans.push_back(make_plan(d, cohort));
    e = PropensityMap::constant(cohort.domain, dgp.e);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void run(benchmark::State& state, Execution exec) {
  const auto& f = fixture();
  ReplicationSettings settings{static_cast<std::size_t>(state.range(0)), 3, OutcomeMode::kRedraw,
                               synthetic_sampler(f.cohort.domain), std::nullopt};
  for (auto _ : state) {
    auto v = ipsw_replicates(f.plans, f.dgp.f0, f.e, settings, exec);
    benchmark::DoNotOptimize(v.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<std::int64_t>(f.plans.size()));
}

void BM_IpswSerial(benchmark::State& state) { run(state, Execution::kSerial); }
void BM_IpswParallel(benchmark::State& state) { run(state, Execution::kParallel); }

}  // namespace

BENCHMARK(BM_IpswSerial)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IpswParallel)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
