#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "support/helpers.hpp"
#include "support/oracles.hpp"
#include "trialdesign/simulation.hpp"

using namespace trialdesign;
using testing_support::alloc;
using testing_support::error_of;
using testing_support::kind_of;

namespace {

const Cohort& default_cohort() {
  static const Cohort c = [] {
    auto spec = SyntheticDgpSpec::defaults(42);
    Rng rng(42, "cohort", 0);
    return generate_synthetic_cohort(spec, rng);
  }();
  return c;
}

McConfig default_mc(std::size_t reps, OutcomeMode mode = OutcomeMode::kRedraw) {
  const auto& c = default_cohort();
  const auto f0 = alloc({0.3, 0.2, 0.5});
  const auto sigma = synthetic_oracle_sigma(c.domain, 0.5);
  return McConfig{reps, PropensityMap::constant(c.domain, 0.5), f0, optimal_allocation(f0, sigma), 42, mode,
                  synthetic_sampler(c.domain), Execution::kParallel, std::nullopt};
}

}  // namespace

TEST_CASE("synthetic outcome model") {
  const auto po = synthetic_outcomes(2.0, 0.0);
  CHECK(po.y0 == 4.0);
  CHECK(po.y1 == -1.0);
  const auto shared = synthetic_outcomes(3.0, 0.5);
  CHECK(shared.y1 - shared.y0 == doctest::Approx(1.0 - 9.0 + (1.0 - 81.0) * 0.5));

  const auto s = synthetic_oracle_sigma(CovariateDomain::ordinal(3), 0.5);
  CHECK(s[0] * s[0] == doctest::Approx(4.0));
  CHECK(s[1] * s[1] == doctest::Approx(514.0));
  CHECK(s[2] * s[2] == doctest::Approx(13124.0));
}

TEST_CASE("true ATE: closed form against a 1e6-unit Monte Carlo oracle") {
  const auto f0 = alloc({0.3, 0.2, 0.5});
  CHECK(synthetic_true_ate(f0) == doctest::Approx(-5.6));
  std::mt19937_64 g(31);
  std::discrete_distribution<int> level({0.3, 0.2, 0.5});
  std::normal_distribution<double> nd(0.0, 1.0);
  const std::size_t n = 1000000;
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = level(g) + 1.0;
    const double eps = nd(g);
    diff[i] = (1.0 - x + eps) - (2.0 * x + std::pow(x, 4) * eps);
  }
  const auto m = oracle::moments(diff);
  CHECK(std::abs(m.mean - (-5.6)) < 3.0 * std::sqrt(m.var / n));
}

TEST_CASE("cohort level frequencies follow f0") {
  const auto& c = default_cohort();
  REQUIRE(c.units.size() == 10000);
  const auto freq = c.level_distribution();
  const double f0[] = {0.3, 0.2, 0.5};
  for (std::size_t m = 0; m < 3; ++m) CHECK(std::abs(freq[m] - f0[m]) < 3.0 * std::sqrt(f0[m] * (1 - f0[m]) / 1e4));
}

TEST_CASE("softmax designs") {
  const auto& c = default_cohort();
  Rng rng(1, "t", 0);
  const auto flat = draw_softmax_design("flat", {0.4, 0.4, 0.4}, 2000, c, rng);
  const auto cf = c.level_distribution();
  CHECK(flat.units.size() == 2000);
  for (std::size_t m = 0; m < 3; ++m) CHECK(std::abs(flat.f1[m] - cf[m]) < 3.0 * std::sqrt(cf[m] * (1 - cf[m]) / 2000));

  const auto sat = draw_softmax_design("sat", {10, -10, -10}, 200, c, rng);
  CHECK(sat.f1[0] > 0.99);

  std::set<std::size_t> uniq(flat.units.begin(), flat.units.end());
  CHECK(uniq.size() == flat.units.size());

  CHECK(kind_of([&] { draw_softmax_design("big", {0, 0, 0}, 10001, c, rng); }) == ErrorKind::kInfeasibleDraw);
}

TEST_CASE("100 candidate designs are distinct allocations") {
  const auto designs = draw_candidate_designs(100, 200, default_cohort(), 9);
  REQUIRE(designs.size() == 100);
  CHECK(designs.front().design_id == "d000");
  CHECK(designs.back().design_id == "d099");
  std::set<std::vector<double>> seen, params;
  for (const auto& d : designs) {
    params.insert(d.softmax_params);
    double s = 0.0;
    std::int64_t n = 0;
    for (std::size_t m = 0; m < 3; ++m) {
      s += d.f1[m];
      n += d.counts[m];
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
    CHECK(n == 200);
    seen.insert(d.f1.probs());
  }
  CHECK(params.size() == 100);
  // Distinct parameters can still land on the same counts now and then.
  CHECK(seen.size() >= 95);
  const auto again = draw_candidate_designs(100, 200, default_cohort(), 9);
  for (std::size_t i = 0; i < designs.size(); ++i) CHECK(again[i].units == designs[i].units);
}

TEST_CASE("fixed-count designs") {
  const auto& c = default_cohort();
  Rng rng(2, "t", 0);
  const std::vector<std::int64_t> counts{2, 14, 184};
  const auto d = draw_fixed_counts_design("opt", counts, c, rng);
  CHECK(d.counts == counts);
  std::vector<std::int64_t> seen(3, 0);
  for (auto i : d.units) ++seen[c.units[i].x];
  CHECK(seen == counts);
  const std::vector<std::int64_t> too_many{0, 0, 10000};
  auto err = error_of([&] { draw_fixed_counts_design("x", too_many, c, rng); });
  REQUIRE(err);
  CHECK(err->kind() == ErrorKind::kInfeasibleDraw);
  CHECK(err->level() == "3");
}

TEST_CASE("run_mc_study: forced identical treatment draws give zero variance") {
  const auto& c = default_cohort();
  const auto design = draw_candidate_designs(1, 200, c, 3).front();
  for (auto mode : {OutcomeMode::kStored, OutcomeMode::kRedraw}) {
    auto cfg = default_mc(2, mode);
    cfg.fixed_stream = 77;
    const auto r = run_mc_study(design, c, cfg);
    CHECK(r.replications == 2);
    CHECK(r.emp_variance == 0.0);
  }
}

TEST_CASE("run_mc_study at the optimum matches the base term and is unbiased") {
  const auto& c = default_cohort();
  const auto cfg = default_mc(1000);
  Rng rng(4, "t", 0);
  const auto design = draw_fixed_counts_design("opt", integer_counts(cfg.f1_star, 200), c, rng);
  const auto r = run_mc_study(design, c, cfg);
  const double base = std::pow(0.3 * 2 + 0.2 * std::sqrt(514.0) + 0.5 * std::sqrt(13124.0), 2);
  CHECK(std::abs(r.emp_variance / (base / 200.0) - 1.0) < 0.15);
  CHECK(std::abs(r.emp_mean + 5.6) < 3.0 * std::sqrt(r.emp_variance / 1000.0));
  CHECK(r.n1 == 200);
  CHECK(r.deviation < 1e-3);
}

TEST_CASE("run_mc_study positivity pre-flight") {
  const auto& c = default_cohort();
  Rng rng(5, "t", 0);
  const std::vector<std::int64_t> counts{100, 0, 100};
  const auto gap = draw_fixed_counts_design("gap", counts, c, rng);
  auto err = error_of([&] { run_mc_study(gap, c, default_mc(10)); });
  REQUIRE(err);
  CHECK(err->kind() == ErrorKind::kPositivityViolation);

  std::vector<CandidateDesign> designs{gap, draw_candidate_designs(1, 200, c, 5).front()};
  const auto sweep = run_sweep(designs, c, default_mc(10));
  CHECK(sweep.points.size() == 1);
  REQUIRE(sweep.skipped.size() == 1);
  CHECK(sweep.skipped[0].design_id == "gap");
  CHECK(kind_of([&] { run_sweep(designs, c, default_mc(1)); }) == ErrorKind::kInvalidArgument);
}

TEST_CASE("sweeps are reproducible and independent of execution mode") {
  const auto& c = default_cohort();
  const auto designs = draw_candidate_designs(6, 200, c, 6);
  auto cfg = default_mc(50);
  const auto a = run_sweep(designs, c, cfg);
  cfg.exec = Execution::kSerial;
  const auto b = run_sweep(designs, c, cfg);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].emp_mean == b.points[i].emp_mean);
    CHECK(a.points[i].emp_variance == b.points[i].emp_variance);
  }
}

TEST_CASE("budget splitting") {
  const auto d = CovariateDomain::ordinal(3);
  const CostSchedule cs(d, {20, 30, 40}, 30000);
  const std::vector<double> shares{1, 1, 2};
  CHECK(budget_split_counts(shares, cs) == std::vector<std::int64_t>{375, 250, 375});

  // Shares proportional to C * f1c* recruit close to f1c*.
  const auto f0 = alloc({0.3, 0.2, 0.5});
  const auto f1c = cost_optimal_allocation(f0, synthetic_oracle_sigma(d, 0.5), cs);
  std::vector<double> opt_shares(3);
  for (std::size_t m = 0; m < 3; ++m) opt_shares[m] = cs[m] * f1c[m];
  const auto counts = budget_split_counts(opt_shares, cs);
  const auto realized = Allocation(d, std::vector<double>(counts.begin(), counts.end()));
  CHECK(deviation_metric(realized, f1c) < 1e-2);

  // Equal unit costs and a budget of 200 units: a fixed-size study up to flooring.
  const CostSchedule flat(d, {5, 5, 5}, 1000);
  const std::vector<double> uneven{0.2, 0.3, 0.5};
  const auto fc = budget_split_counts(uneven, flat);
  CHECK(fc == std::vector<std::int64_t>{40, 60, 100});
}

TEST_CASE("cost study") {
  const auto& c = default_cohort();
  const auto d = c.domain;
  auto cfg = default_mc(300);
  const CostSchedule cs(d, {20, 30, 40}, 30000);
  cfg.f1_star = cost_optimal_allocation(cfg.f0, synthetic_oracle_sigma(d, 0.5), cs);
  const auto sweep = run_cost_study(cs, c, 40, cfg);
  CHECK(sweep.points.size() + sweep.skipped.size() == 40);
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : sweep.points) {
    pts.emplace_back(p.deviation, p.emp_variance);
    CHECK(p.design_id.front() == 'c');
  }
  CHECK(fit_variance_vs_deviation(pts).slope > 0.0);

  const CostSchedule poor(d, {20, 30, 40}, 39);
  CHECK(kind_of([&] { run_cost_study(poor, c, 5, cfg); }) == ErrorKind::kInfeasibleDraw);

  // Equal costs, budget 200 c: every feasible design recruits close to 200 units.
  const CostSchedule flat(d, {5, 5, 5}, 1000);
  const auto flat_sweep = run_cost_study(flat, c, 10, default_mc(20));
  for (const auto& p : flat_sweep.points) CHECK((p.n1 >= 198 && p.n1 <= 200));
}

TEST_CASE("fit_variance_vs_deviation") {
  std::vector<std::pair<double, double>> line;
  for (int i = 0; i < 5; ++i) line.emplace_back(i, 2.0 * i + 1.0);
  const auto f = fit_variance_vs_deviation(line);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r_squared == doctest::Approx(1.0));
  CHECK(f.n_points == 5);

  std::vector<std::pair<double, double>> flat{{0, 3}, {1, 3}, {2, 3}};
  const auto g = fit_variance_vs_deviation(flat);
  CHECK(g.slope == 0.0);
  CHECK(g.r_squared == 0.0);

  std::vector<std::pair<double, double>> same_x{{1, 1}, {1, 2}, {1, 3}};
  CHECK(kind_of([&] { fit_variance_vs_deviation(same_x); }) == ErrorKind::kDegenerateFit);
  std::vector<std::pair<double, double>> two{{0, 1}, {1, 2}};
  CHECK(kind_of([&] { fit_variance_vs_deviation(two); }) == ErrorKind::kDegenerateFit);
}

TEST_CASE("correlations") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> cube{1, 8, 27, 64, 125};
  CHECK(spearman_correlation(x, cube) == doctest::Approx(1.0));
  CHECK(pearson_correlation(x, cube) < 1.0);
  const std::vector<double> rev{5, 4, 3, 2, 1};
  CHECK(pearson_correlation(x, rev) == doctest::Approx(-1.0));
  // Ties take average ranks: y ranks (1.5, 1.5, 3, 4, 5).
  const std::vector<double> tied{0, 0, 1, 2, 3};
  const double r = pearson_correlation(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>{1.5, 1.5, 3, 4, 5});
  CHECK(spearman_correlation(x, tied) == doctest::Approx(r));
}

TEST_CASE("synthetic study keeps the reference designs out of the fit") {
  SyntheticStudyConfig cfg{SyntheticDgpSpec::defaults(8), 12, 60, OutcomeMode::kRedraw, true, Execution::kParallel};
  const auto report = run_synthetic_study(cfg);
  CHECK(report.points.size() + report.skipped.size() == 14);
  CHECK(report.fit.n_points == report.points.size() - 2);
  CHECK(report.true_ate == doctest::Approx(-5.6));
  bool naive = false, optimal = false;
  for (const auto& p : report.points) {
    naive |= p.design_id == "naive";
    optimal |= p.design_id == "optimal";
  }
  CHECK(naive);
  CHECK(optimal);
}

TEST_CASE("STAR preparation") {
  std::vector<StarRow> rows;
  const double base[2][4] = {{10, 20, 30, 40}, {5, 15, 25, 35}};
  for (int r = 1; r <= 2; ++r)
    for (int u = 1; u <= 4; ++u)
      for (int t = 0; t < 2; ++t)
        for (int k = 0; k < 3; ++k)
          rows.push_back({t, std::to_string(r), std::to_string(u), base[r - 1][u - 1] + 7.0 * t + k});
  rows.push_back({1, std::nullopt, "1", 3.0});
  rows.push_back({1, "1", "9", 3.0});
  rows.push_back({std::nullopt, "1", "1", 3.0});

  const auto star = prepare_star_cohort(rows);
  CHECK(star.excluded_rows == 3);
  CHECK(star.cohort.units.size() == 48);
  CHECK(star.cohort.domain.ids() == std::vector<std::string>{"1|1", "1|2", "1|3", "1|4", "2|1", "2|2", "2|3", "2|4"});
  CHECK(star.e == doctest::Approx(0.5));
  for (std::size_t m = 0; m < 8; ++m) CHECK(star.f0[m] == doctest::Approx(1.0 / 8));
  // Observed arm values survive imputation unchanged.
  for (std::size_t i = 0; i < 48; ++i) {
    const auto& row = rows[i];
    const auto& u = star.cohort.units[i];
    CHECK((row.treatment == 1 ? u.y1 : u.y0) == *row.score);
  }
  CHECK(star.coefficients[1] == doctest::Approx(7.0));

  const std::map<std::string, int> race_map{{"W", 1}, {"B", 2}};
  std::vector<StarRow> coded = rows;
  for (auto& r : coded)
    if (r.race) r.race = *r.race == "1" ? "W" : "B";
  const auto mapped = prepare_star_cohort(coded, &race_map);
  CHECK(mapped.cohort.units.size() == 48);
  // Without a map, raw codes other than 1/2 count as missing.
  CHECK(kind_of([&] { prepare_star_cohort(coded); }) == ErrorKind::kSchemaError);
}

TEST_CASE("STAR stand-in and equal softmax parameters") {
  const auto rows = star_standin_rows();
  CHECK(rows.size() == 4584);
  std::size_t missing = 0;
  for (const auto& r : rows) missing += r.score ? 0 : 1;
  CHECK(missing > 200);
  CHECK(missing < 370);
  const auto star = prepare_star_cohort(rows);
  CHECK(star.e == doctest::Approx(0.378).epsilon(0.05));
  Rng rng(3, "t", 0);
  const auto d = draw_softmax_design("flat", std::vector<double>(8, 0.0), 2000, star.cohort, rng);
  for (std::size_t m = 0; m < 8; ++m)
    CHECK(std::abs(d.f1[m] - star.f0[m]) < 3.0 * std::sqrt(star.f0[m] * (1 - star.f0[m]) / 2000) + 1e-9);
}
