#include "trialdesign/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "trialdesign/estimators.hpp"

namespace trialdesign {

namespace {

std::string numbered_id(char prefix, std::size_t i, std::size_t width = 3) {
  std::string digits = std::to_string(i);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return std::string(1, prefix) + digits;
}

Allocation empirical_allocation(const CovariateDomain& domain, std::span<const std::int64_t> counts) {
  std::vector<double> w(counts.begin(), counts.end());
  return Allocation(domain, std::move(w));
}

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;
};

MeanVar mean_and_variance(std::span<const double> xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, ss / static_cast<double>(xs.size() - 1)};
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

// ---------------------------------------------------------------------------
// Cohorts

std::vector<std::vector<std::size_t>> Cohort::by_level() const {
  std::vector<std::vector<std::size_t>> groups(domain.size());
  for (std::size_t i = 0; i < units.size(); ++i) groups.at(units[i].x).push_back(i);
  return groups;
}

Allocation Cohort::level_distribution() const {
  std::vector<std::int64_t> counts(domain.size(), 0);
  for (const auto& u : units) ++counts.at(u.x);
  return empirical_allocation(domain, counts);
}

PotentialOutcomes synthetic_outcomes(double x, double eps) {
  return {2.0 * x + std::pow(x, 4) * eps, 1.0 - x + eps};
}

SyntheticDgpSpec SyntheticDgpSpec::defaults(std::uint64_t seed) {
  const std::vector<double> f0{0.3, 0.2, 0.5};
  return SyntheticDgpSpec{make_allocation(CovariateDomain::ordinal(3), f0), 10000, 200, 0.5, seed};
}

Cohort generate_synthetic_cohort(const SyntheticDgpSpec& spec, Rng& rng) {
  const auto& domain = spec.f0.domain();
  const auto& values = domain.values();
  std::discrete_distribution<std::size_t> level_dist(spec.f0.probs().begin(), spec.f0.probs().end());
  Cohort cohort{domain, {}};
  cohort.units.reserve(spec.n0);
  for (std::size_t i = 0; i < spec.n0; ++i) {
    const LevelIndex x = level_dist(rng.engine());
    const auto po = synthetic_outcomes(values[x], rng.normal());
    cohort.units.push_back({numbered_id('u', i, 6), x, po.y0, po.y1});
  }
  return cohort;
}

SigmaProfile synthetic_oracle_sigma(const CovariateDomain& domain, double e) {
  const auto& values = domain.values();
  std::vector<double> var1(values.size(), 1.0);
  std::vector<double> var0(values.size());
  for (std::size_t m = 0; m < values.size(); ++m) var0[m] = std::pow(values[m], 8);
  return oracle_sigma_psi(var1, var0, PropensityMap::constant(domain, e));
}

double synthetic_true_ate(const Allocation& f0) {
  const auto& values = f0.domain().values();
  double ate = 0.0;
  for (std::size_t m = 0; m < f0.size(); ++m) ate += f0[m] * (1.0 - 3.0 * values[m]);
  return ate;
}

OutcomeSampler synthetic_sampler(const CovariateDomain& domain) {
  return [values = domain.values()](LevelIndex level, Rng& rng) {
    return synthetic_outcomes(values[level], rng.normal());
  };
}

std::vector<UnitRecord> observational_sample(const Cohort& cohort, double e, Rng& rng) {
  std::vector<UnitRecord> rows;
  rows.reserve(cohort.units.size());
  for (const auto& u : cohort.units) {
    const bool treated = rng.bernoulli(e);
    rows.push_back({u.unit_id, 0, treated ? 1 : 0, u.x, treated ? u.y1 : u.y0});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Candidate designs

CandidateDesign draw_softmax_design(std::string design_id, std::vector<double> params, std::size_t n1,
                                    const Cohort& cohort, Rng& rng) {
  const std::size_t m = cohort.domain.size();
  if (params.size() != m) fail(ErrorKind::kInvalidArgument, "one softmax parameter per level is required");
  if (n1 == 0 || n1 > cohort.units.size())
    fail(ErrorKind::kInfeasibleDraw,
         "design " + design_id + " needs " + std::to_string(n1) + " units, cohort has " +
             std::to_string(cohort.units.size()));
  // Weighted sampling without replacement (Efraimidis-Spirakis): keep the n1
  // largest keys log(u) / w with w = exp(p_x).
  std::vector<double> inv_weight(m);
  for (std::size_t l = 0; l < m; ++l) inv_weight[l] = std::exp(-params[l]);
  std::vector<std::pair<double, std::size_t>> keys(cohort.units.size());
  for (std::size_t i = 0; i < cohort.units.size(); ++i)
    keys[i] = {std::log(rng.uniform()) * inv_weight[cohort.units[i].x], i};
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n1), keys.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });

  CandidateDesign design{std::move(design_id), std::move(params), {}, {}, std::vector<std::int64_t>(m, 0)};
  design.units.reserve(n1);
  for (std::size_t k = 0; k < n1; ++k) design.units.push_back(keys[k].second);
  std::sort(design.units.begin(), design.units.end());
  for (auto i : design.units) ++design.counts[cohort.units[i].x];
  design.f1 = empirical_allocation(cohort.domain, design.counts);
  return design;
}

CandidateDesign draw_fixed_counts_design(std::string design_id, std::span<const std::int64_t> counts,
                                         const Cohort& cohort, Rng& rng) {
  const std::size_t m = cohort.domain.size();
  if (counts.size() != m) fail(ErrorKind::kInvalidArgument, "one count per level is required");
  auto groups = cohort.by_level();
  CandidateDesign design{std::move(design_id), {}, {}, {}, std::vector<std::int64_t>(counts.begin(), counts.end())};
  std::int64_t total = 0;
  for (std::size_t l = 0; l < m; ++l) {
    const auto want = counts[l];
    if (want < 0) fail(ErrorKind::kInvalidArgument, "negative recruitment count", cohort.domain.id(l));
    auto& pool = groups[l];
    if (static_cast<std::size_t>(want) > pool.size())
      fail(ErrorKind::kInfeasibleDraw,
           "design " + design.design_id + " needs " + std::to_string(want) + " units at level " +
               cohort.domain.id(l) + ", cohort has " + std::to_string(pool.size()),
           cohort.domain.id(l));
    // Partial Fisher-Yates.
    for (std::int64_t k = 0; k < want; ++k) {
      const auto remaining = pool.size() - static_cast<std::size_t>(k);
      const auto j = static_cast<std::size_t>(k) +
                     std::min(remaining - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(remaining)));
      std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
      design.units.push_back(pool[static_cast<std::size_t>(k)]);
    }
    total += want;
  }
  if (total == 0) fail(ErrorKind::kInfeasibleDraw, "design " + design.design_id + " recruits no units");
  std::sort(design.units.begin(), design.units.end());
  design.f1 = empirical_allocation(cohort.domain, design.counts);
  return design;
}

std::vector<CandidateDesign> draw_candidate_designs(std::size_t num_designs, std::size_t n1, const Cohort& cohort,
                                                    std::uint64_t seed) {
  std::vector<CandidateDesign> designs;
  designs.reserve(num_designs);
  for (std::size_t i = 0; i < num_designs; ++i) {
    Rng rng(seed, "#design", i);
    std::vector<double> params(cohort.domain.size());
    for (double& p : params) p = rng.normal();
    designs.push_back(draw_softmax_design(numbered_id('d', i), std::move(params), n1, cohort, rng));
  }
  return designs;
}

// ---------------------------------------------------------------------------
// Monte Carlo studies

ReplicationPlan make_plan(const CandidateDesign& design, const Cohort& cohort) {
  ReplicationPlan plan{design.design_id, {}, {}, {}};
  plan.levels.reserve(design.units.size());
  plan.y0.reserve(design.units.size());
  plan.y1.reserve(design.units.size());
  for (auto i : design.units) {
    const auto& u = cohort.units.at(i);
    plan.levels.push_back(u.x);
    plan.y0.push_back(u.y0);
    plan.y1.push_back(u.y1);
  }
  return plan;
}

SweepResult run_sweep(std::span<const CandidateDesign> designs, const Cohort& cohort, const McConfig& config) {
  if (config.reps < 2) fail(ErrorKind::kInvalidArgument, "a Monte Carlo study needs at least two replications");
  require_same_levels(config.f0.domain(), cohort.domain, "run_sweep");
  SweepResult result;
  std::vector<ReplicationPlan> plans;
  std::vector<double> deviations;
  for (const auto& design : designs) {
    try {
      for (std::size_t m = 0; m < config.f0.size(); ++m) {
        if (config.f0[m] > 0.0 && !(design.f1[m] > 0.0))
          fail(ErrorKind::kPositivityViolation,
               "design " + design.design_id + " has no trial units at level " + cohort.domain.id(m),
               cohort.domain.id(m));
      }
      deviations.push_back(deviation_metric(design.f1, config.f1_star));
      plans.push_back(make_plan(design, cohort));
    } catch (const DesignError& err) {
      result.skipped.push_back({design.design_id, err.kind(), err.what()});
    }
  }

  ReplicationSettings settings{config.reps, config.seed, config.mode, config.sampler, config.fixed_stream};
  const auto estimates = ipsw_replicates(plans, config.f0, config.e, settings, config.exec);

  for (std::size_t d = 0; d < plans.size(); ++d) {
    const std::span<const double> reps(estimates.data() + d * config.reps, config.reps);
    const auto mv = mean_and_variance(reps);
    result.points.push_back(
        {plans[d].design_id, deviations[d], mv.var, mv.mean, config.reps, config.seed, plans[d].levels.size()});
  }
  return result;
}

McStudyResult run_mc_study(const CandidateDesign& design, const Cohort& cohort, const McConfig& config) {
  auto sweep = run_sweep(std::span<const CandidateDesign>(&design, 1), cohort, config);
  if (!sweep.skipped.empty()) {
    const auto& s = sweep.skipped.front();
    fail(s.kind, s.message);
  }
  return sweep.points.front();
}

std::vector<std::int64_t> budget_split_counts(std::span<const double> shares, const CostSchedule& costs) {
  if (shares.size() != costs.unit_cost().size()) fail(ErrorKind::kInvalidArgument, "one budget share per level");
  double total = 0.0;
  for (double s : shares) {
    if (!(s >= 0.0)) fail(ErrorKind::kInvalidArgument, "budget shares must be nonnegative");
    total += s;
  }
  if (!(total > 0.0)) fail(ErrorKind::kInvalidArgument, "budget shares must not all be zero");
  std::vector<std::int64_t> counts(shares.size());
  for (std::size_t m = 0; m < shares.size(); ++m)
    counts[m] = static_cast<std::int64_t>(std::floor(shares[m] / total * costs.budget() / costs[m]));
  return counts;
}

SweepResult run_cost_study(const CostSchedule& costs, const Cohort& cohort, std::size_t num_designs,
                           const McConfig& config) {
  require_same_levels(costs.domain(), cohort.domain, "run_cost_study");
  const auto& c = costs.unit_cost();
  if (costs.budget() < 2.0 * *std::min_element(c.begin(), c.end()))
    fail(ErrorKind::kInfeasibleDraw, "budget does not cover two units at the cheapest level");

  const std::size_t m = cohort.domain.size();
  std::vector<CandidateDesign> designs;
  std::vector<SkippedDesign> infeasible;
  for (std::size_t i = 0; i < num_designs; ++i) {
    const auto id = numbered_id('c', i);
    Rng split_rng(config.seed, "#cost-split", i);
    std::vector<double> shares(m);
    for (double& s : shares) s = split_rng.gamma(1.0);
    const auto counts = budget_split_counts(shares, costs);
    const auto total = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
    try {
      if (total < 2) fail(ErrorKind::kInfeasibleDraw, "design " + id + " recruits fewer than two units");
      Rng draw_rng(config.seed, "#cost-draw", i);
      designs.push_back(draw_fixed_counts_design(id, counts, cohort, draw_rng));
    } catch (const DesignError& err) {
      infeasible.push_back({id, err.kind(), err.what()});
    }
  }
  auto sweep = run_sweep(designs, cohort, config);
  sweep.skipped.insert(sweep.skipped.end(), infeasible.begin(), infeasible.end());
  return sweep;
}

// ---------------------------------------------------------------------------
// Fits

FitResult fit_variance_vs_deviation(std::span<const std::pair<double, double>> points) {
  const std::size_t n = points.size();
  if (n < 3) fail(ErrorKind::kDegenerateFit, "a fit needs at least three points");
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (!(sxx > 0.0)) fail(ErrorKind::kDegenerateFit, "all deviations are equal");
  FitResult fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 0.0;
  fit.n_points = n;
  return fit;
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) fail(ErrorKind::kInvalidArgument, "correlation needs paired samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double spearman_correlation(std::span<const double> x, std::span<const double> y) {
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson_correlation(rx, ry);
}

// ---------------------------------------------------------------------------
// Study drivers

namespace {

void summarize(StudyReport& report) {
  std::vector<std::pair<double, double>> pts;
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& p : report.points) {
    if (std::find(report.reference_ids.begin(), report.reference_ids.end(), p.design_id) !=
        report.reference_ids.end())
      continue;
    pts.emplace_back(p.deviation, p.emp_variance);
    xs.push_back(p.deviation);
    ys.push_back(p.emp_variance);
  }
  report.fit = fit_variance_vs_deviation(pts);
  report.pearson = pearson_correlation(xs, ys);
  report.spearman = spearman_correlation(xs, ys);
}

}  // namespace

StudyReport run_synthetic_study(const SyntheticStudyConfig& config) {
  const auto& dgp = config.dgp;
  const auto& domain = dgp.f0.domain();
  Rng cohort_rng(dgp.seed, "#cohort", 0);
  const Cohort cohort = generate_synthetic_cohort(dgp, cohort_rng);

  StudyReport report;
  report.source = "synthetic";
  report.f0 = dgp.f0;
  report.sigma = synthetic_oracle_sigma(domain, dgp.e);
  report.f1_star = optimal_allocation(dgp.f0, report.sigma);
  report.true_ate = synthetic_true_ate(dgp.f0);

  auto designs = draw_candidate_designs(config.designs, dgp.n1, cohort, dgp.seed);
  if (config.include_reference_designs) {
    const auto n1 = static_cast<std::int64_t>(dgp.n1);
    Rng naive_rng(dgp.seed, "#reference", 0);
    designs.push_back(draw_fixed_counts_design("naive", integer_counts(dgp.f0, n1), cohort, naive_rng));
    Rng optimal_rng(dgp.seed, "#reference", 1);
    designs.push_back(draw_fixed_counts_design("optimal", integer_counts(report.f1_star, n1), cohort, optimal_rng));
    report.reference_ids = {"naive", "optimal"};
  }

  McConfig mc{config.reps,
              PropensityMap::constant(domain, dgp.e),
              dgp.f0,
              report.f1_star,
              dgp.seed,
              config.mode,
              synthetic_sampler(domain),
              config.exec,
              std::nullopt};
  auto sweep = run_sweep(designs, cohort, mc);
  report.points = std::move(sweep.points);
  report.skipped = std::move(sweep.skipped);
  summarize(report);
  return report;
}

StudyReport run_synthetic_cost_study(const CostStudyConfig& config) {
  const auto& dgp = config.dgp;
  const auto& domain = dgp.f0.domain();
  Rng cohort_rng(dgp.seed, "#cohort", 0);
  const Cohort cohort = generate_synthetic_cohort(dgp, cohort_rng);
  const CostSchedule costs(domain, config.unit_cost, config.budget);

  StudyReport report;
  report.source = "synthetic-cost";
  report.f0 = dgp.f0;
  report.sigma = synthetic_oracle_sigma(domain, dgp.e);
  report.f1_star = cost_optimal_allocation(dgp.f0, report.sigma, costs);
  report.true_ate = synthetic_true_ate(dgp.f0);

  McConfig mc{config.reps,
              PropensityMap::constant(domain, dgp.e),
              dgp.f0,
              report.f1_star,
              dgp.seed,
              config.mode,
              synthetic_sampler(domain),
              config.exec,
              std::nullopt};
  auto sweep = run_cost_study(costs, cohort, config.designs, mc);
  report.points = std::move(sweep.points);
  report.skipped = std::move(sweep.skipped);
  summarize(report);
  return report;
}

}  // namespace trialdesign

// ---------------------------------------------------------------------------
// STAR-format pipeline

namespace trialdesign {

namespace {

constexpr std::size_t kStarRaces = 2;
constexpr std::size_t kStarUrbanicity = 4;

CovariateDomain star_domain() {
  std::vector<std::string> ids;
  for (std::size_t r = 1; r <= kStarRaces; ++r)
    for (std::size_t u = 1; u <= kStarUrbanicity; ++u) ids.push_back(std::to_string(r) + "|" + std::to_string(u));
  return CovariateDomain(std::move(ids));
}

std::optional<int> code_in_range(const std::optional<std::string>& raw, int hi) {
  if (!raw) return std::nullopt;
  try {
    std::size_t used = 0;
    const int v = std::stoi(*raw, &used);
    if (used == raw->size() && v >= 1 && v <= hi) return v;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

// Population variance (denominator n) of each arm's potential outcomes per level.
std::pair<std::vector<double>, std::vector<double>> cohort_arm_variances(const Cohort& cohort) {
  const auto groups = cohort.by_level();
  std::vector<double> var1(groups.size(), 0.0);
  std::vector<double> var0(groups.size(), 0.0);
  for (std::size_t m = 0; m < groups.size(); ++m) {
    if (groups[m].empty()) continue;
    const double n = static_cast<double>(groups[m].size());
    double s1 = 0.0;
    double s0 = 0.0;
    for (auto i : groups[m]) {
      s1 += cohort.units[i].y1;
      s0 += cohort.units[i].y0;
    }
    const double m1 = s1 / n;
    const double m0 = s0 / n;
    for (auto i : groups[m]) {
      var1[m] += (cohort.units[i].y1 - m1) * (cohort.units[i].y1 - m1);
      var0[m] += (cohort.units[i].y0 - m0) * (cohort.units[i].y0 - m0);
    }
    var1[m] /= n;
    var0[m] /= n;
  }
  return {var1, var0};
}

}  // namespace

std::vector<StarRow> star_standin_rows(std::uint64_t seed) {
  constexpr std::size_t kRows = 4584;
  // Cell shares, race-major: white x (inner city, suburban, rural, urban), black x same.
  const std::vector<double> share{0.03, 0.20, 0.38, 0.06, 0.17, 0.08, 0.04, 0.04};
  const double urb_effect[kStarUrbanicity] = {-40.0, 0.0, 10.0, -5.0};
  const double cell_sd[kStarRaces * kStarUrbanicity] = {120, 110, 105, 115, 130, 125, 100, 135};
  const double treat_effect[kStarRaces] = {30.0, 45.0};

  Rng rng(seed, "#star-standin", 0);
  std::discrete_distribution<std::size_t> cell_dist(share.begin(), share.end());
  std::vector<StarRow> rows;
  rows.reserve(kRows);
  for (std::size_t i = 0; i < kRows; ++i) {
    const std::size_t cell = cell_dist(rng.engine());
    const std::size_t r = cell / kStarUrbanicity;
    const std::size_t u = cell % kStarUrbanicity;
    const int t = rng.bernoulli(0.378) ? 1 : 0;
    const double mean = 1590.0 - 60.0 * static_cast<double>(r) + urb_effect[u] + treat_effect[r] * t;
    StarRow row;
    row.treatment = t;
    row.race = std::to_string(r + 1);
    row.urbanicity = std::to_string(u + 1);
    const double score = mean + cell_sd[cell] * rng.normal();
    if (rng.uniform() >= 0.06) row.score = std::round(score);
    // A handful of rows with an unrecorded covariate, as in the real file.
    if (rng.uniform() < 0.005) row.race.reset();
    rows.push_back(std::move(row));
  }
  return rows;
}

StarCohort prepare_star_cohort(std::span<const StarRow> rows, const std::map<std::string, int>* race_map) {
  struct Kept {
    std::size_t row;
    int t;
    std::size_t r;
    std::size_t u;
    std::optional<double> y;
  };
  std::vector<Kept> kept;
  std::size_t excluded = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    std::optional<int> race;
    if (row.race) {
      if (race_map) {
        auto it = race_map->find(*row.race);
        if (it != race_map->end() && (it->second == 1 || it->second == 2)) race = it->second;
      } else {
        race = code_in_range(row.race, 2);
      }
    }
    const auto urb = code_in_range(row.urbanicity, static_cast<int>(kStarUrbanicity));
    const bool t_ok = row.treatment && (*row.treatment == 0 || *row.treatment == 1);
    const bool y_ok = !row.score || std::isfinite(*row.score);
    if (!race || !urb || !t_ok || !y_ok) {
      ++excluded;
      continue;
    }
    kept.push_back({i, *row.treatment, static_cast<std::size_t>(*race - 1), static_cast<std::size_t>(*urb - 1),
                    row.score});
  }
  if (kept.empty()) fail(ErrorKind::kSchemaError, "no usable rows after dropping missing covariates");

  // OLS on rows with an observed score.
  constexpr int kCoef = 6;
  auto design_row = [](int t, std::size_t r, std::size_t u) {
    Eigen::Matrix<double, 1, kCoef> z;
    z << 1.0, t, r == 1 ? 1.0 : 0.0, u == 1 ? 1.0 : 0.0, u == 2 ? 1.0 : 0.0, u == 3 ? 1.0 : 0.0;
    return z;
  };
  std::size_t n_obs = 0;
  for (const auto& k : kept) n_obs += k.y ? 1 : 0;
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n_obs), kCoef);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n_obs));
  Eigen::Index row_i = 0;
  for (const auto& k : kept) {
    if (!k.y) continue;
    z.row(row_i) = design_row(k.t, k.r, k.u);
    y(row_i) = *k.y;
    ++row_i;
  }
  const auto qr = z.colPivHouseholderQr();
  if (n_obs < static_cast<std::size_t>(kCoef) || qr.rank() < kCoef)
    fail(ErrorKind::kDegenerateFit, "outcome regression is rank deficient");
  const Eigen::VectorXd beta = qr.solve(y);

  StarCohort out;
  out.cohort.domain = star_domain();
  out.coefficients.assign(beta.data(), beta.data() + kCoef);
  out.excluded_rows = excluded;
  std::size_t treated = 0;
  for (const auto& k : kept) {
    const double fit1 = design_row(1, k.r, k.u).dot(beta);
    const double fit0 = design_row(0, k.r, k.u).dot(beta);
    CohortUnit unit{numbered_id('s', k.row, 5), k.r * kStarUrbanicity + k.u, fit0, fit1};
    if (k.y) (k.t == 1 ? unit.y1 : unit.y0) = *k.y;
    treated += static_cast<std::size_t>(k.t);
    out.cohort.units.push_back(std::move(unit));
  }
  out.f0 = out.cohort.level_distribution();
  out.e = static_cast<double>(treated) / static_cast<double>(kept.size());
  if (!(out.e > 0.0 && out.e < 1.0)) fail(ErrorKind::kPositivityViolation, "every retained row has the same arm");
  const auto [var1, var0] = cohort_arm_variances(out.cohort);
  out.sigma = oracle_sigma_psi(var1, var0, PropensityMap::constant(out.cohort.domain, out.e));
  out.f1_star = optimal_allocation(out.f0, out.sigma);
  return out;
}

StudyReport star_pipeline(std::span<const StarRow> rows, const StarStudyConfig& config,
                          const std::map<std::string, int>* race_map, std::string source) {
  StarCohort star = prepare_star_cohort(rows, race_map);
  const auto& domain = star.cohort.domain;
  if (config.e) {
    star.e = *config.e;
    const auto [var1, var0] = cohort_arm_variances(star.cohort);
    star.sigma = oracle_sigma_psi(var1, var0, PropensityMap::constant(domain, star.e));
    star.f1_star = optimal_allocation(star.f0, star.sigma);
  }

  StudyReport report;
  report.source = std::move(source);
  report.f0 = star.f0;
  report.sigma = star.sigma;
  report.f1_star = star.f1_star;
  double ate = 0.0;
  for (const auto& u : star.cohort.units) ate += u.y1 - u.y0;
  report.true_ate = ate / static_cast<double>(star.cohort.units.size());

  const auto designs = draw_candidate_designs(config.candidates, config.n1, star.cohort, config.seed);
  McConfig mc{config.reps,
              PropensityMap::constant(domain, star.e),
              star.f0,
              star.f1_star,
              config.seed,
              OutcomeMode::kStored,
              {},
              config.exec,
              std::nullopt};
  auto sweep = run_sweep(designs, star.cohort, mc);
  report.points = std::move(sweep.points);
  report.skipped = std::move(sweep.skipped);
  summarize(report);
  return report;
}

}  // namespace trialdesign
