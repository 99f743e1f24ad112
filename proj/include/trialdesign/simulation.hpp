#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trialdesign/allocation.hpp"
#include "trialdesign/domain.hpp"
#include "trialdesign/errors.hpp"
#include "trialdesign/mc_kernels.hpp"
#include "trialdesign/rng.hpp"

namespace trialdesign {

// ---------------------------------------------------------------------------
// Cohorts

/// A target-cohort unit with both potential outcomes recorded.
struct CohortUnit {
  std::string unit_id;
  LevelIndex x = 0;
  double y0 = 0.0;
  double y1 = 0.0;
};

struct Cohort {
  CovariateDomain domain;
  std::vector<CohortUnit> units;

  /// Unit indices grouped by level.
  std::vector<std::vector<std::size_t>> by_level() const;
  /// Empirical level distribution of the cohort.
  Allocation level_distribution() const;
};

/// Synthetic outcome model on levels x in {1,2,3}:
///   Y0 = 2x + x^4 eps,  Y1 = 1 - x + eps,  one eps ~ N(0,1) shared per unit.
PotentialOutcomes synthetic_outcomes(double x, double eps);

struct SyntheticDgpSpec {
  Allocation f0;
  std::size_t n0 = 10000;
  std::size_t n1 = 200;
  double e = 0.5;
  std::uint64_t seed = 0;

  /// f0 = (0.3, 0.2, 0.5) on levels 1,2,3; n0 = 10000, n1 = 200, e = 0.5.
  static SyntheticDgpSpec defaults(std::uint64_t seed);
};

Cohort generate_synthetic_cohort(const SyntheticDgpSpec& spec, Rng& rng);

/// Closed-form var(Y1|x) = 1 and var(Y0|x) = x^8 plugged into
/// var1/e + var0/(1-e).
SigmaProfile synthetic_oracle_sigma(const CovariateDomain& domain, double e);

/// E[Y1 - Y0] = sum_x f0(x) (1 - 3x).
double synthetic_true_ate(const Allocation& f0);

/// Sampler drawing fresh synthetic potential outcomes at a level.
OutcomeSampler synthetic_sampler(const CovariateDomain& domain);

/// Observational rows (s = 0) from a cohort: T ~ Bernoulli(e), Y revealed.
std::vector<UnitRecord> observational_sample(const Cohort& cohort, double e, Rng& rng);

// ---------------------------------------------------------------------------
// Candidate designs

struct CandidateDesign {
  std::string design_id;
  /// Softmax selection parameters p_x (empty for fixed-count designs).
  std::vector<double> softmax_params;
  /// Empirical level distribution of the selected units.
  Allocation f1;
  /// Selected cohort indices.
  std::vector<std::size_t> units;
  std::vector<std::int64_t> counts;
};

/// Draws n1 cohort units without replacement, unit weight exp(p_{x(unit)}).
CandidateDesign draw_softmax_design(std::string design_id, std::vector<double> params, std::size_t n1,
                                    const Cohort& cohort, Rng& rng);

/// Draws exactly counts[m] units uniformly without replacement from level m.
CandidateDesign draw_fixed_counts_design(std::string design_id, std::span<const std::int64_t> counts,
                                         const Cohort& cohort, Rng& rng);

/// `num_designs` softmax designs "d000", "d001", ... with p_x ~ N(0,1).
std::vector<CandidateDesign> draw_candidate_designs(std::size_t num_designs, std::size_t n1, const Cohort& cohort,
                                                    std::uint64_t seed);

// ---------------------------------------------------------------------------
// Monte Carlo studies

struct McConfig {
  std::size_t reps = 1000;
  PropensityMap e;
  Allocation f0;
  /// Reference optimum the deviation of each design is measured against.
  Allocation f1_star;
  std::uint64_t seed = 0;
  OutcomeMode mode = OutcomeMode::kStored;
  OutcomeSampler sampler;
  Execution exec = Execution::kParallel;
  std::optional<std::uint64_t> fixed_stream;
};

struct McStudyResult {
  std::string design_id;
  double deviation = 0.0;
  double emp_variance = 0.0;
  double emp_mean = 0.0;
  std::size_t replications = 0;
  std::uint64_t seed = 0;
  std::size_t n1 = 0;
};

struct SkippedDesign {
  std::string design_id;
  ErrorKind kind;
  std::string message;
};

struct SweepResult {
  std::vector<McStudyResult> points;
  std::vector<SkippedDesign> skipped;
};

ReplicationPlan make_plan(const CandidateDesign& design, const Cohort& cohort);

/// Runs `reps` experiments on one design. Throws PositivityViolation when the
/// design misses a level that carries target mass.
McStudyResult run_mc_study(const CandidateDesign& design, const Cohort& cohort, const McConfig& config);

/// Same as run_mc_study over many designs; designs failing the positivity
/// pre-flight are listed in `skipped` instead of aborting the sweep.
SweepResult run_sweep(std::span<const CandidateDesign> designs, const Cohort& cohort, const McConfig& config);

/// Per-level counts floor(share_m * budget / C_m).
std::vector<std::int64_t> budget_split_counts(std::span<const double> shares, const CostSchedule& costs);

/// Cost-constrained sweep: each design splits the budget across levels by a
/// Dirichlet(1) draw and recruits floor(level budget / unit cost) units per
/// level. Deviations are measured against `config.f1_star`, normally the
/// cost-constrained optimum.
SweepResult run_cost_study(const CostSchedule& costs, const Cohort& cohort, std::size_t num_designs,
                           const McConfig& config);

// ---------------------------------------------------------------------------
// Fits

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t n_points = 0;
};

/// OLS of emp_variance on deviation; points are (deviation, emp_variance).
FitResult fit_variance_vs_deviation(std::span<const std::pair<double, double>> points);

double pearson_correlation(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of average ranks.
double spearman_correlation(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Study drivers

struct StudyReport {
  std::string source;  // "synthetic", "synthetic-cost", "star", "star-standin"
  std::vector<McStudyResult> points;
  std::vector<SkippedDesign> skipped;
  /// Designs excluded from the fit (naive / optimal reference points).
  std::vector<std::string> reference_ids;
  FitResult fit;
  double pearson = 0.0;
  double spearman = 0.0;
  Allocation f0;
  Allocation f1_star;
  SigmaProfile sigma;
  double true_ate = 0.0;
};

struct SyntheticStudyConfig {
  SyntheticDgpSpec dgp;
  std::size_t designs = 100;
  std::size_t reps = 1000;
  OutcomeMode mode = OutcomeMode::kRedraw;
  bool include_reference_designs = true;
  Execution exec = Execution::kParallel;
};

/// Softmax-design sweep on the synthetic model plus the "naive" (f1 = f0)
/// and "optimal" (f1 = f1*) reference designs.
StudyReport run_synthetic_study(const SyntheticStudyConfig& config);

struct CostStudyConfig {
  SyntheticDgpSpec dgp;
  std::vector<double> unit_cost{20.0, 30.0, 40.0};
  double budget = 30000.0;
  std::size_t designs = 100;
  std::size_t reps = 1000;
  OutcomeMode mode = OutcomeMode::kRedraw;
  Execution exec = Execution::kParallel;
};

StudyReport run_synthetic_cost_study(const CostStudyConfig& config);

// ---------------------------------------------------------------------------
// STAR-format semi-synthetic pipeline

/// One student row: raw covariate codes as they appear in the file.
struct StarRow {
  std::optional<int> treatment;
  std::optional<std::string> race;
  std::optional<std::string> urbanicity;
  std::optional<double> score;
};

/// Deterministic same-schema stand-in for the real student file: 4584 rows
/// over 2 race x 4 urbanicity cells, about 6% missing scores.
std::vector<StarRow> star_standin_rows(std::uint64_t seed = 1985);

struct StarCohort {
  Cohort cohort;  // levels "r|u", both potential outcomes filled in
  Allocation f0;  // empirical 8-cell distribution
  double e = 0.0; // treated share of retained rows
  SigmaProfile sigma;
  Allocation f1_star;
  std::vector<double> coefficients;  // intercept, T, race2, urb2, urb3, urb4
  std::size_t excluded_rows = 0;
};

/// Drops rows with missing covariates or treatment, fits
/// Y ~ 1 + T + 1{race=2} + 1{urb=2} + 1{urb=3} + 1{urb=4} on rows with a
/// score, and fills every unobserved potential outcome with the fitted
/// value. `race_map` recodes raw race values to 1/2; without it raw values
/// must already be "1" or "2". Unmapped values count as missing.
StarCohort prepare_star_cohort(std::span<const StarRow> rows,
                               const std::map<std::string, int>* race_map = nullptr);

struct StarStudyConfig {
  std::size_t candidates = 500;
  std::size_t n1 = 500;
  std::size_t reps = 200;
  std::uint64_t seed = 0;
  /// Overrides the treated share as treatment probability.
  std::optional<double> e;
  Execution exec = Execution::kParallel;
};

StudyReport star_pipeline(std::span<const StarRow> rows, const StarStudyConfig& config,
                          const std::map<std::string, int>* race_map = nullptr, std::string source = "star");

}  // namespace trialdesign
