#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trialdesign/domain.hpp"
#include "trialdesign/errors.hpp"
#include "trialdesign/estimators.hpp"

namespace trialdesign {

/// Variance of the reweighted estimator: (1/n1) sum_m f0^2 sigma^2 / f1.
/// Levels with f0 * sigma = 0 contribute nothing, whatever f1 is there.
double ipsw_variance(const Allocation& f0, const Allocation& f1, const SigmaProfile& sigma, std::int64_t n1);

/// n1-scaled form of `ipsw_variance` (the sum alone).
double scaled_ipsw_variance(const Allocation& f0, const Allocation& f1, const SigmaProfile& sigma);

/// Asymptotic variance of the kernel-smoothed estimator: k2 / (n1 h) times the sum.
double kernel_ipsw_variance(const Allocation& f0, const Allocation& f1, const SigmaProfile& sigma, std::int64_t n1,
                            const KernelSpec& kernel);

/// f1*(x_m) proportional to f0(x_m) sigma(x_m).
Allocation optimal_allocation(const Allocation& f0, const SigmaProfile& sigma);

/// D(f1) = var_1(f1*/f1) = sum f1*^2 / f1 - 1.
double deviation_metric(const Allocation& f1, const Allocation& f1_star);

/// Same quantity computed literally as the f1-weighted variance of the ratio
/// f1*/f1; kept as an independent route for cross-checks.
double deviation_metric_weighted_variance(const Allocation& f1, const Allocation& f1_star);

struct VarianceDecomposition {
  double base_term = 0.0;  // (sum f0 sigma)^2
  double deviation = 0.0;  // D(f1) against f1*
};

VarianceDecomposition variance_decomposition(const Allocation& f0, const Allocation& f1, const SigmaProfile& sigma);

/// Optimum under a fixed budget: f0 sigma / sqrt(C_m), normalized.
Allocation cost_optimal_allocation(const Allocation& f0, const SigmaProfile& sigma, const CostSchedule& costs);

/// (sum_m C_m f1_m) * (sum_m f0^2 sigma^2 / f1_m); proportional to the
/// variance reached when the whole budget is spent on allocation f1.
double budget_normalized_variance(const Allocation& f0, const Allocation& f1, const SigmaProfile& sigma,
                                  const CostSchedule& costs);

/// Total cost of recruiting the given per-level counts.
double recruitment_cost(std::span<const std::int64_t> counts, const CostSchedule& costs);

/// Largest n1 whose largest-remainder counts cost at most the budget.
std::int64_t affordable_n1(const Allocation& allocation, const CostSchedule& costs);

/// Equal per-level precision: sigma^2 / sum sigma^2.
Allocation same_precision_allocation(const SigmaProfile& sigma);

/// f0^k sigma^(2-k), normalized; 0^0 is taken as 1.
Allocation compromise_allocation(const Allocation& f0, const SigmaProfile& sigma, double k);

struct DesignReport {
  std::string design_id;
  Allocation f1;
  double deviation = 0.0;
  /// Absolute variance when n1 was supplied, otherwise the n1-scaled sum.
  double variance = 0.0;
  bool variance_is_scaled = true;
  double base_term = 0.0;
  double factor = 0.0;  // deviation + 1
  std::optional<std::int64_t> n1;
  /// 1-based position among the candidates that could be evaluated.
  std::optional<int> rank;
  /// Set when the candidate violates positivity (or another precondition).
  std::optional<ErrorKind> error;
  std::optional<std::string> error_level;
  std::string error_message;

  bool ok() const { return !error.has_value(); }
};

struct Candidate {
  std::string design_id;
  Allocation f1;
};

/// Evaluates every candidate; ranked reports come first sorted by deviation
/// (ties by design_id), followed by the candidates that failed.
std::vector<DesignReport> rank_candidates(const Allocation& f0, const SigmaProfile& sigma,
                                          std::span<const Candidate> candidates,
                                          std::optional<std::int64_t> n1 = std::nullopt);

}  // namespace trialdesign
