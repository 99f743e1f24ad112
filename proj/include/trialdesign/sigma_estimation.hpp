#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trialdesign/domain.hpp"

namespace trialdesign {

/// Outcome summaries of one (level, arm) pair of cells in observational data.
/// Variances use the n-1 denominator and are absent below two units.
struct CellStats {
  LevelIndex level = 0;
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
  std::optional<double> mean_treated;
  std::optional<double> mean_control;
  std::optional<double> var_treated;
  std::optional<double> var_control;
};

/// Per-level cell statistics over the s = 0 rows that have an outcome.
std::vector<CellStats> cell_stats(std::span<const UnitRecord> obs, const CovariateDomain& domain);

struct SigmaEstimateOptions {
  /// Fill an absent arm variance with the pooled within-level variance of
  /// that arm instead of failing. Pooled levels are flagged in the result.
  bool pool_sparse_cells = false;
};

/// Plug-in conditional variability. Observational outcomes only identify
/// sigma_psi up to an unknown positive factor; the factor cancels in every
/// normalized quantity (f1_hat*, D_hat) derived from it.
struct SigmaEstimate {
  SigmaProfile profile;
  std::vector<std::size_t> n_treated;
  std::vector<std::size_t> n_control;
  std::vector<bool> pooled;
};

SigmaEstimate estimate_sigma(std::span<const CellStats> stats, const PropensityMap& e,
                             const SigmaEstimateOptions& options = {});

Allocation estimate_optimal_allocation(std::span<const UnitRecord> obs, const Allocation& f0, const PropensityMap& e,
                                       const SigmaEstimateOptions& options = {});

double estimate_deviation(const Allocation& f1, std::span<const UnitRecord> obs, const Allocation& f0,
                          const PropensityMap& e, const SigmaEstimateOptions& options = {});

}  // namespace trialdesign
