#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace trialdesign {

/// Index of a level within its CovariateDomain.
using LevelIndex = std::size_t;

/// Half-open interval [lo, hi); the last stratum of a partition is closed.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool closed_hi = false;

  bool contains(double v) const { return v >= lo && (closed_hi ? v <= hi : v < hi); }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Finite, ordered set of covariate levels. Levels may carry a numeric value
/// (ordinal covariates, needed by the kernel estimator) and, when produced by
/// `stratify`, the interval each stratum covers.
class CovariateDomain {
 public:
  CovariateDomain() = default;
  explicit CovariateDomain(std::vector<std::string> ids,
                           std::optional<std::vector<double>> values = std::nullopt,
                           std::optional<std::vector<Interval>> strata = std::nullopt);

  /// Levels "1".."M" valued 1..M.
  static CovariateDomain ordinal(std::size_t m);

  std::size_t size() const { return ids_.size(); }
  const std::string& id(LevelIndex i) const { return ids_.at(i); }
  const std::vector<std::string>& ids() const { return ids_; }

  std::optional<LevelIndex> find(const std::string& id) const;
  /// Throws InvalidArgument when the id is not a level of this domain.
  LevelIndex index_of(const std::string& id) const;

  bool has_values() const { return values_.has_value(); }
  /// Numeric level values; throws InvalidArgument on a categorical domain.
  const std::vector<double>& values() const;
  const std::optional<std::vector<Interval>>& strata_bounds() const { return strata_; }

  /// Smallest gap between adjacent sorted level values (infinity when M = 1).
  double min_spacing() const;

  friend bool operator==(const CovariateDomain&, const CovariateDomain&) = default;

 private:
  std::vector<std::string> ids_;
  std::optional<std::vector<double>> values_;
  std::optional<std::vector<Interval>> strata_;
};

/// Probability vector over the levels of a domain. Construction re-normalizes
/// the supplied weights so that the sum is 1 to within 1e-12.
class Allocation {
 public:
  static constexpr double kSumTolerance = 1e-12;

  Allocation() = default;
  Allocation(CovariateDomain domain, std::vector<double> raw_weights);

  const CovariateDomain& domain() const { return domain_; }
  const std::vector<double>& probs() const { return probs_; }
  double operator[](LevelIndex i) const { return probs_[i]; }
  std::size_t size() const { return probs_.size(); }

 private:
  CovariateDomain domain_;
  std::vector<double> probs_;
};

Allocation make_allocation(const CovariateDomain& domain, std::span<const double> raw_weights);

/// Treatment probability e(x) per level, strictly inside (0, 1).
class PropensityMap {
 public:
  PropensityMap() = default;
  PropensityMap(CovariateDomain domain, std::vector<double> e);
  static PropensityMap constant(const CovariateDomain& domain, double e);

  const CovariateDomain& domain() const { return domain_; }
  double operator[](LevelIndex i) const { return e_[i]; }
  const std::vector<double>& values() const { return e_; }

 private:
  CovariateDomain domain_;
  std::vector<double> e_;
};

/// One row of the combined observational + trial data. `x` indexes the level
/// in the dataset's CovariateDomain.
struct UnitRecord {
  std::string unit_id;
  int s = 1;  // 1 = trial, 0 = target cohort
  int t = 0;
  LevelIndex x = 0;
  std::optional<double> y;
};

struct Dataset {
  CovariateDomain domain;
  std::vector<UnitRecord> units;
};

/// Checks s, t in {0,1} and x inside the domain.
void validate_records(const CovariateDomain& domain, std::span<const UnitRecord> units);

/// Per-level conditional variability sigma_psi(x), standard-deviation scale.
class SigmaProfile {
 public:
  SigmaProfile() = default;
  SigmaProfile(CovariateDomain domain, std::vector<double> sigma);

  const CovariateDomain& domain() const { return domain_; }
  const std::vector<double>& values() const { return sigma_; }
  double operator[](LevelIndex i) const { return sigma_[i]; }
  std::size_t size() const { return sigma_.size(); }

  /// Every entry multiplied by c > 0.
  SigmaProfile scaled(double c) const;

 private:
  CovariateDomain domain_;
  std::vector<double> sigma_;
};

class CostSchedule {
 public:
  CostSchedule(CovariateDomain domain, std::vector<double> unit_cost, double budget);

  const CovariateDomain& domain() const { return domain_; }
  const std::vector<double>& unit_cost() const { return unit_cost_; }
  double operator[](LevelIndex i) const { return unit_cost_[i]; }
  double budget() const { return budget_; }

 private:
  CovariateDomain domain_;
  std::vector<double> unit_cost_;
  double budget_;
};

/// Largest-remainder (Hamilton) apportionment of n1 units; ties go to the
/// lower level index. The counts sum to n1 exactly.
std::vector<std::int64_t> integer_counts(const Allocation& allocation, std::int64_t n1);

struct Stratification {
  CovariateDomain domain;
  std::vector<LevelIndex> assignment;
};

/// Bins continuous values into the strata defined by strictly increasing
/// edges [e0, e1, ..., eL]; stratum l covers [e_{l-1}, e_l), the last one is
/// closed on the right. Strata are identified by their index ("1".."L").
Stratification stratify(std::span<const double> values, std::span<const double> edges);

/// Checks the invariant that two domains describe the same ordered levels.
void require_same_levels(const CovariateDomain& a, const CovariateDomain& b, const char* what);

}  // namespace trialdesign
