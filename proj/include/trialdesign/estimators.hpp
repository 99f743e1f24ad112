#pragma once

#include <span>
#include <vector>

#include "trialdesign/domain.hpp"

namespace trialdesign {

enum class KernelKind { kEpanechnikov, kGaussian, kUniform };

/// Smoothing kernel and bandwidth for the local-averaging CATE estimator.
class KernelSpec {
 public:
  KernelSpec(KernelKind kind, double bandwidth);

  /// Epanechnikov with h = half the minimum level spacing, which makes the
  /// kernel estimator coincide with the per-level Horvitz-Thompson estimator.
  static KernelSpec default_for(const CovariateDomain& domain);

  KernelKind kind() const { return kind_; }
  double bandwidth() const { return h_; }
  /// Squared L2 norm of the kernel, integral of K(u)^2 du.
  double k2() const;
  /// K(u).
  double operator()(double u) const;
  bool compact_support() const { return kind_ != KernelKind::kGaussian; }

 private:
  KernelKind kind_;
  double h_;
};

/// Cell means m0(x), m1(x) used by the augmented estimator.
struct OutcomeModel {
  CovariateDomain domain;
  std::vector<double> m0;
  std::vector<double> m1;

  OutcomeModel(CovariateDomain d, std::vector<double> mu0, std::vector<double> mu1);
  static OutcomeModel zero(const CovariateDomain& d);
};

/// Horvitz-Thompson term T*Y/e - (1-T)*Y/(1-e) for one trial unit.
double ht_term(const UnitRecord& unit, const PropensityMap& e);

/// Per-level Horvitz-Thompson CATE over the trial units (s = 1) at `level`.
/// Throws EmptyCell when no trial unit sits at the level.
double ht_cate(std::span<const UnitRecord> dataset, LevelIndex level, const PropensityMap& e);

/// Kernel-smoothed CATE at a numeric target value; the domain of `e` must
/// carry level values. Throws ZeroKernelMass when no unit gets positive weight.
double kernel_cate(std::span<const UnitRecord> dataset, double target_value, const KernelSpec& kernel,
                   const PropensityMap& e);

/// Reweighted estimator sum_m f0(x_m) * ht_cate(x_m). Throws
/// PositivityViolation naming the first level with target mass but no trial
/// units.
double ipsw_ate(std::span<const UnitRecord> dataset, const Allocation& f0, const PropensityMap& e);

/// Same estimator written as a weighted sum over units with weights
/// f0(X_i) / f1_hat(X_i), f1_hat being the empirical trial frequency.
double ipsw_ate_unit_weighted(std::span<const UnitRecord> dataset, const Allocation& f0,
                              const PropensityMap& e);

double kernel_ipsw_ate(std::span<const UnitRecord> dataset, const Allocation& f0, const KernelSpec& kernel,
                       const PropensityMap& e);

/// Mean influence value over the trial units. Units need an observed y.
double aipw_ate(std::span<const UnitRecord> dataset, const PropensityMap& e, const OutcomeModel& model);

/// Influence function of the AIPW estimator at one observation.
double influence_value(double y, int t, LevelIndex level, const PropensityMap& e, const OutcomeModel& model);

/// sigma_psi^2(x) = var1/e + var0/(1-e), returned on the SD scale.
SigmaProfile oracle_sigma_psi(std::span<const double> var1, std::span<const double> var0, const PropensityMap& e);

}  // namespace trialdesign
