#include "trialdesign/estimators.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "trialdesign/errors.hpp"

namespace trialdesign {

namespace {

double observed_outcome(const UnitRecord& u) {
  if (!u.y) fail(ErrorKind::kInvalidArgument, "trial unit " + u.unit_id + " has no outcome");
  return *u.y;
}

struct HtCells {
  std::vector<double> sum;
  std::vector<std::size_t> count;
};

HtCells accumulate_ht(std::span<const UnitRecord> dataset, const PropensityMap& e) {
  const std::size_t m = e.domain().size();
  HtCells cells{std::vector<double>(m, 0.0), std::vector<std::size_t>(m, 0)};
  for (const auto& u : dataset) {
    if (u.s != 1) continue;
    if (u.x >= m) fail(ErrorKind::kInvalidArgument, "unit " + u.unit_id + ": level out of domain");
    cells.sum[u.x] += ht_term(u, e);
    ++cells.count[u.x];
  }
  return cells;
}

void check_f0_domain(const Allocation& f0, const PropensityMap& e) {
  require_same_levels(f0.domain(), e.domain(), "ipsw");
}

}  // namespace

KernelSpec::KernelSpec(KernelKind kind, double bandwidth) : kind_(kind), h_(bandwidth) {
  if (!(h_ > 0.0) || !std::isfinite(h_)) fail(ErrorKind::kInvalidArgument, "kernel bandwidth must be positive");
}

KernelSpec KernelSpec::default_for(const CovariateDomain& domain) {
  const double spacing = domain.min_spacing();
  return KernelSpec(KernelKind::kEpanechnikov, std::isfinite(spacing) ? spacing / 2.0 : 1.0);
}

double KernelSpec::k2() const {
  switch (kind_) {
    case KernelKind::kEpanechnikov: return 3.0 / 5.0;
    case KernelKind::kUniform: return 1.0 / 2.0;
    case KernelKind::kGaussian: return 1.0 / (2.0 * std::sqrt(std::numbers::pi));
  }
  return 0.0;
}

double KernelSpec::operator()(double u) const {
  switch (kind_) {
    case KernelKind::kEpanechnikov: return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    case KernelKind::kUniform: return std::abs(u) <= 1.0 ? 0.5 : 0.0;
    case KernelKind::kGaussian: return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
  }
  return 0.0;
}

OutcomeModel::OutcomeModel(CovariateDomain d, std::vector<double> mu0, std::vector<double> mu1)
    : domain(std::move(d)), m0(std::move(mu0)), m1(std::move(mu1)) {
  if (m0.size() != domain.size() || m1.size() != domain.size())
    fail(ErrorKind::kInvalidArgument, "outcome model size mismatch");
  for (std::size_t i = 0; i < m0.size(); ++i) {
    if (!std::isfinite(m0[i]) || !std::isfinite(m1[i]))
      fail(ErrorKind::kInvalidArgument, "outcome model entries must be finite", domain.id(i));
  }
}

OutcomeModel OutcomeModel::zero(const CovariateDomain& d) {
  return OutcomeModel(d, std::vector<double>(d.size(), 0.0), std::vector<double>(d.size(), 0.0));
}

double ht_term(const UnitRecord& unit, const PropensityMap& e) {
  const double y = observed_outcome(unit);
  const double p = e[unit.x];
  return unit.t == 1 ? y / p : -y / (1.0 - p);
}

double ht_cate(std::span<const UnitRecord> dataset, LevelIndex level, const PropensityMap& e) {
  if (level >= e.domain().size()) fail(ErrorKind::kInvalidArgument, "level out of domain");
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& u : dataset) {
    if (u.s != 1 || u.x != level) continue;
    sum += ht_term(u, e);
    ++count;
  }
  if (count == 0) fail(ErrorKind::kEmptyCell, "no trial unit at level " + e.domain().id(level), e.domain().id(level));
  return sum / static_cast<double>(count);
}

double kernel_cate(std::span<const UnitRecord> dataset, double target_value, const KernelSpec& kernel,
                   const PropensityMap& e) {
  const auto& values = e.domain().values();
  const double h = kernel.bandwidth();
  // The 1/(n1 h^k) factors of numerator and denominator cancel, and so does
  // 1/K(0): with it, units at the target level weigh exactly 1 and a narrow
  // compact kernel reproduces ht_cate bit for bit.
  const double k0 = kernel(0.0);
  double num = 0.0;
  double den = 0.0;
  for (const auto& u : dataset) {
    if (u.s != 1) continue;
    const double w = kernel((values.at(u.x) - target_value) / h) / k0;
    if (w == 0.0) continue;
    num += w * ht_term(u, e);
    den += w;
  }
  if (!(den > 0.0))
    fail(ErrorKind::kZeroKernelMass, "no trial unit has positive kernel weight at x = " + std::to_string(target_value));
  return num / den;
}

double ipsw_ate(std::span<const UnitRecord> dataset, const Allocation& f0, const PropensityMap& e) {
  check_f0_domain(f0, e);
  const auto cells = accumulate_ht(dataset, e);
  double tau = 0.0;
  for (std::size_t m = 0; m < f0.size(); ++m) {
    if (f0[m] == 0.0) continue;
    if (cells.count[m] == 0)
      fail(ErrorKind::kPositivityViolation,
           "level " + f0.domain().id(m) + " has target mass but no trial units", f0.domain().id(m));
    tau += f0[m] * (cells.sum[m] / static_cast<double>(cells.count[m]));
  }
  return tau;
}

double ipsw_ate_unit_weighted(std::span<const UnitRecord> dataset, const Allocation& f0, const PropensityMap& e) {
  check_f0_domain(f0, e);
  const std::size_t m = f0.size();
  std::vector<std::size_t> count(m, 0);
  std::size_t n1 = 0;
  for (const auto& u : dataset) {
    if (u.s != 1) continue;
    ++count.at(u.x);
    ++n1;
  }
  for (std::size_t l = 0; l < m; ++l) {
    if (f0[l] > 0.0 && count[l] == 0)
      fail(ErrorKind::kPositivityViolation,
           "level " + f0.domain().id(l) + " has target mass but no trial units", f0.domain().id(l));
  }
  const double n = static_cast<double>(n1);
  double total = 0.0;
  for (const auto& u : dataset) {
    if (u.s != 1) continue;
    const double f1_hat = static_cast<double>(count[u.x]) / n;
    total += f0[u.x] / f1_hat * ht_term(u, e);
  }
  return total / n;
}

double kernel_ipsw_ate(std::span<const UnitRecord> dataset, const Allocation& f0, const KernelSpec& kernel,
                       const PropensityMap& e) {
  check_f0_domain(f0, e);
  const auto& values = e.domain().values();
  double tau = 0.0;
  for (std::size_t m = 0; m < f0.size(); ++m) {
    if (f0[m] == 0.0) continue;
    try {
      tau += f0[m] * kernel_cate(dataset, values[m], kernel, e);
    } catch (const DesignError& err) {
      if (err.kind() != ErrorKind::kZeroKernelMass) throw;
      fail(ErrorKind::kZeroKernelMass, err.what(), f0.domain().id(m));
    }
  }
  return tau;
}

double influence_value(double y, int t, LevelIndex level, const PropensityMap& e, const OutcomeModel& model) {
  const double p = e[level];
  const double m1 = model.m1.at(level);
  const double m0 = model.m0.at(level);
  return t * (y - m1) / p - (1 - t) * (y - m0) / (1.0 - p) + m1 - m0;
}

double aipw_ate(std::span<const UnitRecord> dataset, const PropensityMap& e, const OutcomeModel& model) {
  require_same_levels(model.domain, e.domain(), "aipw_ate");
  double total = 0.0;
  std::size_t n1 = 0;
  for (const auto& u : dataset) {
    if (u.s != 1) continue;
    total += influence_value(observed_outcome(u), u.t, u.x, e, model);
    ++n1;
  }
  if (n1 == 0) fail(ErrorKind::kInvalidArgument, "aipw_ate needs at least one trial unit");
  return total / static_cast<double>(n1);
}

SigmaProfile oracle_sigma_psi(std::span<const double> var1, std::span<const double> var0, const PropensityMap& e) {
  const std::size_t m = e.domain().size();
  if (var1.size() != m || var0.size() != m) fail(ErrorKind::kInvalidArgument, "variance vectors do not match domain");
  std::vector<double> sigma(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (var1[i] < 0.0 || var0[i] < 0.0)
      fail(ErrorKind::kInvalidArgument, "conditional variances must be nonnegative", e.domain().id(i));
    sigma[i] = std::sqrt(var1[i] / e[i] + var0[i] / (1.0 - e[i]));
  }
  return SigmaProfile(e.domain(), std::move(sigma));
}

}  // namespace trialdesign
