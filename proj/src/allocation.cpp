#include "trialdesign/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace trialdesign {

namespace {

void require_positive_where_needed(const Allocation& f0, const Allocation& f1, const SigmaProfile& sigma) {
  require_same_levels(f0.domain(), f1.domain(), "variance");
  require_same_levels(f0.domain(), sigma.domain(), "variance");
  for (std::size_t m = 0; m < f0.size(); ++m) {
    if (f0[m] * sigma[m] > 0.0 && !(f1[m] > 0.0))
      fail(ErrorKind::kPositivityViolation,
           "allocation puts no mass on level " + f0.domain().id(m) + ", which carries target variance",
           f0.domain().id(m));
  }
}

Allocation normalize_or_degenerate(const CovariateDomain& domain, std::vector<double> weights, const char* what) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0) || !std::isfinite(total))
    fail(ErrorKind::kDegenerateVariability, std::string(what) + ": every level has zero weighted variability");
  return Allocation(domain, std::move(weights));
}

}  // namespace

double scaled_ipsw_variance(const Allocation& f0, const Allocation& f1, const SigmaProfile& sigma) {
  require_positive_where_needed(f0, f1, sigma);
  double total = 0.0;
  for (std::size_t m = 0; m < f0.size(); ++m) {
    const double a = f0[m] * sigma[m];
    if (a == 0.0) continue;
    total += a * a / f1[m];
  }
  return total;
}

double ipsw_variance(const Allocation& f0, const Allocation& f1, const SigmaProfile& sigma, std::int64_t n1) {
  if (n1 < 1) fail(ErrorKind::kInvalidArgument, "n1 must be at least 1");
  return scaled_ipsw_variance(f0, f1, sigma) / static_cast<double>(n1);
}

double kernel_ipsw_variance(const Allocation& f0, const Allocation& f1, const SigmaProfile& sigma, std::int64_t n1,
                            const KernelSpec& kernel) {
  if (n1 < 1) fail(ErrorKind::kInvalidArgument, "n1 must be at least 1");
  return kernel.k2() * scaled_ipsw_variance(f0, f1, sigma) / (static_cast<double>(n1) * kernel.bandwidth());
}

Allocation optimal_allocation(const Allocation& f0, const SigmaProfile& sigma) {
  require_same_levels(f0.domain(), sigma.domain(), "optimal_allocation");
  std::vector<double> w(f0.size());
  for (std::size_t m = 0; m < w.size(); ++m) w[m] = f0[m] * sigma[m];
  return normalize_or_degenerate(f0.domain(), std::move(w), "optimal_allocation");
}

double deviation_metric(const Allocation& f1, const Allocation& f1_star) {
  require_same_levels(f1.domain(), f1_star.domain(), "deviation_metric");
  double total = 0.0;
  for (std::size_t m = 0; m < f1.size(); ++m) {
    if (f1_star[m] == 0.0) continue;
    if (!(f1[m] > 0.0))
      fail(ErrorKind::kPositivityViolation,
           "allocation puts no mass on level " + f1.domain().id(m) + ", which has optimal mass", f1.domain().id(m));
    total += f1_star[m] * f1_star[m] / f1[m];
  }
  // Nonnegative in exact arithmetic; clip rounding residue at the optimum.
  return std::max(0.0, total - 1.0);
}

double deviation_metric_weighted_variance(const Allocation& f1, const Allocation& f1_star) {
  require_same_levels(f1.domain(), f1_star.domain(), "deviation_metric");
  double mean = 0.0;
  double second = 0.0;
  for (std::size_t m = 0; m < f1.size(); ++m) {
    if (f1[m] == 0.0) {
      if (f1_star[m] > 0.0)
        fail(ErrorKind::kPositivityViolation, "zero-probability level with optimal mass", f1.domain().id(m));
      continue;
    }
    const double r = f1_star[m] / f1[m];
    mean += f1[m] * r;
    second += f1[m] * r * r;
  }
  return second - mean * mean;
}

VarianceDecomposition variance_decomposition(const Allocation& f0, const Allocation& f1, const SigmaProfile& sigma) {
  require_positive_where_needed(f0, f1, sigma);
  double s = 0.0;
  for (std::size_t m = 0; m < f0.size(); ++m) s += f0[m] * sigma[m];
  return {s * s, deviation_metric(f1, optimal_allocation(f0, sigma))};
}

Allocation cost_optimal_allocation(const Allocation& f0, const SigmaProfile& sigma, const CostSchedule& costs) {
  require_same_levels(f0.domain(), sigma.domain(), "cost_optimal_allocation");
  require_same_levels(f0.domain(), costs.domain(), "cost_optimal_allocation");
  std::vector<double> w(f0.size());
  for (std::size_t m = 0; m < w.size(); ++m) w[m] = f0[m] * sigma[m] / std::sqrt(costs[m]);
  return normalize_or_degenerate(f0.domain(), std::move(w), "cost_optimal_allocation");
}

double budget_normalized_variance(const Allocation& f0, const Allocation& f1, const SigmaProfile& sigma,
                                  const CostSchedule& costs) {
  require_same_levels(f1.domain(), costs.domain(), "budget_normalized_variance");
  double mean_cost = 0.0;
  for (std::size_t m = 0; m < f1.size(); ++m) mean_cost += costs[m] * f1[m];
  return mean_cost * scaled_ipsw_variance(f0, f1, sigma);
}

double recruitment_cost(std::span<const std::int64_t> counts, const CostSchedule& costs) {
  double total = 0.0;
  for (std::size_t m = 0; m < counts.size(); ++m) total += costs[m] * static_cast<double>(counts[m]);
  return total;
}

std::int64_t affordable_n1(const Allocation& allocation, const CostSchedule& costs) {
  require_same_levels(allocation.domain(), costs.domain(), "affordable_n1");
  // Hamilton rounding is not cost-monotone (Alabama paradox), so scan down
  // from the bound that no cheaper mix can beat.
  const auto& c = costs.unit_cost();
  const double cheapest = *std::min_element(c.begin(), c.end());
  for (auto n = static_cast<std::int64_t>(std::floor(costs.budget() / cheapest)); n >= 1; --n) {
    const auto counts = integer_counts(allocation, n);
    if (recruitment_cost(counts, costs) <= costs.budget()) return n;
  }
  return 0;
}

Allocation same_precision_allocation(const SigmaProfile& sigma) {
  std::vector<double> w(sigma.size());
  for (std::size_t m = 0; m < w.size(); ++m) w[m] = sigma[m] * sigma[m];
  return normalize_or_degenerate(sigma.domain(), std::move(w), "same_precision_allocation");
}

Allocation compromise_allocation(const Allocation& f0, const SigmaProfile& sigma, double k) {
  if (!(k >= 0.0 && k <= 1.0)) fail(ErrorKind::kInvalidArgument, "compromise exponent k must lie in [0,1]");
  require_same_levels(f0.domain(), sigma.domain(), "compromise_allocation");
  std::vector<double> w(f0.size());
  for (std::size_t m = 0; m < w.size(); ++m) {
    // std::pow(0.0, 0.0) == 1, matching the 0^0 = 1 convention.
    w[m] = std::pow(f0[m], k) * std::pow(sigma[m], 2.0 - k);
  }
  return normalize_or_degenerate(f0.domain(), std::move(w), "compromise_allocation");
}

std::vector<DesignReport> rank_candidates(const Allocation& f0, const SigmaProfile& sigma,
                                          std::span<const Candidate> candidates, std::optional<std::int64_t> n1) {
  if (n1 && *n1 < 1) fail(ErrorKind::kInvalidArgument, "n1 must be at least 1");
  const Allocation f1_star = optimal_allocation(f0, sigma);
  double weighted_sigma = 0.0;
  for (std::size_t m = 0; m < f0.size(); ++m) weighted_sigma += f0[m] * sigma[m];
  const double base_term = weighted_sigma * weighted_sigma;
  std::vector<DesignReport> reports;
  reports.reserve(candidates.size());
  for (const auto& cand : candidates) {
    DesignReport r;
    r.design_id = cand.design_id;
    r.f1 = cand.f1;
    r.n1 = n1;
    try {
      const double scaled = scaled_ipsw_variance(f0, cand.f1, sigma);
      r.base_term = base_term;
      r.deviation = deviation_metric(cand.f1, f1_star);
      r.factor = r.deviation + 1.0;
      const double via_decomposition = r.base_term * r.factor;
      if (std::abs(via_decomposition - scaled) > 1e-10 * std::max(1.0, std::abs(scaled)))
        throw std::logic_error("variance decomposition identity failed for " + cand.design_id);
      r.variance_is_scaled = !n1.has_value();
      r.variance = n1 ? scaled / static_cast<double>(*n1) : scaled;
    } catch (const DesignError& err) {
      r.error = err.kind();
      r.error_level = err.level();
      r.error_message = err.what();
    }
    reports.push_back(std::move(r));
  }
  std::stable_sort(reports.begin(), reports.end(), [](const DesignReport& a, const DesignReport& b) {
    if (a.ok() != b.ok()) return a.ok();
    if (!a.ok()) return a.design_id < b.design_id;
    if (a.deviation != b.deviation) return a.deviation < b.deviation;
    return a.design_id < b.design_id;
  });
  int rank = 0;
  for (auto& r : reports)
    if (r.ok()) r.rank = ++rank;
  return reports;
}

}  // namespace trialdesign
