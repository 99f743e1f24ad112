#include "trialdesign/sigma_estimation.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "trialdesign/allocation.hpp"
#include "trialdesign/errors.hpp"

namespace trialdesign {

namespace {

struct Moments {
  std::size_t n = 0;
  std::optional<double> mean;
  std::optional<double> var;
};

Moments two_pass(const std::vector<double>& ys) {
  Moments out;
  out.n = ys.size();
  if (ys.empty()) return out;
  double sum = 0.0;
  for (double y : ys) sum += y;
  const double mean = sum / static_cast<double>(ys.size());
  out.mean = mean;
  if (ys.size() >= 2) {
    double ss = 0.0;
    for (double y : ys) ss += (y - mean) * (y - mean);
    out.var = ss / static_cast<double>(ys.size() - 1);
  }
  return out;
}

}  // namespace

std::vector<CellStats> cell_stats(std::span<const UnitRecord> obs, const CovariateDomain& domain) {
  const std::size_t m = domain.size();
  std::vector<std::vector<double>> treated(m), control(m);
  for (const auto& u : obs) {
    if (u.s != 0 || !u.y) continue;
    if (u.x >= m) fail(ErrorKind::kInvalidArgument, "unit " + u.unit_id + ": level out of domain");
    (u.t == 1 ? treated : control)[u.x].push_back(*u.y);
  }
  std::vector<CellStats> stats(m);
  for (std::size_t l = 0; l < m; ++l) {
    const auto t = two_pass(treated[l]);
    const auto c = two_pass(control[l]);
    stats[l] = CellStats{l, t.n, c.n, t.mean, c.mean, t.var, c.var};
  }
  return stats;
}

SigmaEstimate estimate_sigma(std::span<const CellStats> stats, const PropensityMap& e,
                             const SigmaEstimateOptions& options) {
  const auto& domain = e.domain();
  if (stats.size() != domain.size()) fail(ErrorKind::kInvalidArgument, "cell statistics do not match the domain");

  // Pooled within-level variance per arm: sum (n-1) S / sum (n-1).
  auto pooled = [&](bool treated_arm) -> std::optional<double> {
    double ss = 0.0;
    double dof = 0.0;
    for (const auto& c : stats) {
      const auto& v = treated_arm ? c.var_treated : c.var_control;
      const std::size_t n = treated_arm ? c.n_treated : c.n_control;
      if (!v) continue;
      ss += *v * static_cast<double>(n - 1);
      dof += static_cast<double>(n - 1);
    }
    if (dof == 0.0) return std::nullopt;
    return ss / dof;
  };

  SigmaEstimate out{SigmaProfile(domain, std::vector<double>(domain.size(), 0.0)), {}, {}, {}};
  std::vector<double> sigma(domain.size());
  for (std::size_t l = 0; l < stats.size(); ++l) {
    const auto& c = stats[l];
    auto s1 = c.var_treated;
    auto s0 = c.var_control;
    bool used_pool = false;
    if (!s1 && options.pool_sparse_cells) {
      s1 = pooled(true);
      used_pool = true;
    }
    if (!s0 && options.pool_sparse_cells) {
      s0 = pooled(false);
      used_pool = true;
    }
    if (!s1) fail(ErrorKind::kInsufficientCell, "fewer than two treated units at level " + domain.id(l), domain.id(l),
                  "treated");
    if (!s0) fail(ErrorKind::kInsufficientCell, "fewer than two control units at level " + domain.id(l), domain.id(l),
                  "control");
    sigma[l] = std::sqrt(*s1 / e[l] + *s0 / (1.0 - e[l]));
    out.n_treated.push_back(c.n_treated);
    out.n_control.push_back(c.n_control);
    out.pooled.push_back(used_pool);
  }
  out.profile = SigmaProfile(domain, std::move(sigma));
  return out;
}

Allocation estimate_optimal_allocation(std::span<const UnitRecord> obs, const Allocation& f0, const PropensityMap& e,
                                       const SigmaEstimateOptions& options) {
  require_same_levels(f0.domain(), e.domain(), "estimate_optimal_allocation");
  const auto stats = cell_stats(obs, e.domain());
  return optimal_allocation(f0, estimate_sigma(stats, e, options).profile);
}

double estimate_deviation(const Allocation& f1, std::span<const UnitRecord> obs, const Allocation& f0,
                          const PropensityMap& e, const SigmaEstimateOptions& options) {
  return deviation_metric(f1, estimate_optimal_allocation(obs, f0, e, options));
}

}  // namespace trialdesign
