#include "trialdesign/domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <utility>

#include "trialdesign/errors.hpp"

namespace trialdesign {

CovariateDomain::CovariateDomain(std::vector<std::string> ids,
                                 std::optional<std::vector<double>> values,
                                 std::optional<std::vector<Interval>> strata)
    : ids_(std::move(ids)), values_(std::move(values)), strata_(std::move(strata)) {
  if (ids_.empty()) fail(ErrorKind::kInvalidArgument, "covariate domain needs at least one level");
  std::set<std::string> seen;
  for (const auto& id : ids_) {
    if (!seen.insert(id).second) fail(ErrorKind::kInvalidArgument, "duplicate level id '" + id + "'", id);
  }
  if (values_) {
    if (values_->size() != ids_.size())
      fail(ErrorKind::kInvalidArgument, "level values do not match level count");
    for (double v : *values_)
      if (!std::isfinite(v)) fail(ErrorKind::kInvalidArgument, "level values must be finite");
  }
  if (strata_) {
    if (strata_->size() != ids_.size())
      fail(ErrorKind::kInvalidArgument, "strata bounds do not match level count");
    // Sorted, adjacent, non-empty: disjoint and covering [front.lo, back.hi].
    for (std::size_t l = 0; l < strata_->size(); ++l) {
      const auto& s = (*strata_)[l];
      if (!(s.lo < s.hi)) fail(ErrorKind::kInvalidArgument, "empty stratum", ids_[l]);
      if (l > 0 && (*strata_)[l - 1].hi != s.lo)
        fail(ErrorKind::kInvalidArgument, "strata are not contiguous", ids_[l]);
      if (s.closed_hi != (l + 1 == strata_->size()))
        fail(ErrorKind::kInvalidArgument, "only the last stratum may be closed", ids_[l]);
    }
  }
}

CovariateDomain CovariateDomain::ordinal(std::size_t m) {
  std::vector<std::string> ids;
  std::vector<double> values;
  for (std::size_t i = 1; i <= m; ++i) {
    ids.push_back(std::to_string(i));
    values.push_back(static_cast<double>(i));
  }
  return CovariateDomain(std::move(ids), std::move(values));
}

std::optional<LevelIndex> CovariateDomain::find(const std::string& id) const {
  auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) return std::nullopt;
  return static_cast<LevelIndex>(it - ids_.begin());
}

LevelIndex CovariateDomain::index_of(const std::string& id) const {
  auto idx = find(id);
  if (!idx) fail(ErrorKind::kInvalidArgument, "unknown level '" + id + "'", id);
  return *idx;
}

const std::vector<double>& CovariateDomain::values() const {
  if (!values_) fail(ErrorKind::kInvalidArgument, "domain levels carry no numeric values");
  return *values_;
}

double CovariateDomain::min_spacing() const {
  auto v = values();
  std::sort(v.begin(), v.end());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < v.size(); ++i) best = std::min(best, v[i] - v[i - 1]);
  return best;
}

Allocation::Allocation(CovariateDomain domain, std::vector<double> raw_weights)
    : domain_(std::move(domain)), probs_(std::move(raw_weights)) {
  if (probs_.size() != domain_.size())
    fail(ErrorKind::kInvalidArgument, "allocation has " + std::to_string(probs_.size()) +
                                          " weights for " + std::to_string(domain_.size()) + " levels");
  double total = 0.0;
  for (std::size_t m = 0; m < probs_.size(); ++m) {
    const double w = probs_[m];
    if (std::isnan(w) || !std::isfinite(w))
      fail(ErrorKind::kInvalidArgument, "allocation weight is not finite", domain_.id(m));
    if (w < 0.0) fail(ErrorKind::kNegativeWeight, "negative allocation weight", domain_.id(m));
    total += w;
  }
  if (total <= 0.0) fail(ErrorKind::kAllZeroWeights, "every allocation weight is zero");
  for (double& p : probs_) p /= total;
}

Allocation make_allocation(const CovariateDomain& domain, std::span<const double> raw_weights) {
  return Allocation(domain, std::vector<double>(raw_weights.begin(), raw_weights.end()));
}

PropensityMap::PropensityMap(CovariateDomain domain, std::vector<double> e)
    : domain_(std::move(domain)), e_(std::move(e)) {
  if (e_.size() != domain_.size()) fail(ErrorKind::kInvalidArgument, "propensity map size mismatch");
  for (std::size_t m = 0; m < e_.size(); ++m) {
    if (!(e_[m] > 0.0 && e_[m] < 1.0))
      fail(ErrorKind::kInvalidArgument, "propensity must lie in (0,1)", domain_.id(m));
  }
}

PropensityMap PropensityMap::constant(const CovariateDomain& domain, double e) {
  return PropensityMap(domain, std::vector<double>(domain.size(), e));
}

void validate_records(const CovariateDomain& domain, std::span<const UnitRecord> units) {
  for (const auto& u : units) {
    if (u.s != 0 && u.s != 1) fail(ErrorKind::kInvalidArgument, "unit " + u.unit_id + ": s not in {0,1}");
    if (u.t != 0 && u.t != 1) fail(ErrorKind::kInvalidArgument, "unit " + u.unit_id + ": t not in {0,1}");
    if (u.x >= domain.size()) fail(ErrorKind::kInvalidArgument, "unit " + u.unit_id + ": level out of domain");
  }
}

SigmaProfile::SigmaProfile(CovariateDomain domain, std::vector<double> sigma)
    : domain_(std::move(domain)), sigma_(std::move(sigma)) {
  if (sigma_.size() != domain_.size()) fail(ErrorKind::kInvalidArgument, "sigma profile size mismatch");
  for (std::size_t m = 0; m < sigma_.size(); ++m) {
    if (!(sigma_[m] >= 0.0) || !std::isfinite(sigma_[m]))
      fail(ErrorKind::kInvalidArgument, "sigma must be finite and nonnegative", domain_.id(m));
  }
}

SigmaProfile SigmaProfile::scaled(double c) const {
  if (!(c > 0.0)) fail(ErrorKind::kInvalidArgument, "sigma scale must be positive");
  auto s = sigma_;
  for (double& v : s) v *= c;
  return SigmaProfile(domain_, std::move(s));
}

CostSchedule::CostSchedule(CovariateDomain domain, std::vector<double> unit_cost, double budget)
    : domain_(std::move(domain)), unit_cost_(std::move(unit_cost)), budget_(budget) {
  if (unit_cost_.size() != domain_.size()) fail(ErrorKind::kInvalidArgument, "cost schedule size mismatch");
  for (std::size_t m = 0; m < unit_cost_.size(); ++m) {
    if (!(unit_cost_[m] > 0.0) || !std::isfinite(unit_cost_[m]))
      fail(ErrorKind::kInvalidArgument, "unit cost must be positive", domain_.id(m));
  }
  if (!(budget_ > 0.0) || !std::isfinite(budget_)) fail(ErrorKind::kInvalidArgument, "budget must be positive");
}

std::vector<std::int64_t> integer_counts(const Allocation& allocation, std::int64_t n1) {
  if (n1 < 1) fail(ErrorKind::kInvalidArgument, "n1 must be at least 1");
  const auto& p = allocation.probs();
  const std::size_t m = p.size();
  std::vector<std::int64_t> counts(m);
  std::vector<double> remainder(m);
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double quota = static_cast<double>(n1) * p[i];
    counts[i] = static_cast<std::int64_t>(std::floor(quota));
    remainder[i] = quota - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  // Rounding in n1 * p can overshoot by one seat when p sums to 1 + ulp.
  while (assigned > n1) {
    auto it = std::max_element(counts.begin(), counts.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n1; k = (k + 1) % m) {
    ++counts[order[k]];
    ++assigned;
  }
  return counts;
}

Stratification stratify(std::span<const double> values, std::span<const double> edges) {
  if (edges.size() < 2) fail(ErrorKind::kInvalidArgument, "stratification needs at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) fail(ErrorKind::kInvalidArgument, "stratum edges must be strictly increasing");
  }
  const std::size_t strata = edges.size() - 1;
  std::vector<std::string> ids;
  std::vector<Interval> bounds;
  for (std::size_t l = 0; l < strata; ++l) {
    ids.push_back(std::to_string(l + 1));
    bounds.push_back({edges[l], edges[l + 1], l + 1 == strata});
  }
  Stratification out{CovariateDomain(std::move(ids), std::nullopt, std::move(bounds)), {}};
  out.assignment.reserve(values.size());
  for (double v : values) {
    if (!(v >= edges.front() && v <= edges.back()))
      fail(ErrorKind::kValueOutOfSupport, "value " + std::to_string(v) + " lies outside every stratum");
    // First edge strictly greater than v closes the stratum containing v.
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    std::size_t l = static_cast<std::size_t>(it - edges.begin());
    out.assignment.push_back(std::min(l, strata) - 1);
  }
  return out;
}

void require_same_levels(const CovariateDomain& a, const CovariateDomain& b, const char* what) {
  if (a.ids() != b.ids())
    fail(ErrorKind::kInvalidArgument, std::string(what) + ": inputs are defined on different level sets");
}

}  // namespace trialdesign
