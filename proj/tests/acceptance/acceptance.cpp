// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Optional argument: path to a STAR-format student CSV for criterion 12
// (the bundled stand-in is used otherwise).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "trialdesign/allocation.hpp"
#include "trialdesign/estimators.hpp"
#include "trialdesign/io.hpp"
#include "trialdesign/mc_kernels.hpp"
#include "trialdesign/sigma_estimation.hpp"
#include "trialdesign/simulation.hpp"

using namespace trialdesign;

namespace {

constexpr std::uint64_t kSeed = 7;

int failures = 0;

void report(int id, bool ok, const std::string& what, double seconds) {
  std::printf("criterion %2d: %s  %s  [%.2f s]\n", id, ok ? "PASS" : "FAIL", what.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

template <typename F>
void criterion(int id, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string what;
  bool ok = false;
  try {
    ok = body(what);
  } catch (const std::exception& e) {
    what += std::string(" exception: ") + e.what();
    ok = false;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(id, ok, what, secs);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<double> vec(const Allocation& a) { return a.probs(); }

// Synthetic model, written out here rather than taken from the library.
const std::vector<double> kF0{0.3, 0.2, 0.5};
const std::vector<double> kX{1.0, 2.0, 3.0};
double oracle_sigma_sq(double x) { return 1.0 / 0.5 + std::pow(x, 8) / 0.5; }

bool relative_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

// Shared across criteria 4 to 7.
std::optional<StudyReport> synthetic_report;

const StudyReport& synthetic_sweep() {
  if (!synthetic_report) {
    SyntheticStudyConfig cfg{SyntheticDgpSpec::defaults(kSeed), 100, 1000, OutcomeMode::kRedraw, true,
                             Execution::kParallel};
    synthetic_report = run_synthetic_study(cfg);
  }
  return *synthetic_report;
}

const McStudyResult* find_point(const StudyReport& r, const std::string& id) {
  for (const auto& p : r.points)
    if (p.design_id == id) return &p;
  return nullptr;
}

}  // namespace

int main(int argc, char** argv) {
  std::optional<std::string> star_path;
  if (argc > 1) star_path = argv[1];

  // 1. Decomposition identity.
  criterion(1, [](std::string& what) {
    std::mt19937_64 g(101);
    std::uniform_int_distribution<int> msize(1, 10);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const auto m = static_cast<std::size_t>(msize(g));
      const auto d = CovariateDomain::ordinal(m);
      const auto f0v = oracle::dirichlet1(m, g), f1v = oracle::dirichlet1(m, g);
      auto sv = oracle::abs_normal(m, g);
      for (auto& s : sv) s += 0.05;
      const Allocation f0(d, f0v), f1(d, f1v);
      const SigmaProfile sigma(d, sv);
      const double lhs = scaled_ipsw_variance(f0, f1, sigma);
      const auto dec = variance_decomposition(f0, f1, sigma);
      const double rhs = dec.base_term * (dec.deviation + 1.0);
      // Independent route: literal sum against literal base term.
      double base = 0.0;
      for (std::size_t k = 0; k < m; ++k) base += f0[k] * sv[k];
      const double direct = oracle::weighted_sum(f0.probs(), sv, f1.probs());
      worst = std::max({worst, std::abs(lhs - rhs) / std::abs(rhs), std::abs(direct - rhs) / std::abs(rhs),
                        std::abs(base * base - dec.base_term) / dec.base_term});
    }
    what = fmt("max relative gap %.3e (tol 1e-10)", worst);
    return worst <= 1e-10;
  });

  // 2. Closed-form optimum versus a 0.005 simplex grid.
  criterion(2, [](std::string& what) {
    std::mt19937_64 g(202);
    const auto d = CovariateDomain::ordinal(3);
    double worst = -1.0;
    for (int i = 0; i < 20; ++i) {
      const auto f0v = oracle::dirichlet1(3, g);
      auto sv = oracle::abs_normal(3, g);
      for (auto& s : sv) s += 0.05;
      const Allocation f0(d, f0v);
      const SigmaProfile sigma(d, sv);
      const double opt = oracle::weighted_sum(f0v, sv, vec(optimal_allocation(f0, sigma)));
      const auto grid = oracle::grid_minimum(0.005, [&](const std::vector<double>& p) {
        return oracle::weighted_sum(f0v, sv, p);
      });
      worst = std::max(worst, (opt - grid.value) / opt);
    }
    what = fmt("max relative improvement of grid over optimum %.3e (tol 1e-12)", worst);
    return worst <= 1e-12;
  });

  // 3. Cost-constrained optimum versus the same grid on the budget-normalized objective.
  criterion(3, [](std::string& what) {
    std::mt19937_64 g(303);
    const auto d = CovariateDomain::ordinal(3);
    std::uniform_real_distribution<double> cost(1.0, 50.0);
    double worst = -1.0;
    for (int i = 0; i < 20; ++i) {
      std::vector<double> f0v, sv, cv;
      if (i == 0) {
        f0v = kF0;
        for (double x : kX) sv.push_back(std::sqrt(oracle_sigma_sq(x)));
        cv = {20.0, 30.0, 40.0};
      } else {
        f0v = oracle::dirichlet1(3, g);
        sv = oracle::abs_normal(3, g);
        for (auto& s : sv) s += 0.05;
        cv = {cost(g), cost(g), cost(g)};
      }
      auto objective = [&](const std::vector<double>& p) {
        double c = 0.0;
        for (std::size_t k = 0; k < 3; ++k) c += cv[k] * p[k];
        return c * oracle::weighted_sum(f0v, sv, p);
      };
      const Allocation f0(d, f0v);
      const SigmaProfile sigma(d, sv);
      const CostSchedule costs(d, cv, 30000.0);
      const auto fc = cost_optimal_allocation(f0, sigma, costs);
      const double opt = objective(vec(fc));
      const double lib = budget_normalized_variance(f0, fc, sigma, costs);
      if (!relative_close(opt, lib, 1e-12)) {
        what = "library objective disagrees with the oracle objective";
        return false;
      }
      worst = std::max(worst, (opt - oracle::grid_minimum(0.005, objective).value) / opt);
    }
    what = fmt("max relative improvement of grid over cost optimum %.3e (tol 1e-12)", worst);
    return worst <= 1e-12;
  });

  // 4. Full-scale synthetic sweep.
  criterion(4, [](std::string& what) {
    const auto& r = synthetic_sweep();
    what = fmt("slope %.4g", r.fit.slope) + fmt(", R^2 %.4f", r.fit.r_squared) +
           fmt(", Spearman %.4f", r.spearman) + fmt(", designs fitted %.0f", static_cast<double>(r.fit.n_points)) +
           fmt(", skipped %.0f", static_cast<double>(r.skipped.size()));
    return r.fit.slope > 0.0 && r.fit.r_squared >= 0.9 && r.spearman >= 0.8;
  });

  // 5. Unbiasedness of the pooled mean.
  criterion(5, [](std::string& what) {
    double closed = 0.0;
    for (std::size_t k = 0; k < 3; ++k) closed += kF0[k] * (1.0 - 3.0 * kX[k]);
    // Monte Carlo cross-check of the closed form: 1e6 units from f0.
    std::mt19937_64 g(505);
    std::discrete_distribution<int> level(kF0.begin(), kF0.end());
    std::normal_distribution<double> nd(0.0, 1.0);
    const std::size_t n = 1000000;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = kX[static_cast<std::size_t>(level(g))];
      const double eps = nd(g);
      const double diff = (1.0 - x + eps) - (2.0 * x + std::pow(x, 4) * eps);
      sum += diff;
      sumsq += diff * diff;
    }
    const double mc = sum / n;
    const double mc_se = std::sqrt((sumsq / n - mc * mc) / n);
    const bool closed_ok = std::abs(closed - (-5.6)) < 1e-12 && std::abs(mc - closed) <= 4.0 * mc_se;

    const auto& r = synthetic_sweep();
    double mean = 0.0, var_sum = 0.0;
    for (const auto& p : r.points) {
      mean += p.emp_mean;
      var_sum += p.emp_variance / static_cast<double>(p.replications);
    }
    const double k = static_cast<double>(r.points.size());
    mean /= k;
    const double se = std::sqrt(var_sum) / k;
    what = fmt("pooled mean %.4f", mean) + fmt(", pooled SE %.4f", se) + fmt(", |gap|/SE %.2f (tol 3)",
                                                                           std::abs(mean + 5.6) / se) +
           fmt("; MC oracle ATE %.4f", mc) + fmt(" +- %.4f", mc_se);
    return closed_ok && std::abs(mean - (-5.6)) <= 3.0 * se;
  });

  // 6. Naive allocation against the optimum.
  criterion(6, [](std::string& what) {
    const auto& r = synthetic_sweep();
    const auto* naive = find_point(r, "naive");
    const auto* best = find_point(r, "optimal");
    if (!naive || !best) {
      what = "reference designs missing";
      return false;
    }
    what = fmt("naive D %.4f", naive->deviation) + fmt(" var %.2f", naive->emp_variance) +
           fmt("; optimal D %.4f", best->deviation) + fmt(" var %.2f", best->emp_variance);
    return naive->deviation > 0.0 && naive->emp_variance > best->emp_variance;
  });

  // 7. Per-design variance law for D <= 5.
  criterion(7, [](std::string& what) {
    const auto& r = synthetic_sweep();
    double base = 0.0;
    for (std::size_t k = 0; k < 3; ++k) base += kF0[k] * std::sqrt(oracle_sigma_sq(kX[k]));
    base *= base;
    double worst = 0.0;
    std::string worst_id;
    int checked = 0;
    for (const auto& p : r.points) {
      if (p.deviation > 5.0) continue;
      ++checked;
      const double predicted = base * (p.deviation + 1.0);
      const double gap = std::abs(static_cast<double>(p.n1) * p.emp_variance - predicted) / predicted;
      if (gap > worst) {
        worst = gap;
        worst_id = p.design_id;
      }
    }
    what = fmt("%.0f designs with D <= 5", checked) + fmt(", worst relative gap %.3f (tol 0.15)", worst) +
           " at " + worst_id;
    return checked > 0 && worst <= 0.15;
  });

  // 8. Per-level CATE scaling at n1 = 5000.
  criterion(8, [](std::string& what) {
    const auto d = CovariateDomain::ordinal(3);
    std::vector<double> sv;
    for (double x : kX) sv.push_back(std::sqrt(oracle_sigma_sq(x)));
    const auto f1 = optimal_allocation(Allocation(d, kF0), SigmaProfile(d, sv));
    const std::int64_t n1 = 5000;
    const auto counts = oracle::largest_remainder(f1.probs(), n1);
    ReplicationPlan plan{"fixed", {}, {}, {}};
    for (std::size_t m = 0; m < 3; ++m)
      for (std::int64_t i = 0; i < counts[m]; ++i) {
        plan.levels.push_back(m);
        plan.y0.push_back(0.0);
        plan.y1.push_back(0.0);
      }
    const std::size_t reps = 2000;
    ReplicationSettings settings{reps, kSeed, OutcomeMode::kRedraw, synthetic_sampler(d), std::nullopt};
    const auto est = cate_replicates(plan, PropensityMap::constant(d, 0.5), settings, Execution::kParallel);
    bool ok = true;
    std::ostringstream os;
    for (std::size_t m = 0; m < 3; ++m) {
      std::vector<double> col(reps);
      for (std::size_t r = 0; r < reps; ++r) col[r] = est[r * 3 + m];
      const double scaled = static_cast<double>(n1) * oracle::moments(col).var;
      const double f1m = static_cast<double>(counts[m]) / static_cast<double>(n1);
      const double target = oracle_sigma_sq(kX[m]) / f1m;
      const double ratio = scaled / target;
      ok = ok && std::abs(ratio - 1.0) <= 0.10;
      os << "level " << m + 1 << " ratio " << fmt("%.3f", ratio) << (m < 2 ? ", " : "");
    }
    what = os.str() + " (tol 0.10)";
    return ok;
  });

  // 9. Consistency of the plug-in optimum.
  criterion(9, [](std::string& what) {
    std::vector<double> f1_true(3);
    double z = 0.0;
    for (std::size_t k = 0; k < 3; ++k) z += f1_true[k] = kF0[k] * std::sqrt(oracle_sigma_sq(kX[k]));
    for (auto& v : f1_true) v /= z;
    std::vector<double> medians;
    std::ostringstream os;
    for (std::size_t n0 : {1000u, 10000u, 100000u}) {
      std::vector<double> errs;
      for (std::uint64_t s = 0; s < 50; ++s) {
        auto spec = SyntheticDgpSpec::defaults(1000 + s);
        spec.n0 = n0;
        Rng crng(spec.seed, "#cohort", 0);
        const auto cohort = generate_synthetic_cohort(spec, crng);
        Rng trng(spec.seed, "#observational", 0);
        const auto rows = observational_sample(cohort, 0.5, trng);
        const auto e = PropensityMap::constant(cohort.domain, 0.5);
        const auto hat = estimate_optimal_allocation(rows, spec.f0, e);
        double sup = 0.0;
        for (std::size_t k = 0; k < 3; ++k) sup = std::max(sup, std::abs(hat[k] - f1_true[k]));
        errs.push_back(sup);
      }
      std::nth_element(errs.begin(), errs.begin() + 25, errs.end());
      const double hi = errs[25];
      std::nth_element(errs.begin(), errs.begin() + 24, errs.end());
      const double med = 0.5 * (hi + errs[24]);
      medians.push_back(med);
      os << "n0=" << n0 << " median " << fmt("%.4f", med) << "; ";
    }
    what = os.str() + "(need non-increasing, last <= 0.02)";
    return medians[1] <= medians[0] && medians[2] <= medians[1] && medians[2] <= 0.02;
  });

  // 10. Same-precision allocation, compromise endpoints and coincidence when f0 is proportional to sigma.
  criterion(10, [](std::string& what) {
    std::mt19937_64 g(1010);
    const auto d = CovariateDomain::ordinal(4);
    double spread = 0.0, endpoint = 0.0, coincide = 0.0;
    for (int i = 0; i < 20; ++i) {
      auto sv = oracle::abs_normal(4, g);
      for (auto& s : sv) s += 0.05;
      const auto f0v = oracle::dirichlet1(4, g);
      const SigmaProfile sigma(d, sv);
      const Allocation f0(d, f0v);
      const auto fs = same_precision_allocation(sigma);
      std::vector<double> ratio(4);
      for (std::size_t k = 0; k < 4; ++k) ratio[k] = sv[k] * sv[k] / fs[k];
      const auto [lo, hi] = std::minmax_element(ratio.begin(), ratio.end());
      spread = std::max(spread, (*hi - *lo) / *hi);
      const auto c1 = compromise_allocation(f0, sigma, 1.0), c0 = compromise_allocation(f0, sigma, 0.0);
      const auto fstar = optimal_allocation(f0, sigma);
      for (std::size_t k = 0; k < 4; ++k)
        endpoint = std::max({endpoint, std::abs(c1[k] - fstar[k]), std::abs(c0[k] - fs[k])});
      // f0 proportional to sigma.
      const Allocation fp(d, sv);
      const auto a = optimal_allocation(fp, sigma), b = same_precision_allocation(sigma),
                 c = compromise_allocation(fp, sigma, 0.37);
      for (std::size_t k = 0; k < 4; ++k)
        coincide = std::max({coincide, std::abs(a[k] - b[k]), std::abs(a[k] - c[k])});
    }
    // Informational: deviation of the same-precision and midpoint compromise
    // allocations on the synthetic model (not asserted).
    const auto d3 = CovariateDomain::ordinal(3);
    std::vector<double> sv3;
    for (double x : kX) sv3.push_back(std::sqrt(oracle_sigma_sq(x)));
    const Allocation f0(d3, kF0);
    const SigmaProfile s3(d3, sv3);
    const auto star = optimal_allocation(f0, s3);
    std::printf("  info: synthetic model D(same-precision) = %.5f, D(compromise k=0.5) = %.5f, D(f0) = %.5f\n",
                deviation_metric(same_precision_allocation(s3), star),
                deviation_metric(compromise_allocation(f0, s3, 0.5), star), deviation_metric(f0, star));
    what = fmt("ratio spread %.2e", spread) + fmt(", endpoint gap %.2e", endpoint) +
           fmt(", coincidence gap %.2e (tol 1e-12)", coincide);
    return spread <= 1e-12 && endpoint <= 1e-12 && coincide <= 1e-12;
  });

  // 11. Kernel reduction and shared minimizer.
  criterion(11, [](std::string& what) {
    const auto d = CovariateDomain::ordinal(3);
    const Allocation f0(d, kF0);
    const auto e = PropensityMap::constant(d, 0.5);
    // A small trial dataset with every level and arm present.
    std::mt19937_64 g(1111);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<UnitRecord> rows;
    for (std::size_t m = 0; m < 3; ++m)
      for (int i = 0; i < 40; ++i) rows.push_back({"", 1, i % 2, m, nd(g) + static_cast<double>(m)});
    const double plain = ipsw_ate(rows, f0, e);
    double reduction = 0.0;
    for (auto kind : {KernelKind::kEpanechnikov, KernelKind::kUniform})
      for (double h : {0.3, 0.5, 0.99})
        reduction = std::max(reduction, std::abs(kernel_ipsw_ate(rows, f0, KernelSpec(kind, h), e) - plain));

    std::vector<double> sv;
    for (double x : kX) sv.push_back(std::sqrt(oracle_sigma_sq(x)));
    const SigmaProfile sigma(d, sv);
    const auto star = optimal_allocation(f0, sigma);
    double argmin_gap = 0.0;
    bool shared = true;
    std::vector<double> first;
    for (auto kind : {KernelKind::kEpanechnikov, KernelKind::kUniform, KernelKind::kGaussian}) {
      const KernelSpec k(kind, 0.5);
      const auto grid = oracle::grid_minimum(0.005, [&](const std::vector<double>& p) {
        if (*std::min_element(p.begin(), p.end()) <= 0.0) return std::numeric_limits<double>::infinity();
        return kernel_ipsw_variance(f0, Allocation(d, p), sigma, 200, k);
      });
      if (first.empty()) first = grid.argmin;
      shared = shared && grid.argmin == first;
      for (std::size_t m = 0; m < 3; ++m) argmin_gap = std::max(argmin_gap, std::abs(grid.argmin[m] - star[m]));
    }
    what = fmt("kernel vs plain max gap %.2e (tol 1e-12)", reduction) +
           fmt(", grid argmin vs optimum %.4f (grid step 0.005)", argmin_gap) + (shared ? ", shared" : ", NOT shared");
    return reduction <= 1e-12 && shared && argmin_gap <= 0.005;
  });

  // 12. STAR-format semi-synthetic sweep at reduced scale.
  criterion(12, [&](std::string& what) {
    StarStudyConfig cfg;
    cfg.candidates = 100;
    cfg.n1 = 500;
    cfg.reps = 100;
    cfg.seed = kSeed;
    const auto rows = star_path ? read_star_csv(*star_path) : star_standin_rows();
    const auto r = star_pipeline(rows, cfg, nullptr, star_path ? "star" : "star-standin");
    what = std::string(star_path ? "STAR file" : "stand-in") + fmt(": Pearson %.4f (need >= 0.7)", r.pearson) +
           fmt(", slope %.4g", r.fit.slope) + fmt(", designs %.0f", static_cast<double>(r.points.size()));
    return r.pearson >= 0.7 && r.fit.slope > 0.0;
  });

  std::printf("%s: %d criterion(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
