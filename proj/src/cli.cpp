#include "trialdesign/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <omp.h>

#include "trialdesign/allocation.hpp"
#include "trialdesign/errors.hpp"
#include "trialdesign/io.hpp"
#include "trialdesign/sigma_estimation.hpp"
#include "trialdesign/simulation.hpp"

namespace trialdesign {

namespace {

[[noreturn]] void usage(const std::string& flag, const std::string& message) {
  fail(ErrorKind::kUsageError, message, std::nullopt, flag);
}

void require(const std::optional<std::string>& v, const std::string& flag) {
  if (!v) usage(flag, flag + " is required");
}

struct Flags {
  std::string f0, sigma, cost, candidates, data, race_map, points, out, fit_out, format, mode;
  std::int64_t n1 = 0;
  double budget = 0.0, k = 0.0, e = 0.0;
  std::int64_t reps = 0, designs = 0, n0 = 0;
  std::uint64_t seed = 0;
  int threads = 0;
  bool pool = false, serial = false;
};

bool is_randomized(Command c) {
  return c == Command::kSimulateSynthetic || c == Command::kSimulateCost || c == Command::kSimulateStar;
}

}  // namespace

RunConfig parse_args(const std::vector<std::string>& args) {
  CLI::App app{"Trial sample design: optimal covariate allocation and Monte Carlo studies", "trialdesign"};
  app.require_subcommand(1, 1);
  Flags f;
  std::map<std::string, CLI::Option*> opts;

  struct Spec {
    const char* name;
    Command command;
    const char* help;
  };
  const Spec specs[] = {
      {"allocate", Command::kAllocate, "Optimal, cost-optimal, same-precision and compromise allocations"},
      {"evaluate", Command::kEvaluate, "Rank candidate trial allocations by deviation from the optimum"},
      {"estimate-sigma", Command::kEstimateSigma, "Plug-in conditional variability from observational rows"},
      {"simulate-synthetic", Command::kSimulateSynthetic, "Monte Carlo sweep over softmax designs, synthetic model"},
      {"simulate-cost", Command::kSimulateCost, "Budget-constrained Monte Carlo sweep, synthetic model"},
      {"simulate-star", Command::kSimulateStar, "Semi-synthetic sweep on a STAR-format student file"},
      {"fit", Command::kFit, "OLS of emp_variance on deviation for a points CSV"},
  };

  std::vector<std::pair<CLI::App*, Command>> subs;
  for (const auto& s : specs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    subs.emplace_back(sub, s.command);
    auto add = [&](const std::string& flag, auto& target, const std::string& help) {
      opts[std::string(s.name) + flag] = sub->add_option(flag, target, help);
    };
    add("--out", f.out, "Output file (default: standard output)");
    add("--format", f.format, "json or csv");
    add("--threads", f.threads, "OpenMP threads (default: runtime choice)");
    opts[std::string(s.name) + "--serial"] = sub->add_flag("--serial", f.serial, "Use the serial reference kernels");
    switch (s.command) {
      case Command::kAllocate:
        add("--f0", f.f0, "Target covariate distribution CSV (level,prob)");
        add("--sigma", f.sigma, "Conditional variability CSV (level,sigma)");
        add("--n1", f.n1, "Trial size for integer counts and variance");
        add("--k", f.k, "Compromise exponent in [0,1]");
        add("--cost", f.cost, "Unit cost CSV (level,cost)");
        add("--budget", f.budget, "Total budget (with --cost)");
        break;
      case Command::kEvaluate:
        add("--f0", f.f0, "Target covariate distribution CSV (level,prob)");
        add("--sigma", f.sigma, "Conditional variability CSV (level,sigma)");
        add("--candidates", f.candidates, "Candidate allocations CSV (design_id,level,prob)");
        add("--n1", f.n1, "Trial size for absolute variances");
        break;
      case Command::kEstimateSigma:
        add("--data", f.data, "Dataset CSV (unit_id,s,t,y,x...)");
        add("--e", f.e, "Planned treatment probability (default 0.5)");
        opts[std::string(s.name) + "--pool"] =
            sub->add_flag("--pool", f.pool, "Pool sparse cells instead of failing");
        break;
      case Command::kSimulateSynthetic:
      case Command::kSimulateCost:
        add("--designs", f.designs, "Number of candidate designs (default 100)");
        add("--reps", f.reps, "Replications per design (default 1000)");
        add("--seed", f.seed, "Master seed (required)");
        add("--n0", f.n0, "Target cohort size (default 10000)");
        add("--e", f.e, "Treatment probability (default 0.5)");
        add("--mode", f.mode, "redraw (default) or stored potential outcomes");
        add("--fit-out", f.fit_out, "Also write the fit JSON here");
        if (s.command == Command::kSimulateSynthetic) {
          add("--n1", f.n1, "Trial size (default 200)");
        } else {
          add("--cost", f.cost, "Unit cost CSV (default 20,30,40)");
          add("--budget", f.budget, "Total budget (default 30000)");
        }
        break;
      case Command::kSimulateStar:
        add("--data", f.data, "STAR-format CSV (treatment,race,urbanicity,score); bundled stand-in when absent");
        add("--race-map", f.race_map, "Race recoding CSV (raw,code)");
        add("--designs", f.designs, "Number of candidate designs (default 500)");
        add("--n1", f.n1, "Trial size (default 500)");
        add("--reps", f.reps, "Replications per design (default 200)");
        add("--seed", f.seed, "Master seed (required)");
        add("--e", f.e, "Treatment probability (default: treated share)");
        add("--fit-out", f.fit_out, "Also write the fit JSON here");
        break;
      case Command::kFit:
        add("--points", f.points, "Points CSV (design_id,deviation,emp_variance,...)");
        break;
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::ParseError& e) {
    fail(ErrorKind::kUsageError, e.what());
  }

  RunConfig cfg;
  std::string name;
  for (auto& [sub, cmd] : subs) {
    if (sub->parsed()) {
      cfg.command = cmd;
      name = sub->get_name();
    }
  }
  auto given = [&](const std::string& flag) {
    auto it = opts.find(name + flag);
    return it != opts.end() && it->second->count() > 0;
  };
  auto str = [&](const std::string& flag, const std::string& v) -> std::optional<std::string> {
    return given(flag) ? std::optional<std::string>(v) : std::nullopt;
  };

  cfg.f0_path = str("--f0", f.f0);
  cfg.sigma_path = str("--sigma", f.sigma);
  cfg.cost_path = str("--cost", f.cost);
  cfg.candidates_path = str("--candidates", f.candidates);
  cfg.data_path = str("--data", f.data);
  cfg.race_map_path = str("--race-map", f.race_map);
  cfg.points_path = str("--points", f.points);
  cfg.out_path = str("--out", f.out);
  cfg.fit_path = str("--fit-out", f.fit_out);

  if (given("--n1")) {
    if (f.n1 < 1) usage("--n1", "--n1 must be at least 1");
    cfg.n1 = f.n1;
  }
  if (given("--budget")) {
    if (!(f.budget > 0.0)) usage("--budget", "--budget must be positive");
    cfg.budget = f.budget;
  }
  if (given("--k")) {
    if (!(f.k >= 0.0 && f.k <= 1.0)) usage("--k", "--k out of [0,1]");
    cfg.k = f.k;
  }
  if (given("--e")) {
    if (!(f.e > 0.0 && f.e < 1.0)) usage("--e", "--e out of (0,1)");
    cfg.e = f.e;
  }
  const bool star = cfg.command == Command::kSimulateStar;
  cfg.reps = star ? 200 : 1000;
  cfg.designs = star ? 500 : 100;
  if (given("--reps")) {
    if (f.reps < 2) usage("--reps", "--reps must be at least 2");
    cfg.reps = static_cast<std::size_t>(f.reps);
  }
  if (given("--designs")) {
    if (f.designs < 1) usage("--designs", "--designs must be at least 1");
    cfg.designs = static_cast<std::size_t>(f.designs);
  }
  if (given("--n0")) {
    if (f.n0 < 1) usage("--n0", "--n0 must be at least 1");
    cfg.n0 = static_cast<std::size_t>(f.n0);
  }
  if (given("--seed")) cfg.seed = f.seed;
  if (given("--threads")) {
    if (f.threads < 1) usage("--threads", "--threads must be at least 1");
    cfg.threads = f.threads;
  }
  cfg.pool_sparse_cells = f.pool;
  cfg.exec = f.serial ? Execution::kSerial : Execution::kParallel;
  if (given("--mode")) {
    if (f.mode == "redraw")
      cfg.mode = OutcomeMode::kRedraw;
    else if (f.mode == "stored")
      cfg.mode = OutcomeMode::kStored;
    else
      usage("--mode", "--mode must be redraw or stored");
  }

  switch (cfg.command) {
    case Command::kAllocate:
    case Command::kEstimateSigma:
    case Command::kFit:
      cfg.format = OutputFormat::kJson;
      break;
    default:
      cfg.format = OutputFormat::kCsv;
  }
  if (given("--format")) {
    if (f.format == "json")
      cfg.format = OutputFormat::kJson;
    else if (f.format == "csv")
      cfg.format = OutputFormat::kCsv;
    else
      usage("--format", "--format must be json or csv");
  }

  switch (cfg.command) {
    case Command::kAllocate:
      require(cfg.f0_path, "--f0");
      require(cfg.sigma_path, "--sigma");
      if (cfg.cost_path.has_value() != cfg.budget.has_value())
        usage(cfg.cost_path ? "--budget" : "--cost", "--cost and --budget go together");
      break;
    case Command::kEvaluate:
      require(cfg.f0_path, "--f0");
      require(cfg.sigma_path, "--sigma");
      require(cfg.candidates_path, "--candidates");
      break;
    case Command::kEstimateSigma:
      require(cfg.data_path, "--data");
      break;
    case Command::kFit:
      require(cfg.points_path, "--points");
      break;
    default:
      break;
  }
  if (is_randomized(cfg.command) && !cfg.seed) usage("--seed", "--seed is required");
  return cfg;
}

namespace {

nlohmann::ordered_json counts_json(const CovariateDomain& d, const std::vector<std::int64_t>& counts) {
  auto j = nlohmann::ordered_json::array();
  for (std::size_t m = 0; m < counts.size(); ++m) j.push_back({{"level", d.id(m)}, {"count", counts[m]}});
  return j;
}

nlohmann::ordered_json sigma_json(const SigmaProfile& s) {
  auto j = nlohmann::ordered_json::array();
  for (std::size_t m = 0; m < s.size(); ++m) j.push_back({{"level", s.domain().id(m)}, {"sigma", s[m]}});
  return j;
}

void emit_json(std::ostream& out, const nlohmann::ordered_json& j) { out << j.dump(2) << '\n'; }

void run_allocate(const RunConfig& cfg, std::ostream& out) {
  const auto f0 = read_allocation_csv(*cfg.f0_path);
  const auto sigma = read_sigma_csv(*cfg.sigma_path, f0.domain());
  const auto f1_star = optimal_allocation(f0, sigma);
  std::optional<Allocation> compromise;
  if (cfg.k) compromise = compromise_allocation(f0, sigma, *cfg.k);

  if (cfg.format == OutputFormat::kCsv) {
    write_allocation_csv(out, compromise ? *compromise : f1_star);
    return;
  }
  const auto dec = variance_decomposition(f0, f0, sigma);
  nlohmann::ordered_json j;
  j["f0"] = to_json(f0);
  j["sigma"] = sigma_json(sigma);
  j["f1_star"] = to_json(f1_star);
  j["base_term"] = dec.base_term;
  j["deviation_of_f0"] = dec.deviation;
  j["same_precision"] = to_json(same_precision_allocation(sigma));
  if (cfg.n1) {
    j["n1"] = *cfg.n1;
    j["counts"] = counts_json(f0.domain(), integer_counts(f1_star, *cfg.n1));
    j["variance"] = ipsw_variance(f0, f1_star, sigma, *cfg.n1);
  }
  if (compromise) j["compromise"] = {{"k", *cfg.k}, {"f1", to_json(*compromise)}};
  if (cfg.cost_path) {
    const CostSchedule costs(f0.domain(), read_cost_csv(*cfg.cost_path, f0.domain()), *cfg.budget);
    const auto f1c = cost_optimal_allocation(f0, sigma, costs);
    const auto n1c = affordable_n1(f1c, costs);
    nlohmann::ordered_json c;
    c["budget"] = costs.budget();
    c["f1_cost_star"] = to_json(f1c);
    c["affordable_n1"] = n1c;
    if (n1c > 0) {
      const auto counts = integer_counts(f1c, n1c);
      c["counts"] = counts_json(f0.domain(), counts);
      c["spent"] = recruitment_cost(counts, costs);
    }
    j["cost"] = std::move(c);
  }
  emit_json(out, j);
}

void run_evaluate(const RunConfig& cfg, std::ostream& out) {
  const auto f0 = read_allocation_csv(*cfg.f0_path);
  const auto sigma = read_sigma_csv(*cfg.sigma_path, f0.domain());
  const auto candidates = read_candidates_csv(*cfg.candidates_path, f0.domain());
  const auto reports = rank_candidates(f0, sigma, candidates, cfg.n1);
  if (cfg.format == OutputFormat::kCsv) {
    write_reports_csv(out, reports);
    return;
  }
  auto j = nlohmann::ordered_json::array();
  for (const auto& r : reports) j.push_back(to_json(r));
  emit_json(out, j);
}

void run_estimate_sigma(const RunConfig& cfg, std::ostream& out) {
  const auto ds = ingest_dataset(*cfg.data_path);
  const auto e = PropensityMap::constant(ds.domain, cfg.e.value_or(0.5));
  const auto stats = cell_stats(ds.units, ds.domain);
  const auto est = estimate_sigma(stats, e, SigmaEstimateOptions{cfg.pool_sparse_cells});
  if (cfg.format == OutputFormat::kCsv) {
    out << "level,sigma,n_treated,n_control\n";
    for (std::size_t m = 0; m < ds.domain.size(); ++m)
      out << ds.domain.id(m) << ',' << format_double(est.profile[m]) << ',' << est.n_treated[m] << ','
          << est.n_control[m] << '\n';
    return;
  }
  emit_json(out, to_json(est));
}

SyntheticDgpSpec dgp_from(const RunConfig& cfg) {
  auto dgp = SyntheticDgpSpec::defaults(*cfg.seed);
  dgp.n0 = cfg.n0;
  if (cfg.n1) dgp.n1 = static_cast<std::size_t>(*cfg.n1);
  if (cfg.e) dgp.e = *cfg.e;
  return dgp;
}

void emit_study(const RunConfig& cfg, const StudyReport& report, std::ostream& out) {
  if (cfg.fit_path) {
    std::ofstream f(*cfg.fit_path);
    if (!f) fail(ErrorKind::kIoError, "cannot write " + *cfg.fit_path);
    emit_json(f, to_json(report.fit));
  }
  if (cfg.format == OutputFormat::kCsv)
    write_points_csv(out, report.points);
  else
    emit_json(out, to_json(report));
}

void run_simulate_synthetic(const RunConfig& cfg, std::ostream& out) {
  SyntheticStudyConfig sc{dgp_from(cfg), cfg.designs, cfg.reps, cfg.mode, true, cfg.exec};
  emit_study(cfg, run_synthetic_study(sc), out);
}

void run_simulate_cost(const RunConfig& cfg, std::ostream& out) {
  CostStudyConfig cc;
  cc.dgp = dgp_from(cfg);
  if (cfg.cost_path) cc.unit_cost = read_cost_csv(*cfg.cost_path, cc.dgp.f0.domain());
  if (cfg.budget) cc.budget = *cfg.budget;
  cc.designs = cfg.designs;
  cc.reps = cfg.reps;
  cc.mode = cfg.mode;
  cc.exec = cfg.exec;
  emit_study(cfg, run_synthetic_cost_study(cc), out);
}

void run_simulate_star(const RunConfig& cfg, std::ostream& out) {
  StarStudyConfig sc;
  sc.candidates = cfg.designs;
  sc.n1 = cfg.n1 ? static_cast<std::size_t>(*cfg.n1) : 500;
  sc.reps = cfg.reps;
  sc.seed = *cfg.seed;
  sc.e = cfg.e;
  sc.exec = cfg.exec;
  std::optional<std::map<std::string, int>> race_map;
  if (cfg.race_map_path) race_map = read_race_map(*cfg.race_map_path);
  const auto* map_ptr = race_map ? &*race_map : nullptr;
  const auto report = cfg.data_path ? star_pipeline(read_star_csv(*cfg.data_path), sc, map_ptr, "star")
                                    : star_pipeline(star_standin_rows(), sc, map_ptr, "star-standin");
  emit_study(cfg, report, out);
}

void run_fit(const RunConfig& cfg, std::ostream& out) {
  const auto points = read_points_csv(*cfg.points_path);
  const auto fit = fit_variance_vs_deviation(points);
  if (cfg.format == OutputFormat::kCsv) {
    out << "slope,intercept,r_squared,n_points\n"
        << format_double(fit.slope) << ',' << format_double(fit.intercept) << ',' << format_double(fit.r_squared)
        << ',' << fit.n_points << '\n';
    return;
  }
  emit_json(out, to_json(fit));
}

void report_error(std::ostream& err, const DesignError& e) { err << to_json(e).dump() << '\n'; }

}  // namespace

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
    // Build the whole report before touching the destination.
    std::ostringstream buf;
    switch (cfg.command) {
      case Command::kAllocate: run_allocate(cfg, buf); break;
      case Command::kEvaluate: run_evaluate(cfg, buf); break;
      case Command::kEstimateSigma: run_estimate_sigma(cfg, buf); break;
      case Command::kSimulateSynthetic: run_simulate_synthetic(cfg, buf); break;
      case Command::kSimulateCost: run_simulate_cost(cfg, buf); break;
      case Command::kSimulateStar: run_simulate_star(cfg, buf); break;
      case Command::kFit: run_fit(cfg, buf); break;
    }
    if (cfg.out_path) {
      std::ofstream f(*cfg.out_path, std::ios::binary);
      if (!f) fail(ErrorKind::kIoError, "cannot write " + *cfg.out_path);
      f << buf.str();
    } else {
      out << buf.str();
    }
    return 0;
  } catch (const DesignError& e) {
    report_error(err, e);
    return exit_status(e.kind());
  } catch (const std::exception& e) {
    err << nlohmann::ordered_json{{"error", "InternalError"}, {"message", e.what()}, {"exit_status", 2}}.dump()
        << '\n';
    return 2;
  }
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = parse_args(args);
  } catch (const HelpRequested& h) {
    out << h.text;
    return 0;
  } catch (const DesignError& e) {
    report_error(err, e);
    return exit_status(e.kind());
  }
  return run(cfg, out, err);
}

}  // namespace trialdesign
