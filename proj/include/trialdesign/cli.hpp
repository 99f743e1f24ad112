#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "trialdesign/mc_kernels.hpp"

namespace trialdesign {

enum class Command { kAllocate, kEvaluate, kEstimateSigma, kSimulateSynthetic, kSimulateCost, kSimulateStar, kFit };
enum class OutputFormat { kJson, kCsv };

struct RunConfig {
  Command command = Command::kAllocate;

  std::optional<std::string> f0_path;
  std::optional<std::string> sigma_path;
  std::optional<std::string> cost_path;
  std::optional<std::string> candidates_path;
  std::optional<std::string> data_path;
  std::optional<std::string> race_map_path;
  std::optional<std::string> points_path;
  std::optional<std::string> out_path;   // stdout when absent
  std::optional<std::string> fit_path;   // simulate-*: fit JSON next to the points CSV

  std::optional<std::int64_t> n1;
  std::optional<double> budget;
  std::optional<double> k;
  std::optional<double> e;
  std::size_t reps = 1000;
  std::size_t designs = 100;
  std::size_t n0 = 10000;
  std::optional<std::uint64_t> seed;
  bool pool_sparse_cells = false;
  OutcomeMode mode = OutcomeMode::kRedraw;
  Execution exec = Execution::kParallel;
  int threads = 0;  // 0: OpenMP default

  OutputFormat format = OutputFormat::kJson;
};

/// Thrown by parse_args for --help; carries the help text.
struct HelpRequested {
  std::string text;
};

/// Validates flags and per-command requirements; throws DesignError(kUsageError)
/// whose detail names the offending flag.
RunConfig parse_args(const std::vector<std::string>& args);

/// Executes the command, writing the report to `out` (or `config.out_path`).
/// Failures are written to `err` as one JSON object; returns the exit status.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// parse_args + run with usage errors reported the same way.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace trialdesign
