#pragma once

// CSV / JSON interchange. Every reader throws IoError when the file cannot be
// opened, SchemaError (detail = column) when a required column is absent and
// ParseError (detail = column, message carries the file line) on bad values.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "trialdesign/allocation.hpp"
#include "trialdesign/domain.hpp"
#include "trialdesign/sigma_estimation.hpp"
#include "trialdesign/simulation.hpp"

namespace trialdesign {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// File line of each row (header is line 1).
  std::vector<std::size_t> lines;

  /// Column position; SchemaError naming the column when absent.
  std::size_t column(std::string_view name) const;
  std::optional<std::size_t> find_column(std::string_view name) const;
};

CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::string& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

double parse_double(const CsvTable& table, std::size_t row, std::size_t col);
std::int64_t parse_int(const CsvTable& table, std::size_t row, std::size_t col);

/// Domain over the given ids: numeric order (and numeric values) when every id
/// parses as a number, lexicographic otherwise. Duplicates are collapsed.
CovariateDomain domain_from_ids(std::vector<std::string> ids);

// Level-keyed tables. With `domain` given, the file must list exactly its
// levels (any order); otherwise the domain is built from the file.
Allocation read_allocation_csv(const std::string& path, const CovariateDomain* domain = nullptr);
void write_allocation_csv(std::ostream& out, const Allocation& allocation);
SigmaProfile read_sigma_csv(const std::string& path, const CovariateDomain& domain);
std::vector<double> read_cost_csv(const std::string& path, const CovariateDomain& domain);

/// Long format `design_id,level,prob`; designs keep first-appearance order and
/// levels missing from a design get probability 0.
std::vector<Candidate> read_candidates_csv(const std::string& path, const CovariateDomain& domain);

/// `unit_id,s,t,y,x` or `unit_id,s,t,y,x1,...,xk`; multiple covariate columns
/// are joined into product levels "a|b|...". Empty y is accepted on s = 0 rows.
Dataset ingest_dataset(const std::string& path);
Dataset parse_dataset(std::istream& in);

/// `treatment,race,urbanicity,score`; empty fields are missing values.
std::vector<StarRow> read_star_csv(const std::string& path);
/// `raw,code` with code in {1, 2}.
std::map<std::string, int> read_race_map(const std::string& path);

void write_points_csv(std::ostream& out, const std::vector<McStudyResult>& points);
std::vector<std::pair<double, double>> read_points_csv(const std::string& path);
void write_reports_csv(std::ostream& out, const std::vector<DesignReport>& reports);

nlohmann::ordered_json to_json(const Allocation& allocation);
nlohmann::ordered_json to_json(const DesignReport& report);
nlohmann::ordered_json to_json(const SigmaEstimate& estimate);
nlohmann::ordered_json to_json(const FitResult& fit);
nlohmann::ordered_json to_json(const StudyReport& report);
nlohmann::ordered_json to_json(const DesignError& error);

}  // namespace trialdesign
