#include "trialdesign/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "trialdesign/errors.hpp"

namespace trialdesign {

namespace {

std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) fail(ErrorKind::kParseError, "line " + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

[[noreturn]] void parse_fail(const CsvTable& t, std::size_t row, std::size_t col, const std::string& what) {
  fail(ErrorKind::kParseError,
       "row " + std::to_string(t.lines[row]) + ", column " + t.header[col] + ": " + what, std::nullopt,
       t.header[col]);
}

std::optional<double> to_number(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return v;
}

// level -> value map from a two-column table, checked against the domain.
std::vector<double> read_level_column(const std::string& path, const CovariateDomain& domain,
                                      std::string_view value_col) {
  const auto t = read_csv(path);
  const auto lc = t.column("level");
  const auto vc = t.column(value_col);
  std::vector<std::optional<double>> out(domain.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto idx = domain.find(t.rows[r][lc]);
    if (!idx) parse_fail(t, r, lc, "unknown level '" + t.rows[r][lc] + "'");
    if (out[*idx]) parse_fail(t, r, lc, "duplicate level '" + t.rows[r][lc] + "'");
    out[*idx] = parse_double(t, r, vc);
  }
  std::vector<double> values(domain.size());
  for (std::size_t m = 0; m < domain.size(); ++m) {
    if (!out[m]) fail(ErrorKind::kSchemaError, path + ": no row for level " + domain.id(m), domain.id(m), "level");
    values[m] = *out[m];
  }
  return values;
}

}  // namespace

std::optional<std::size_t> CsvTable::find_column(std::string_view name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

std::size_t CsvTable::column(std::string_view name) const {
  auto c = find_column(name);
  if (!c) fail(ErrorKind::kSchemaError, "missing column '" + std::string(name) + "'", std::nullopt, std::string(name));
  return *c;
}

CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_record(line, line_no);
    for (auto& f : fields) f = trim(std::move(f));
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      fail(ErrorKind::kParseError,
           "row " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) + " fields, found " +
               std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
    t.lines.push_back(line_no);
  }
  if (!have_header) fail(ErrorKind::kSchemaError, "empty file: no header row");
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::kIoError, "cannot read " + path);
  return parse_csv(f);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_double(const CsvTable& t, std::size_t row, std::size_t col) {
  const auto v = to_number(t.rows[row][col]);
  if (!v || !std::isfinite(*v)) parse_fail(t, row, col, "expected a finite number, found '" + t.rows[row][col] + "'");
  return *v;
}

std::int64_t parse_int(const CsvTable& t, std::size_t row, std::size_t col) {
  const auto& s = t.rows[row][col];
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    parse_fail(t, row, col, "expected an integer, found '" + s + "'");
  return v;
}

CovariateDomain domain_from_ids(std::vector<std::string> ids) {
  std::vector<std::string> unique;
  std::set<std::string> seen;
  for (auto& id : ids)
    if (seen.insert(id).second) unique.push_back(std::move(id));
  std::vector<std::pair<double, std::string>> numeric;
  for (const auto& id : unique) {
    const auto v = to_number(id);
    if (!v || !std::isfinite(*v)) {
      std::sort(unique.begin(), unique.end());
      return CovariateDomain(std::move(unique));
    }
    numeric.emplace_back(*v, id);
  }
  std::sort(numeric.begin(), numeric.end());
  std::vector<std::string> sorted_ids;
  std::vector<double> values;
  for (auto& [v, id] : numeric) {
    if (!values.empty() && values.back() == v)
      fail(ErrorKind::kInvalidArgument, "levels '" + sorted_ids.back() + "' and '" + id + "' share a value");
    values.push_back(v);
    sorted_ids.push_back(std::move(id));
  }
  return CovariateDomain(std::move(sorted_ids), std::move(values));
}

Allocation read_allocation_csv(const std::string& path, const CovariateDomain* domain) {
  if (domain) return Allocation(*domain, read_level_column(path, *domain, "prob"));
  const auto t = read_csv(path);
  const auto lc = t.column("level");
  t.column("prob");
  std::vector<std::string> ids;
  for (const auto& row : t.rows) ids.push_back(row[lc]);
  if (ids.empty()) fail(ErrorKind::kSchemaError, path + ": no levels", std::nullopt, "level");
  const auto d = domain_from_ids(ids);
  return Allocation(d, read_level_column(path, d, "prob"));
}

void write_allocation_csv(std::ostream& out, const Allocation& allocation) {
  out << "level,prob\n";
  for (std::size_t m = 0; m < allocation.size(); ++m)
    out << allocation.domain().id(m) << ',' << format_double(allocation[m]) << '\n';
}

SigmaProfile read_sigma_csv(const std::string& path, const CovariateDomain& domain) {
  return SigmaProfile(domain, read_level_column(path, domain, "sigma"));
}

std::vector<double> read_cost_csv(const std::string& path, const CovariateDomain& domain) {
  return read_level_column(path, domain, "cost");
}

std::vector<Candidate> read_candidates_csv(const std::string& path, const CovariateDomain& domain) {
  const auto t = read_csv(path);
  const auto dc = t.column("design_id");
  const auto lc = t.column("level");
  const auto pc = t.column("prob");
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> weights;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& id = t.rows[r][dc];
    if (id.empty()) parse_fail(t, r, dc, "empty design id");
    const auto level = domain.find(t.rows[r][lc]);
    if (!level) parse_fail(t, r, lc, "unknown level '" + t.rows[r][lc] + "'");
    auto [it, inserted] = weights.try_emplace(id, std::vector<double>(domain.size(), 0.0));
    if (inserted) order.push_back(id);
    it->second[*level] = parse_double(t, r, pc);
  }
  std::vector<Candidate> out;
  for (const auto& id : order) {
    try {
      out.push_back({id, Allocation(domain, weights[id])});
    } catch (const DesignError& e) {
      fail(e.kind(), "design " + id + ": " + e.what(), e.level(), e.detail());
    }
  }
  return out;
}

Dataset parse_dataset(std::istream& in) {
  const auto t = parse_csv(in);
  const auto uc = t.column("unit_id");
  const auto sc = t.column("s");
  const auto tc = t.column("t");
  const auto yc = t.column("y");
  std::vector<std::size_t> xcols;
  if (auto x = t.find_column("x")) {
    xcols.push_back(*x);
  } else {
    for (std::size_t k = 1;; ++k) {
      auto c = t.find_column("x" + std::to_string(k));
      if (!c) break;
      xcols.push_back(*c);
    }
  }
  if (xcols.empty()) fail(ErrorKind::kSchemaError, "missing column 'x'", std::nullopt, "x");

  auto binary = [&](std::size_t r, std::size_t c) {
    const auto& s = t.rows[r][c];
    if (s != "0" && s != "1") parse_fail(t, r, c, "expected 0 or 1, found '" + s + "'");
    return s == "1" ? 1 : 0;
  };

  std::vector<std::string> level_of_row(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::string level;
    for (std::size_t k = 0; k < xcols.size(); ++k) {
      const auto& v = t.rows[r][xcols[k]];
      if (v.empty()) parse_fail(t, r, xcols[k], "missing covariate value");
      if (v.find('|') != std::string::npos) parse_fail(t, r, xcols[k], "covariate values may not contain '|'");
      if (k) level += '|';
      level += v;
    }
    level_of_row[r] = std::move(level);
  }

  Dataset ds;
  ds.domain = domain_from_ids(level_of_row);
  std::set<std::string> ids;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    UnitRecord u;
    u.unit_id = t.rows[r][uc];
    if (u.unit_id.empty()) parse_fail(t, r, uc, "empty unit id");
    if (!ids.insert(u.unit_id).second) parse_fail(t, r, uc, "duplicate unit id '" + u.unit_id + "'");
    u.s = binary(r, sc);
    u.t = binary(r, tc);
    if (t.rows[r][yc].empty()) {
      if (u.s == 1) parse_fail(t, r, yc, "trial rows need an outcome");
    } else {
      u.y = parse_double(t, r, yc);
    }
    u.x = ds.domain.index_of(level_of_row[r]);
    ds.units.push_back(std::move(u));
  }
  validate_records(ds.domain, ds.units);
  return ds;
}

Dataset ingest_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::kIoError, "cannot read " + path);
  return parse_dataset(f);
}

std::vector<StarRow> read_star_csv(const std::string& path) {
  const auto t = read_csv(path);
  const auto tc = t.column("treatment");
  const auto rc = t.column("race");
  const auto uc = t.column("urbanicity");
  const auto sc = t.column("score");
  std::vector<StarRow> rows;
  rows.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    StarRow row;
    const auto& tv = t.rows[r][tc];
    if (!tv.empty()) row.treatment = static_cast<int>(parse_int(t, r, tc));
    if (!t.rows[r][rc].empty()) row.race = t.rows[r][rc];
    if (!t.rows[r][uc].empty()) row.urbanicity = t.rows[r][uc];
    if (!t.rows[r][sc].empty()) row.score = parse_double(t, r, sc);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::map<std::string, int> read_race_map(const std::string& path) {
  const auto t = read_csv(path);
  const auto rc = t.column("raw");
  const auto cc = t.column("code");
  std::map<std::string, int> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto code = parse_int(t, r, cc);
    if (code != 1 && code != 2) parse_fail(t, r, cc, "race code must be 1 or 2");
    out[t.rows[r][rc]] = static_cast<int>(code);
  }
  return out;
}

void write_points_csv(std::ostream& out, const std::vector<McStudyResult>& points) {
  out << "design_id,deviation,emp_variance,emp_mean\n";
  for (const auto& p : points)
    out << p.design_id << ',' << format_double(p.deviation) << ',' << format_double(p.emp_variance) << ','
        << format_double(p.emp_mean) << '\n';
}

std::vector<std::pair<double, double>> read_points_csv(const std::string& path) {
  const auto t = read_csv(path);
  const auto dc = t.column("deviation");
  const auto vc = t.column("emp_variance");
  std::vector<std::pair<double, double>> pts;
  for (std::size_t r = 0; r < t.rows.size(); ++r) pts.emplace_back(parse_double(t, r, dc), parse_double(t, r, vc));
  return pts;
}

void write_reports_csv(std::ostream& out, const std::vector<DesignReport>& reports) {
  out << "design_id,deviation,variance,base_term,rank\n";
  for (const auto& r : reports) {
    out << r.design_id << ',';
    if (r.ok())
      out << format_double(r.deviation) << ',' << format_double(r.variance) << ',' << format_double(r.base_term) << ','
          << *r.rank;
    else
      out << ",," << format_double(r.base_term) << ',';
    out << '\n';
  }
}

nlohmann::ordered_json to_json(const Allocation& allocation) {
  auto j = nlohmann::ordered_json::array();
  for (std::size_t m = 0; m < allocation.size(); ++m)
    j.push_back({{"level", allocation.domain().id(m)}, {"prob", allocation[m]}});
  return j;
}

nlohmann::ordered_json to_json(const DesignReport& r) {
  nlohmann::ordered_json j;
  j["design_id"] = r.design_id;
  j["f1"] = to_json(r.f1);
  if (r.ok()) {
    j["deviation"] = r.deviation;
    j["variance"] = r.variance;
    j["variance_is_scaled"] = r.variance_is_scaled;
    j["base_term"] = r.base_term;
    j["factor"] = r.factor;
    j["rank"] = *r.rank;
  } else {
    j["base_term"] = r.base_term;
    j["error"] = to_string(*r.error);
    if (r.error_level) j["level"] = *r.error_level;
    j["message"] = r.error_message;
  }
  if (r.n1) j["n1"] = *r.n1;
  return j;
}

nlohmann::ordered_json to_json(const SigmaEstimate& e) {
  auto j = nlohmann::ordered_json::array();
  const auto& d = e.profile.domain();
  for (std::size_t m = 0; m < d.size(); ++m) {
    nlohmann::ordered_json row{{"level", d.id(m)},
                               {"sigma", e.profile[m]},
                               {"n_treated", e.n_treated[m]},
                               {"n_control", e.n_control[m]}};
    if (e.pooled[m]) row["pooled"] = true;
    j.push_back(std::move(row));
  }
  return j;
}

nlohmann::ordered_json to_json(const FitResult& fit) {
  return {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared}, {"n_points", fit.n_points}};
}

nlohmann::ordered_json to_json(const StudyReport& report) {
  nlohmann::ordered_json j;
  j["source"] = report.source;
  j["fit"] = to_json(report.fit);
  j["pearson"] = report.pearson;
  j["spearman"] = report.spearman;
  j["true_ate"] = report.true_ate;
  j["f0"] = to_json(report.f0);
  j["f1_star"] = to_json(report.f1_star);
  auto sigma = nlohmann::ordered_json::array();
  for (std::size_t m = 0; m < report.sigma.size(); ++m)
    sigma.push_back({{"level", report.sigma.domain().id(m)}, {"sigma", report.sigma[m]}});
  j["sigma"] = std::move(sigma);
  j["reference_ids"] = report.reference_ids;
  auto points = nlohmann::ordered_json::array();
  for (const auto& p : report.points)
    points.push_back({{"design_id", p.design_id},
                      {"deviation", p.deviation},
                      {"emp_variance", p.emp_variance},
                      {"emp_mean", p.emp_mean},
                      {"replications", p.replications},
                      {"n1", p.n1}});
  j["points"] = std::move(points);
  auto skipped = nlohmann::ordered_json::array();
  for (const auto& s : report.skipped)
    skipped.push_back({{"design_id", s.design_id}, {"error", to_string(s.kind)}, {"message", s.message}});
  j["skipped"] = std::move(skipped);
  return j;
}

nlohmann::ordered_json to_json(const DesignError& error) {
  nlohmann::ordered_json j;
  j["error"] = to_string(error.kind());
  j["message"] = error.what();
  if (error.level()) j["level"] = *error.level();
  if (error.detail()) j["detail"] = *error.detail();
  j["exit_status"] = exit_status(error.kind());
  return j;
}

}  // namespace trialdesign
