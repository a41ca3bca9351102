#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hettest/errors.hpp"
#include "hettest/harness.hpp"
#include "hettest/hetero_tests.hpp"
#include "hettest/scenarios.hpp"
#include "hettest/types.hpp"

namespace hettest::io {

using nlohmann::json;

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double &out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  if (s.empty())
    return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

// ---------------------------------------------------------------------------
// CSV tables

/// Splits one CSV record. Double-quoted fields may contain commas; a doubled
/// quote inside them is a literal quote.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column by header name, or by 0-based index when `key` is all digits
  /// and no header matches.
  std::size_t column(const std::string &key) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == key)
        return c;
    if (!key.empty() && key.find_first_not_of("0123456789") == std::string::npos) {
      const std::size_t idx = std::stoul(key);
      if (idx < header.size())
        return idx;
    }
    throw DataError("column not found: '" + key + "'");
  }
};

inline CsvTable read_csv_table(std::istream &in) {
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!have_header) {
      if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
          static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF)
        line.erase(0, 3);
      t.header = split_csv_line(line);
      have_header = true;
      continue;
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    auto fields = split_csv_line(line);
    if (fields.size() != t.header.size())
      throw DataError("row " + std::to_string(t.rows.size() + 1) + ": expected " +
                      std::to_string(t.header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    t.rows.push_back(std::move(fields));
  }
  if (!have_header)
    throw DataError("empty CSV: header row missing");
  return t;
}

inline CsvTable read_csv_table(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw DataError("cannot open '" + path + "'");
  return read_csv_table(in);
}

/// n x k numeric block of the named columns. Rows are 1-based data rows
/// (the header is not counted) in error messages.
inline Matrix numeric_columns(const CsvTable &t, const std::vector<std::string> &columns) {
  std::vector<std::size_t> idx;
  for (const auto &c : columns)
    idx.push_back(t.column(c));
  Matrix out(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const std::string &cell = t.rows[r][idx[k]];
      double v = 0.0;
      if (!parse_double(cell, v)) {
        const bool missing = cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" ||
                             cell == "null" || cell == ".";
        throw DataError(std::string(missing ? "missing value" : "non-numeric value '" + cell + "'") +
                        " at row " + std::to_string(r + 1) + ", column '" + t.header[idx[k]] + "'");
      }
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v;
    }
  }
  return out;
}

/// Dataset from the response column and covariate columns of a table.
inline Dataset dataset_from_table(const CsvTable &t, const std::string &response,
                                  const std::vector<std::string> &covariates) {
  if (covariates.empty())
    throw DataError("no covariate columns selected");
  Dataset d;
  d.y = numeric_columns(t, {response}).col(0);
  d.X = numeric_columns(t, covariates);
  return d;
}

/// Minimum sample size for running a test on loaded data.
inline void require_min_rows(const Dataset &d) {
  if (d.X.rows() < d.X.cols() + 2)
    throw DataError("need at least p + 2 = " + std::to_string(d.X.cols() + 2) + " rows, found " +
                    std::to_string(d.X.rows()));
}

inline Dataset load_csv(const std::string &path, const std::string &response,
                        const std::vector<std::string> &covariates) {
  return dataset_from_table(read_csv_table(path), response, covariates);
}

/// Writes y then x1..xp with round-trip precision.
inline void write_dataset_csv(std::ostream &out, const Dataset &d) {
  out << "y";
  for (Eigen::Index k = 0; k < d.p(); ++k)
    out << ",x" << (k + 1);
  out << '\n';
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    out << format_double(d.y[i]);
    for (Eigen::Index k = 0; k < d.p(); ++k)
      out << ',' << format_double(d.X(i, k));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Running-record speeds

enum class TimeUnit { seconds, minutes, hours };

inline TimeUnit parse_time_unit(std::string_view s) {
  if (s == "s" || s == "sec" || s == "seconds") return TimeUnit::seconds;
  if (s == "min" || s == "minutes") return TimeUnit::minutes;
  if (s == "h" || s == "hours") return TimeUnit::hours;
  throw DomainError("unknown time unit '" + std::string(s) + "'");
}

/// Seconds up to 400 m, minutes beyond.
inline TimeUnit default_time_unit(double distance_m) {
  return distance_m <= 400.0 ? TimeUnit::seconds : TimeUnit::minutes;
}

inline double to_seconds(double t, TimeUnit u) {
  switch (u) {
  case TimeUnit::seconds: return t;
  case TimeUnit::minutes: return 60.0 * t;
  case TimeUnit::hours: return 3600.0 * t;
  }
  return t;
}

/// Speeds in m/s from winning times. `units` may be empty, in which case the
/// default unit for each distance applies.
inline Matrix to_speeds(const Matrix &times, const std::vector<double> &distances_m,
                        std::vector<TimeUnit> units = {}) {
  const auto k = static_cast<std::size_t>(times.cols());
  detail::require(distances_m.size() == k, "to_speeds: one distance per column required");
  if (units.empty())
    for (double dist : distances_m)
      units.push_back(default_time_unit(dist));
  detail::require(units.size() == k, "to_speeds: one time unit per column required");
  for (double dist : distances_m)
    detail::require(dist > 0.0, "to_speeds: distances must be positive");
  Matrix speeds(times.rows(), times.cols());
  for (Eigen::Index i = 0; i < times.rows(); ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      const auto col = static_cast<Eigen::Index>(c);
      const double t = times(i, col);
      if (!(t > 0.0) || !std::isfinite(t))
        throw DataError("nonpositive time at row " + std::to_string(i + 1) + ", column " +
                        std::to_string(c + 1));
      speeds(i, col) = distances_m[c] / to_seconds(t, units[c]);
    }
  }
  return speeds;
}

// ---------------------------------------------------------------------------
// JSON

inline json matrix_to_json(const Matrix &m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_to_json(const Vector &v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out.push_back(v[i]);
  return out;
}

inline json to_json(const TestResult &r) {
  json j;
  j["method"] = std::string(to_string(r.method));
  j["statistic"] = r.statistic;
  j["raw_stat"] = r.raw_stat;
  j["variance_est"] = r.variance_est ? json(*r.variance_est) : json(nullptr);
  j["qhat"] = r.qhat ? json(*r.qhat) : json(nullptr);
  j["p_value"] = r.p_value;
  j["n"] = r.n;
  j["p"] = r.p;
  j["h"] = r.h;
  j["h1"] = r.h1;
  if (r.method == Method::drmat || r.method == Method::zheng)
    j["chi_square"] = r.chi_square();
  if (r.full_dimensional)
    j["note"] = "selected dimension equals p; the kernel is p-dimensional";
  return j;
}

inline json to_json(const TestConfig &c) {
  json j;
  j["h_multiplier"] = c.h_multiplier;
  j["h1_constant"] = c.h1_constant;
  j["c_n"] = c.c_n ? json(*c.c_n) : json(nullptr);
  j["q_pilot"] = c.q_pilot;
  j["refine_c_n"] = c.refine_c_n;
  j["boot_reps"] = c.boot_reps;
  j["leave_one_out"] = c.leave_one_out ? json(*c.leave_one_out) : json(nullptr);
  j["zfn_h1_constant"] = c.zfn_h1_constant;
  return j;
}

inline json to_json(const RateRow &r) {
  json j;
  j["scenario"] = summary(r.spec);
  j["spec"] = to_kv(r.spec);
  j["method"] = std::string(to_string(r.method));
  j["alpha"] = r.alpha;
  j["h_multiplier"] = r.h_multiplier;
  j["first_rep"] = r.first_rep;
  j["reps"] = r.reps;
  j["rejections"] = r.rejections;
  j["errors"] = r.errors;
  j["rate"] = r.rate;
  j["mc_stderr"] = r.mc_stderr;
  json q = json::object();
  for (const auto &[k, v] : r.qhat_counts)
    q[std::to_string(k)] = v;
  j["qhat_counts"] = std::move(q);
  return j;
}

/// Full report. Everything except "metadata" is a deterministic function of
/// the inputs.
inline json to_json(const ExperimentReport &rep) {
  json j;
  j["master_seed"] = rep.master_seed;
  j["config"] = to_json(rep.config);
  json rows = json::array();
  for (const auto &r : rep.rows)
    rows.push_back(to_json(r));
  j["rows"] = std::move(rows);
  j["metadata"] = {{"wall_seconds", rep.wall_seconds}};
  return j;
}

// ---------------------------------------------------------------------------
// Report CSV

inline const std::vector<std::string> &report_columns() {
  static const std::vector<std::string> cols{
      "example", "n",         "p",         "a",     "cov",        "error",     "base",
      "shape",   "nonstandard", "master_seed", "method", "alpha",   "h_mult",    "first_rep",
      "reps",    "rejections", "errors",    "rate",  "mc_stderr", "qhat_counts"};
  return cols;
}

inline std::string qhat_cell(const std::map<int, long> &counts) {
  std::string s;
  for (const auto &[q, c] : counts) {
    if (!s.empty())
      s += '|';
    s += std::to_string(q) + ':' + std::to_string(c);
  }
  return s;
}

inline void write_report_csv(std::ostream &out, const ExperimentReport &rep) {
  const auto &cols = report_columns();
  for (std::size_t c = 0; c < cols.size(); ++c)
    out << (c ? "," : "") << cols[c];
  out << '\n';
  for (const auto &r : rep.rows) {
    const auto kv = to_kv(r.spec);
    out << kv.at("example") << ',' << r.spec.n << ',' << r.spec.p << ',' << format_double(r.spec.a)
        << ',' << kv.at("cov") << ',' << kv.at("error") << ',' << kv.at("base") << ','
        << kv.at("shape") << ',' << kv.at("nonstandard") << ',' << r.spec.seed << ','
        << to_string(r.method) << ',' << format_double(r.alpha) << ','
        << format_double(r.h_multiplier) << ',' << r.first_rep << ',' << r.reps << ','
        << r.rejections << ',' << r.errors << ',' << format_double(r.rate) << ','
        << format_double(r.mc_stderr) << ',' << qhat_cell(r.qhat_counts) << '\n';
  }
}

inline std::vector<RateRow> read_report_csv(std::istream &in) {
  const CsvTable t = read_csv_table(in);
  auto col = [&](const std::vector<std::string> &row, const char *name) -> const std::string & {
    return row[t.column(name)];
  };
  auto num = [](const std::string &s) {
    double v = 0.0;
    if (!parse_double(s, v))
      throw DataError("report CSV: bad number '" + s + "'");
    return v;
  };
  std::vector<RateRow> rows;
  for (const auto &row : t.rows) {
    std::map<std::string, std::string> kv{
        {"example", col(row, "example")}, {"n", col(row, "n")},
        {"p", col(row, "p")},             {"a", col(row, "a")},
        {"cov", col(row, "cov")},         {"error", col(row, "error")},
        {"base", col(row, "base")},       {"shape", col(row, "shape")},
        {"nonstandard", col(row, "nonstandard")}, {"seed", col(row, "master_seed")}};
    RateRow r;
    r.spec = from_kv(kv);
    r.method = parse_method(col(row, "method"));
    r.alpha = num(col(row, "alpha"));
    r.h_multiplier = num(col(row, "h_mult"));
    r.first_rep = std::stol(col(row, "first_rep"));
    r.reps = std::stol(col(row, "reps"));
    r.rejections = std::stol(col(row, "rejections"));
    r.errors = std::stol(col(row, "errors"));
    r.rate = num(col(row, "rate"));
    r.mc_stderr = num(col(row, "mc_stderr"));
    std::stringstream cell(col(row, "qhat_counts"));
    std::string item;
    while (std::getline(cell, item, '|')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos)
        throw DataError("report CSV: bad qhat_counts entry '" + item + "'");
      r.qhat_counts[std::stoi(item.substr(0, colon))] = std::stol(item.substr(colon + 1));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

} // namespace hettest::io
