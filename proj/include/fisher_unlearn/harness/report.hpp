/*
 * Copyright 2026 The fisher-unlearn Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Tabular report emission. CSV floats use 9 significant digits with trailing
// zeros kept; JSON carries the same records at full precision.

#ifndef FISHER_UNLEARN_HARNESS_REPORT_HPP_
#define FISHER_UNLEARN_HARNESS_REPORT_HPP_

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "fisher_unlearn/error.hpp"
#include "fisher_unlearn/io.hpp"
#include "fisher_unlearn/numerics.hpp"

namespace fisher_unlearn::harness {

using Cell = std::variant<std::string, std::int64_t, std::uint64_t, double>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) {
      fail(ErrorCode::kLengthMismatch, "row has " + std::to_string(row.size()) + " cells, table has " +
                                           std::to_string(columns.size()) + " columns");
    }
    rows.push_back(std::move(row));
  }

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    fail(ErrorCode::kInvalidArgument, "no column named " + name);
  }

  double number(std::size_t row, const std::string& name) const {
    const Cell& c = rows.at(row).at(column(name));
    if (const auto* d = std::get_if<double>(&c)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
    if (const auto* u = std::get_if<std::uint64_t>(&c)) return static_cast<double>(*u);
    fail(ErrorCode::kInvalidArgument, "column " + name + " is not numeric");
  }

  const std::string& text(std::size_t row, const std::string& name) const {
    return std::get<std::string>(rows.at(row).at(column(name)));
  }
};

inline std::string format_float(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%#.9g", v);
  return buf;
}

inline std::string format_cell(const Cell& c) {
  struct {
    std::string operator()(const std::string& s) const {
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string q = "\"";
      for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      return q + "\"";
    }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(std::uint64_t v) const { return std::to_string(v); }
    std::string operator()(double v) const { return format_float(v); }
  } visitor;
  return std::visit(visitor, c);
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_cell(row[i]);
    out += "\n";
  }
  return out;
}

inline nlohmann::json to_json(const Table& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : t.rows) {
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t i = 0; i < row.size(); ++i)
      std::visit([&](const auto& v) { obj[t.columns[i]] = v; }, row[i]);
    rows.push_back(std::move(obj));
  }
  return {{"columns", t.columns}, {"rows", std::move(rows)}};
}

/// Inverse of to_json. JSON null (how a NaN is written) reads back as NaN.
inline Table table_from_json(const nlohmann::json& j) {
  Table t;
  j.at("columns").get_to(t.columns);
  for (const auto& obj : j.at("rows")) {
    std::vector<Cell> row;
    for (const auto& name : t.columns) {
      const auto& v = obj.at(name);
      if (v.is_string()) row.emplace_back(v.get<std::string>());
      else if (v.is_number_unsigned()) row.emplace_back(v.get<std::uint64_t>());
      else if (v.is_number_integer()) row.emplace_back(v.get<std::int64_t>());
      else if (v.is_number_float()) row.emplace_back(v.get<double>());
      else if (v.is_null()) row.emplace_back(std::numeric_limits<double>::quiet_NaN());
      else fail(ErrorCode::kIoError, "unsupported JSON cell in column " + name);
    }
    t.add(std::move(row));
  }
  return t;
}

enum class ReportFormat { kCsv, kJson };

inline void emit_report(const Table& t, ReportFormat format, const std::filesystem::path& path) {
  io::write_text(path, format == ReportFormat::kCsv ? to_csv(t) : to_json(t).dump(2) + "\n");
}

inline bool is_timing_column(const std::string& name) {
  return name.size() >= 2 && name.compare(name.size() - 2, 2, "_s") == 0;
}

/// Table without its wall-clock columns (names ending in "_s").
inline Table without_timings(const Table& t) {
  Table out;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < t.columns.size(); ++i)
    if (!is_timing_column(t.columns[i])) {
      keep.push_back(i);
      out.columns.push_back(t.columns[i]);
    }
  for (const auto& row : t.rows) {
    std::vector<Cell> r;
    for (std::size_t i : keep) r.push_back(row[i]);
    out.rows.push_back(std::move(r));
  }
  return out;
}

/// FNV-1a of the timing-free CSV rendering.
inline std::string determinism_digest(const Table& t) {
  numerics::Fnv1a h;
  h.text(to_csv(without_timings(t)));
  return numerics::hex64(h.digest());
}

/// Parses CSV written by to_csv back into text cells (numbers stay strings).
inline Table parse_csv(const std::string& text) {
  auto split_line = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char ch = line[i];
      if (quoted) {
        if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (ch == '"') {
          quoted = false;
        } else {
          cur += ch;
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    cells.push_back(cur);
    return cells;
  };
  Table t;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (header) {
      t.columns = std::move(cells);
      header = false;
    } else {
      std::vector<Cell> row(cells.begin(), cells.end());
      t.add(std::move(row));
    }
  }
  return t;
}

}  // namespace fisher_unlearn::harness

#endif  // FISHER_UNLEARN_HARNESS_REPORT_HPP_
