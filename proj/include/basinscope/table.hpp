#pragma once

// Row-oriented result tables shared by every output path. CSV prints numbers
// with nine significant digits; JSON carries the same rows under "rows" with
// a "meta" object alongside.

#include <cstdlib>
#include <ostream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "format.hpp"

namespace basinscope {

/// A table cell: a number, a text token, or empty.
using Cell = std::variant<std::monostate, double, std::string>;

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

inline std::string cell_text(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) return format_sig9(*d);
  if (const std::string* s = std::get_if<std::string>(&c)) return *s;
  return {};
}

inline void write_csv(std::ostream& os, const Table& t) {
  for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << cell_text(row[i]);
    os << '\n';
  }
}

inline nlohmann::ordered_json table_rows_json(const Table& t) {
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < row.size() && i < t.header.size(); ++i) {
      const Cell& c = row[i];
      if (const double* d = std::get_if<double>(&c))
        obj[t.header[i]] = std::strtod(format_sig9(*d).c_str(), nullptr);
      else if (const std::string* s = std::get_if<std::string>(&c))
        obj[t.header[i]] = *s;
      else
        obj[t.header[i]] = nullptr;
    }
    rows.push_back(std::move(obj));
  }
  return rows;
}

inline void write_json(std::ostream& os, const Table& t, const nlohmann::ordered_json& meta) {
  nlohmann::ordered_json doc;
  doc["meta"] = meta;
  doc["rows"] = table_rows_json(t);
  os << doc.dump(2) << '\n';
}

}  // namespace basinscope
