#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mecopt/types.hpp"

namespace mecopt {

/// Shortest round-trip decimal form of a double (printf %.17g trimmed).
inline std::string format_number(double v) {
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  CsvWriter& header(const std::vector<std::string>& cols) {
    row_strings(cols);
    return *this;
  }

  template <typename... Ts>
  CsvWriter& row(const Ts&... vals) {
    bool first = true;
    ((os_ << (first ? "" : ",") << cell(vals), first = false), ...);
    os_ << '\n';
    return *this;
  }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }

 private:
  static std::string cell(double v) { return format_number(v); }
  static std::string cell(float v) { return format_number(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <typename T>
  static std::string cell(const T& v) { return std::to_string(v); }

  std::ostream& os_;
};

/// Parses a simple comma-separated file with a header row. No quoting.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    throw Error("csv: missing column '" + name + "'");
  }
};

inline CsvTable parse_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      std::size_t b = cell.find_first_not_of(' ');
      out.push_back(b == std::string::npos ? std::string() : cell.substr(b));
    }
    return out;
  };
  if (!std::getline(in, line)) throw Error("csv: empty input");
  t.columns = split(line);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split(line);
    if (cells.size() != t.columns.size())
      throw Error("csv: line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                  " cells, expected " + std::to_string(t.columns.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  return f;
}

}  // namespace mecopt
