#include "report.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <utility>

#include "config.hpp"

namespace flashlab::cli {

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_size(std::size_t v) { return std::to_string(v); }

CsvReport::CsvReport(std::string schema, std::vector<std::string> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {}

void CsvReport::add_row(std::vector<std::string> cells) {
  if (cells.size() != columns_.size())
    throw std::logic_error("csv row width mismatch");
  rows_.push_back(std::move(cells));
}

std::string CsvReport::text() const {
  std::string out = "# schema=" + schema_ + "\n";
  auto join = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  join(columns_);
  for (const auto& row : rows_) join(row);
  return out;
}

void write_report(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  const std::string resolved = resolve_output_path(path);
  std::ofstream f(resolved, std::ios::binary);
  if (!f) throw ConfigError("cannot open output file " + resolved);
  f << text;
  if (!f) throw ConfigError("failed writing " + resolved);
  std::cerr << "wrote " << resolved << "\n";
}

}  // namespace flashlab::cli
