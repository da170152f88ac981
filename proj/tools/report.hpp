#pragma once
// Report emission. Tables go out as CSV with a schema comment on the first
// line; nested reports use JSON with a top-level "schema" field. Doubles are
// printed with 17 significant digits so equal inputs produce byte-equal
// files.

#include <cstddef>
#include <string>
#include <vector>

namespace flashlab::cli {

std::string format_double(double x);
std::string format_size(std::size_t v);

class CsvReport {
 public:
  // schema like "flashlab.rmse.v1"; columns become the header row.
  CsvReport(std::string schema, std::vector<std::string> columns);

  void add_row(std::vector<std::string> cells);
  std::string text() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::string schema_;
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

// Writes to the resolved path, or to stdout when path is empty. Announces
// the file on stderr so stdout stays machine-readable.
void write_report(const std::string& path, const std::string& text);

}  // namespace flashlab::cli
