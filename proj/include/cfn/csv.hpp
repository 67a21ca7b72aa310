#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace cfn {

// All floats are printed with 17 significant digits so that equal doubles
// round-trip to byte-identical text.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Deterministic CSV assembly: '#'-prefixed preamble lines, one header row,
// then data rows.
class CsvBuilder {
 public:
  void comment(const std::string& line) { preamble_.push_back(line); }
  void header(const std::vector<std::string>& cols);

  void begin_row() { row_.clear(); }
  void cell(const std::string& v) { row_.push_back(v); }
  void cell(double v) { row_.push_back(format_double(v)); }
  void cell(std::int64_t v) { row_.push_back(std::to_string(v)); }
  void cell(std::uint64_t v) { row_.push_back(std::to_string(v)); }
  void cell(int v) { row_.push_back(std::to_string(v)); }
  void end_row();

  std::string str() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::string> preamble_;
  std::string header_;
  std::vector<std::string> rows_;
  std::vector<std::string> row_;
};

std::uint64_t fnv1a64(const std::string& text);

}  // namespace cfn
