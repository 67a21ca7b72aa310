#include "cfn/csv.hpp"

#include <fstream>
#include <stdexcept>

namespace cfn {

void CsvBuilder::header(const std::vector<std::string>& cols) {
  header_.clear();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) header_ += ',';
    header_ += cols[i];
  }
}

void CsvBuilder::end_row() {
  std::string line;
  for (std::size_t i = 0; i < row_.size(); ++i) {
    if (i) line += ',';
    line += row_[i];
  }
  rows_.push_back(std::move(line));
  row_.clear();
}

std::string CsvBuilder::str() const {
  std::string out;
  for (const auto& c : preamble_) out += "# " + c + "\n";
  out += header_ + "\n";
  for (const auto& r : rows_) out += r + "\n";
  return out;
}

void CsvBuilder::write(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << str();
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace cfn
