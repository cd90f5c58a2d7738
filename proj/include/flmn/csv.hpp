#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flmn/errors.hpp"

namespace flmn {

// Minimal CSV for numeric metric logs: comma separators, no quoting.
class CsvWriter {
 public:
  CsvWriter() = default;
  explicit CsvWriter(const std::string& path) { open(path); }

  void open(const std::string& path) {
    out_.open(path, std::ios::trunc);
    if (!out_) throw Error("cannot open CSV for writing: " + path);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
    out_.flush();  // incremental: rows survive a crash
  }

  bool is_open() const { return out_.is_open(); }

 private:
  std::ofstream out_;
};

inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open CSV: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

// Round-trippable double formatting (shortest exact representation).
std::string format_double(double v);

}  // namespace flmn
