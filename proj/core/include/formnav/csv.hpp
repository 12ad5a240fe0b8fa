#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace formnav {

// Shortest round-trip representation; snprintf with %.17g is locale-free and
// deterministic, which the byte-identical output contract relies on.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shortest form that still round-trips.
  for (int prec = 1; prec <= 16; ++prec) {
    char trial[40];
    std::snprintf(trial, sizeof(trial), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(trial, "%lf", &back);
    if (back == v) return trial;
  }
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns) : path_(path) {
    out_.open(path);
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns[i];
    }
    out_ << '\n';
    n_columns_ = columns.size();
  }

  void field(double v) { field_str(format_double(v)); }
  void field(int v) { field_str(std::to_string(v)); }
  void field(long v) { field_str(std::to_string(v)); }
  void field(std::size_t v) { field_str(std::to_string(v)); }
  void field(const std::string& v) { field_str(v); }

  void end_row() {
    if (fields_in_row_ != n_columns_) {
      throw std::runtime_error("csv row width mismatch in " + path_);
    }
    out_ << '\n';
    fields_in_row_ = 0;
  }

  void flush() { out_.flush(); }

 private:
  void field_str(const std::string& s) {
    if (fields_in_row_) out_ << ',';
    out_ << s;
    ++fields_in_row_;
  }

  std::string path_;
  std::ofstream out_;
  std::size_t n_columns_ = 0;
  std::size_t fields_in_row_ = 0;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

// Minimal CSV reader: comma-separated, no quoting (our files never need it).
inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

}  // namespace formnav
