#pragma once

#include <map>
#include <string>
#include <vector>

#include "formnav/tensor.hpp"

namespace formnav {

// Versioned binary container of named float64 arrays. Layout (little endian):
//   magic "FNCK", u32 version, u32 count,
//   count manifest records: u32 name_len, name bytes, u64 rows, u64 cols,
//                           u64 byte_offset (from start of data block),
//   data block: row-major float64 payloads back to back.
// The manifest is self-describing so any language can read it.

class CheckpointWriter {
 public:
  void add(const std::string& name, const Mat& value);
  void add_scalar(const std::string& name, double value);
  void write(const std::string& path) const;

 private:
  std::vector<std::pair<std::string, Mat>> arrays_;
};

class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& path);

  bool has(const std::string& name) const;
  const Mat& get(const std::string& name) const;  // throws, naming the array
  double get_scalar(const std::string& name) const;
  std::vector<std::string> names() const;

  struct Entry {
    std::string name;
    std::size_t rows, cols, offset;
  };
  const std::vector<Entry>& manifest() const { return manifest_; }

 private:
  std::vector<Entry> manifest_;
  std::map<std::string, Mat> arrays_;
  std::string path_;
};

}  // namespace formnav
