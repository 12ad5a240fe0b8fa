#include "formnav/checkpoint.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace formnav {

namespace {

constexpr char kMagic[4] = {'F', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.write(buf, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.write(buf, 8);
}

std::uint32_t get_u32(std::istream& in, const std::string& what) {
  char buf[4];
  in.read(buf, 4);
  if (!in) throw std::runtime_error("checkpoint truncated while reading " + what);
  std::uint32_t v;
  std::memcpy(&v, buf, 4);
  return v;
}

std::uint64_t get_u64(std::istream& in, const std::string& what) {
  char buf[8];
  in.read(buf, 8);
  if (!in) throw std::runtime_error("checkpoint truncated while reading " + what);
  std::uint64_t v;
  std::memcpy(&v, buf, 8);
  return v;
}

}  // namespace

void CheckpointWriter::add(const std::string& name, const Mat& value) {
  for (const auto& [existing, _] : arrays_) {
    if (existing == name) throw std::invalid_argument("duplicate checkpoint array: " + name);
  }
  arrays_.push_back({name, value});
}

void CheckpointWriter::add_scalar(const std::string& name, double value) {
  Mat m(1, 1);
  m(0, 0) = value;
  add(name, m);
}

void CheckpointWriter::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(arrays_.size()));
  std::uint64_t offset = 0;
  for (const auto& [name, value] : arrays_) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, static_cast<std::uint64_t>(value.rows()));
    put_u64(out, static_cast<std::uint64_t>(value.cols()));
    put_u64(out, offset);
    offset += static_cast<std::uint64_t>(value.size()) * sizeof(double);
  }
  for (const auto& [name, value] : arrays_) {
    // Row-major payload, independent of Eigen's internal layout.
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        const double d = value(r, c);
        char buf[8];
        std::memcpy(buf, &d, 8);
        out.write(buf, 8);
      }
    }
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

CheckpointReader::CheckpointReader(const std::string& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  const std::uint32_t version = get_u32(in, "version");
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                             " in " + path);
  }
  const std::uint32_t count = get_u32(in, "array count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32(in, "name length");
    if (name_len > 4096) throw std::runtime_error("corrupt manifest (name length) in " + path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error("checkpoint truncated while reading a name in " + path);
    Entry e;
    e.name = std::move(name);
    e.rows = static_cast<std::size_t>(get_u64(in, "rows of " + e.name));
    e.cols = static_cast<std::size_t>(get_u64(in, "cols of " + e.name));
    e.offset = static_cast<std::size_t>(get_u64(in, "offset of " + e.name));
    manifest_.push_back(std::move(e));
  }
  const std::streampos data_start = in.tellg();
  for (const auto& e : manifest_) {
    Mat m(e.rows, e.cols);
    in.seekg(data_start + static_cast<std::streamoff>(e.offset));
    for (std::size_t r = 0; r < e.rows; ++r) {
      for (std::size_t c = 0; c < e.cols; ++c) {
        char buf[8];
        in.read(buf, 8);
        if (!in) {
          throw std::runtime_error("checkpoint array '" + e.name + "' is truncated in " + path);
        }
        double d;
        std::memcpy(&d, buf, 8);
        if (!std::isfinite(d)) {
          throw std::runtime_error("checkpoint array '" + e.name + "' holds non-finite data in " +
                                   path);
        }
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = d;
      }
    }
    if (arrays_.count(e.name)) {
      throw std::runtime_error("checkpoint array '" + e.name + "' is duplicated in " + path);
    }
    arrays_[e.name] = std::move(m);
  }
}

bool CheckpointReader::has(const std::string& name) const { return arrays_.count(name) > 0; }

const Mat& CheckpointReader::get(const std::string& name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) {
    throw std::runtime_error("checkpoint array '" + name + "' missing from " + path_);
  }
  return it->second;
}

double CheckpointReader::get_scalar(const std::string& name) const {
  const Mat& m = get(name);
  if (m.size() != 1) throw std::runtime_error("checkpoint array '" + name + "' is not a scalar");
  return m(0, 0);
}

std::vector<std::string> CheckpointReader::names() const {
  std::vector<std::string> out;
  for (const auto& e : manifest_) out.push_back(e.name);
  return out;
}

}  // namespace formnav
