#include "formnav/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace formnav {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

ConfigDoc ConfigDoc::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

ConfigDoc ConfigDoc::parse_string(const std::string& text, const std::string& origin) {
  ConfigDoc doc;
  doc.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                 ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": empty section name");
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                               ": expected 'key = value'");
    }
    ConfigEntry e;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = line_no;
    if (e.key.empty()) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    if (!section.empty()) e.key = section + "." + e.key;
    doc.entries_.push_back(std::move(e));
  }
  return doc;
}

void ConfigDoc::apply_override(const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::runtime_error("override must look like key=value: " + assignment);
  }
  ConfigEntry e;
  e.key = trim(assignment.substr(0, eq));
  e.value = trim(assignment.substr(eq + 1));
  e.line = 0;
  entries_.push_back(std::move(e));
}

ConfigBinder::ConfigBinder(const ConfigDoc& doc) : doc_(doc) {}

const ConfigEntry* ConfigBinder::find_last(const std::string& key) const {
  const ConfigEntry* found = nullptr;
  for (const auto& e : doc_.entries()) {
    if (e.key == key) found = &e;
  }
  return found;
}

void ConfigBinder::fail(const ConfigEntry& e, const std::string& what) const {
  const std::string where =
      e.line > 0 ? doc_.origin() + ":" + std::to_string(e.line) : "<override>";
  throw std::runtime_error(where + ": " + what);
}

bool ConfigBinder::has(const std::string& key) const { return find_last(key) != nullptr; }

void ConfigBinder::bind(const std::string& key, double* out) {
  consumed_.insert(key);
  if (const auto* e = find_last(key)) {
    try {
      std::size_t used = 0;
      *out = std::stod(e->value, &used);
      if (used != e->value.size()) throw std::invalid_argument("");
    } catch (...) {
      fail(*e, "expected a number for '" + key + "', got '" + e->value + "'");
    }
  }
}

void ConfigBinder::bind(const std::string& key, int* out) {
  long v = *out;
  bind(key, &v);
  *out = static_cast<int>(v);
}

void ConfigBinder::bind(const std::string& key, long* out) {
  consumed_.insert(key);
  if (const auto* e = find_last(key)) {
    try {
      std::size_t used = 0;
      *out = std::stol(e->value, &used);
      if (used != e->value.size()) throw std::invalid_argument("");
    } catch (...) {
      fail(*e, "expected an integer for '" + key + "', got '" + e->value + "'");
    }
  }
}

void ConfigBinder::bind(const std::string& key, bool* out) {
  consumed_.insert(key);
  if (const auto* e = find_last(key)) {
    if (e->value == "true" || e->value == "1") {
      *out = true;
    } else if (e->value == "false" || e->value == "0") {
      *out = false;
    } else {
      fail(*e, "expected true/false for '" + key + "', got '" + e->value + "'");
    }
  }
}

void ConfigBinder::bind(const std::string& key, std::string* out) {
  consumed_.insert(key);
  if (const auto* e = find_last(key)) *out = e->value;
}

void ConfigBinder::bind_list(const std::string& key, std::vector<std::string>* out) {
  consumed_.insert(key);
  std::vector<std::string> values;
  for (const auto& e : doc_.entries()) {
    if (e.key == key) values.push_back(e.value);
  }
  if (!values.empty()) *out = std::move(values);
}

void ConfigBinder::bind_list(const std::string& key, std::vector<double>* out) {
  std::vector<std::string> raw;
  bind_list(key, &raw);
  if (raw.empty()) return;
  out->clear();
  for (const auto& s : raw) {
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        out->push_back(std::stod(item));
      } catch (...) {
        throw std::runtime_error(doc_.origin() + ": list value for '" + key +
                                 "' is not numeric: '" + item + "'");
      }
    }
  }
}

void ConfigBinder::accept_prefix(const std::string& prefix) {
  accepted_prefixes_.push_back(prefix);
}

void ConfigBinder::finish() const {
  for (const auto& e : doc_.entries()) {
    if (consumed_.count(e.key)) continue;
    bool accepted = false;
    for (const auto& p : accepted_prefixes_) {
      if (e.key.rfind(p, 0) == 0) {
        accepted = true;
        break;
      }
    }
    if (!accepted) fail(e, "unknown key '" + e.key + "'");
  }
}

std::vector<std::pair<std::string, std::vector<std::string>>>& ConfigWriter::section(
    const std::string& name) {
  for (auto& s : sections_) {
    if (s.first == name) return s.second;
  }
  sections_.push_back({name, {}});
  return sections_.back().second;
}

void ConfigWriter::set(const std::string& key, const std::string& value) {
  const std::size_t dot = key.find('.');
  const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
  const std::string k = dot == std::string::npos ? key : key.substr(dot + 1);
  auto& entries = section(sec);
  for (auto& e : entries) {
    if (e.first == k) {
      e.second = {value};
      return;
    }
  }
  entries.push_back({k, {value}});
}

void ConfigWriter::append_list(const std::string& key, const std::string& value) {
  const std::size_t dot = key.find('.');
  const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
  const std::string k = dot == std::string::npos ? key : key.substr(dot + 1);
  auto& entries = section(sec);
  for (auto& e : entries) {
    if (e.first == k) {
      e.second.push_back(value);
      return;
    }
  }
  entries.push_back({k, {value}});
}

namespace {
std::string format_config_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}
}  // namespace

void ConfigWriter::set(const std::string& key, double value) { set(key, format_config_double(value)); }
void ConfigWriter::set(const std::string& key, int value) { set(key, std::to_string(value)); }
void ConfigWriter::set(const std::string& key, long value) { set(key, std::to_string(value)); }
void ConfigWriter::set(const std::string& key, bool value) {
  set(key, std::string(value ? "true" : "false"));
}

std::string ConfigWriter::to_string() const {
  std::ostringstream out;
  for (const auto& [name, entries] : sections_) {
    if (!name.empty()) out << "[" << name << "]\n";
    for (const auto& [key, values] : entries) {
      for (const auto& v : values) out << key << " = " << v << "\n";
    }
    out << "\n";
  }
  return out.str();
}

void ConfigWriter::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << to_string();
}

}  // namespace formnav
