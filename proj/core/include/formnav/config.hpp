#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace formnav {

// Line-oriented config format shared by experiment and scenario files:
//   # comment
//   key = value
//   [section]
//   key = value        # becomes section.key
// Repeated keys form lists. Keys are validated against a schema; anything
// unknown is an error that names the offending line.

struct ConfigEntry {
  std::string key;  // fully qualified: "section.key" or "key"
  std::string value;
  int line = 0;
};

class ConfigDoc {
 public:
  static ConfigDoc parse_file(const std::string& path);
  static ConfigDoc parse_string(const std::string& text, const std::string& origin = "<string>");

  // Appends "key=value" pairs from --set style overrides (line 0).
  void apply_override(const std::string& assignment);

  const std::vector<ConfigEntry>& entries() const { return entries_; }
  const std::string& origin() const { return origin_; }

 private:
  std::vector<ConfigEntry> entries_;
  std::string origin_;
};

// Typed extraction with strict unknown-key rejection. Bind every key you
// accept, then call finish() to reject leftovers.
class ConfigBinder {
 public:
  explicit ConfigBinder(const ConfigDoc& doc);

  bool has(const std::string& key) const;
  void bind(const std::string& key, double* out);
  void bind(const std::string& key, int* out);
  void bind(const std::string& key, long* out);
  void bind(const std::string& key, bool* out);
  void bind(const std::string& key, std::string* out);
  // All values of a repeated key, in file order.
  void bind_list(const std::string& key, std::vector<std::string>* out);
  void bind_list(const std::string& key, std::vector<double>* out);

  // Declare a key as accepted without reading it (used when a key belongs to
  // a sub-schema parsed elsewhere).
  void accept_prefix(const std::string& prefix);

  // Throws if any entry was neither bound nor covered by accept_prefix.
  void finish() const;

 private:
  const ConfigEntry* find_last(const std::string& key) const;
  [[noreturn]] void fail(const ConfigEntry& e, const std::string& what) const;

  const ConfigDoc& doc_;
  std::set<std::string> consumed_;
  std::vector<std::string> accepted_prefixes_;
};

// Serialization helper: sections in insertion order, deterministic output.
class ConfigWriter {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, int value);
  void set(const std::string& key, long value);
  void set(const std::string& key, bool value);
  void append_list(const std::string& key, const std::string& value);

  std::string to_string() const;
  void write_file(const std::string& path) const;

 private:
  // (section, key, values); section "" sorts first.
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::vector<std::string>>>>>
      sections_;
  std::vector<std::pair<std::string, std::vector<std::string>>>& section(const std::string& name);
};

}  // namespace formnav
