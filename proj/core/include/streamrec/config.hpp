#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace streamrec {

/// Flat key/value tree. Text form:
///
///   # comment
///   seed = 7
///   [sampler]
///   delta = 0.5          -> key "sampler.delta"
///
/// Keys are dotted paths; section headers prefix the keys that follow.
class KeyValueConfig {
 public:
  /// Throws ConfigError naming the line on malformed input.
  static KeyValueConfig parse(std::istream& in);
  static KeyValueConfig parse_file(const std::string& path);

  /// Parses "key=value" (as given to --set).
  void set_assignment(const std::string& assignment);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string* find(const std::string& key) const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  /// Grouped by section, keys sorted.
  void write(std::ostream& out) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace streamrec
