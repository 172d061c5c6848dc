#pragma once

// Flat key=value configuration. Later sources win: built-in defaults, the
// config file, TCNN_<KEY> environment variables (key upper-cased, dots and
// dashes as underscores), then explicit overrides.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace tcnn {

class Config {
 public:
  Config() = default;
  explicit Config(std::map<std::string, std::string> defaults) : values_(std::move(defaults)) {}

  /// Parses "key = value" lines; '#' starts a comment.
  void merge_file(const std::filesystem::path& path);
  void merge_text(const std::string& text, const std::string& origin = "<text>");
  /// For every key already known, picks up TCNN_<KEY> when set.
  void merge_env();
  /// "key=value" pairs.
  void merge_overrides(const std::vector<std::string>& pairs);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& str(const std::string& key) const;
  long integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<int> int_list(const std::string& key) const;

  /// Throws when a key outside `allowed` is present.
  void require_known(const std::vector<std::string>& allowed) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// Sorted key=value lines.
  std::string dump() const;

  static std::string env_name(const std::string& key);

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace tcnn
