#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cca {

struct ConfigKey {
  std::string_view name;
  std::string_view default_value;
  std::string_view help;
};

/// Every recognized key with its default. Unknown keys are rejected.
const std::vector<ConfigKey>& config_keys();

/// Flat key=value run configuration. Lines starting with '#' are comments.
class Config {
 public:
  /// All keys at their defaults.
  Config();

  static Config from_file(const std::filesystem::path& path);

  void merge_file(const std::filesystem::path& path);
  void merge_text(std::string_view text);
  /// "key=value"
  void apply_override(std::string_view assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// Sorted "key=value" lines.
  std::string snapshot() const;
  void write_snapshot(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace cca
