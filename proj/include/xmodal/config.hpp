#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xmodal {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

// Every recognized key with its documented default.
std::span<const ConfigKey> config_keys();
const ConfigKey* find_config_key(std::string_view name);

// Flat key/value configuration. Resolution order, lowest to highest:
// documented default, config file, XMODAL_<KEY> environment variable,
// command-line flag.
class RunConfig {
public:
  RunConfig();  // all defaults

  // Throws UsageError for an unknown key.
  void set(std::string_view key, std::string value);

  // "key = value" lines; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  void load_text(std::string_view text, std::string_view origin = "config");

  // Applies XMODAL_* variables from the given "NAME=value" entries.
  void apply_environment(std::span<const std::string> entries);
  // Reads the process environment.
  void apply_process_environment();

  const std::string& get(std::string_view key) const;
  std::int64_t get_int(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;
  double get_double(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  std::vector<std::size_t> get_size_list(std::string_view key) const;

  const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace xmodal
