#pragma once

#include <map>
#include <string>

#include "blur/error.hpp"

namespace blur {

enum class ConfigSource { fallback, file, flag };

// Subcommand settings resolved as defaults <- config file <- flags, with
// provenance kept per key. Keys outside the default set are rejected.
class RunConfig {
 public:
  RunConfig(std::string section, std::map<std::string, std::string> defaults);

  // Flat `key = value` lines; `[section]` headers scope keys to one
  // subcommand, keys before any header apply everywhere.
  void load_file(const std::string& path);
  void set_flag(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  bool is_set(const std::string& key) const;  // file or flag, not fallback
  ConfigSource source(const std::string& key) const;

  // Resolved dump, one `key = value  # source` line per key.
  void dump(const std::string& path) const;

  const std::string& section() const { return section_; }

 private:
  struct Value {
    std::string text;
    ConfigSource source = ConfigSource::fallback;
  };
  void assign(const std::string& key, const std::string& value, ConfigSource src);
  std::string section_;
  std::map<std::string, Value> values_;
};

}  // namespace blur
