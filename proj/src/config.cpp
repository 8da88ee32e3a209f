#include "blur/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

namespace blur {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

const char* source_name(ConfigSource s) {
  switch (s) {
    case ConfigSource::fallback: return "default";
    case ConfigSource::file: return "config-file";
    case ConfigSource::flag: return "flag";
  }
  return "?";
}

}  // namespace

RunConfig::RunConfig(std::string section, std::map<std::string, std::string> defaults)
    : section_(std::move(section)) {
  for (auto& [k, v] : defaults) values_[k] = {v, ConfigSource::fallback};
}

void RunConfig::assign(const std::string& key, const std::string& value, ConfigSource src) {
  auto it = values_.find(key);
  if (it == values_.end())
    throw ConfigError("unknown configuration key '" + key + "' for subcommand '" + section_ + "'");
  it->second = {value, src};
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  std::string current_section;  // empty = global
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(path + ":" + std::to_string(line_no) + ": malformed section header");
      current_section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!current_section.empty() && current_section != section_) continue;
    assign(key, value, ConfigSource::file);
  }
}

void RunConfig::set_flag(const std::string& key, const std::string& value) {
  assign(key, value, ConfigSource::flag);
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
  return it->second.text;
}

int64_t RunConfig::get_int(const std::string& key) const {
  const std::string& s = get(key);
  int64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("key '" + key + "': expected integer, got '" + s + "'");
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& s = get(key);
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("key '" + key + "': expected number, got '" + s + "'");
  return v;
}

bool RunConfig::get_bool(const std::string& key) const {
  std::string s = get(key);
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("key '" + key + "': expected boolean, got '" + s + "'");
}

bool RunConfig::is_set(const std::string& key) const {
  return source(key) != ConfigSource::fallback;
}

ConfigSource RunConfig::source(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown configuration key '" + key + "'");
  return it->second.source;
}

void RunConfig::dump(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write resolved config: " + path);
  out << "[" << section_ << "]\n";
  for (const auto& [k, v] : values_)
    out << k << " = " << v.text << "  # " << source_name(v.source) << "\n";
}

}  // namespace blur
