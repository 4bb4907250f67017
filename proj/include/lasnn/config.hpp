#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace lasnn {

// Line-oriented UTF-8 configuration: `key = value` with dotted sections,
// '#' starts a comment. Every key has a documented default; unknown keys are
// hard errors so typos cannot silently fall back to defaults.
class Config {
 public:
  Config();  // defaults only
  static Config from_file(const std::string& path);
  void apply_line(const std::string& line, const std::string& where);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  float get_float(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;

  // Canonical `key = value` text, sorted by key; the config hash is FNV-1a64
  // over this text, rendered as 16 hex digits.
  std::string canonical() const;
  std::string hash() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace lasnn
