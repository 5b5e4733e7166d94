#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace memdep {

// ---- small text helpers ----------------------------------------------------

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

std::string hex_u64(uint64_t v);              // lowercase, no 0x
uint64_t parse_hex(std::string_view s);       // accepts optional 0x
int64_t parse_int(std::string_view s);        // dec or 0x hex, optional sign

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// FNV-1a over file bytes, used for run-manifest input digests.
uint64_t fnv1a(std::string_view data);

// ---- key=value configuration ----------------------------------------------

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Layered key=value store: defaults, then config file, then flag overrides.
class KvConfig {
 public:
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void load_text(std::string_view text);  // one key=value per line, # comments
  void load_file(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_real(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  // Every key consumed through get* is recorded; unknown leftover keys are a
  // config error surfaced by validate_consumed().
  void validate_consumed() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> consumed_;
};

}  // namespace memdep
