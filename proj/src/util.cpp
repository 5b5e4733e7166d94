#include "memdep/util/common.hpp"
#include "memdep/util/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace memdep {

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

std::string hex_u64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%llx", static_cast<unsigned long long>(v));
  return buf;
}

uint64_t parse_hex(std::string_view s) {
  if (starts_with(s, "0x") || starts_with(s, "0X")) s.remove_prefix(2);
  if (s.empty()) throw std::invalid_argument("empty hex literal");
  uint64_t v = 0;
  for (char c : s) {
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
    else throw std::invalid_argument("bad hex literal: " + std::string(s));
    v = v * 16 + static_cast<uint64_t>(d);
  }
  return v;
}

int64_t parse_int(std::string_view s) {
  bool neg = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    neg = s.front() == '-';
    s.remove_prefix(1);
  }
  uint64_t mag;
  if (starts_with(s, "0x") || starts_with(s, "0X")) {
    mag = parse_hex(s);
  } else {
    if (s.empty()) throw std::invalid_argument("empty integer literal");
    mag = 0;
    for (char c : s) {
      if (c < '0' || c > '9') throw std::invalid_argument("bad integer literal: " + std::string(s));
      mag = mag * 10 + static_cast<uint64_t>(c - '0');
    }
  }
  return neg ? -static_cast<int64_t>(mag) : static_cast<int64_t>(mag);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

uint64_t fnv1a(std::string_view data) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

void KvConfig::load_text(std::string_view text) {
  int lineno = 0;
  for (const auto& raw : split(text, '\n')) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key(trim(line.substr(0, eq)));
    std::string val(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    values_[key] = val;
  }
}

void KvConfig::load_file(const std::string& path) { load_text(read_file(path)); }

std::string KvConfig::get(const std::string& key, const std::string& fallback) const {
  consumed_[key] = true;
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

int64_t KvConfig::get_int(const std::string& key, int64_t fallback) const {
  consumed_[key] = true;
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return parse_int(it->second);
  } catch (const std::invalid_argument&) {
    throw ConfigError("config key " + key + ": expected integer, got '" + it->second + "'");
  }
}

double KvConfig::get_real(const std::string& key, double fallback) const {
  consumed_[key] = true;
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("config key " + key + ": expected number, got '" + it->second + "'");
  }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  consumed_[key] = true;
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError("config key " + key + ": expected boolean, got '" + v + "'");
}

void KvConfig::validate_consumed() const {
  for (const auto& [k, v] : values_) {
    if (!consumed_.count(k)) throw ConfigError("unknown config key: " + k);
  }
}

std::vector<int> Rng::sample_indices(int n, int k) {
  if (k > n) k = n;
  std::vector<int> idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  // Partial Fisher-Yates: first k slots end up a uniform k-subset.
  for (int i = 0; i < k; ++i) {
    int j = i + static_cast<int>(below(static_cast<uint64_t>(n - i)));
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  idx.resize(static_cast<size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace memdep
