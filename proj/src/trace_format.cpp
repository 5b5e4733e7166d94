#include "memdep/tracer/tracer.hpp"
#include "memdep/util/common.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace memdep::tracer {

namespace {

uint64_t parse_u64_dec(std::string_view s) {
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 10);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::runtime_error("bad unsigned value: " + std::string(s));
  return v;
}

std::string format_record(const isa::EffectRecord& rec) {
  std::ostringstream os;
  os << "addr=" << hex_u64(rec.address) << " mnem=" << isa::mnemonic_name(rec.mnemonic) << " ops=[";
  for (size_t i = 0; i < rec.token_values.size(); ++i) {
    const auto& tv = rec.token_values[i];
    if (i) os << ",";
    os << tv.token << ":" << hex_u64(tv.in) << ":" << hex_u64(tv.out);
  }
  os << "] mem=[";
  for (size_t i = 0; i < rec.mem.size(); ++i) {
    const auto& m = rec.mem[i];
    if (i) os << ",";
    os << hex_u64(m.address) << ":" << static_cast<int>(m.width) << ":" << (m.is_write ? 'w' : 'r')
       << ":" << hex_u64(m.value);
  }
  os << "] flipped=" << (rec.flipped ? 1 : 0);
  return os.str();
}

std::vector<std::string> split_list(std::string_view inner) {
  std::vector<std::string> out;
  if (std::string_view(trim(inner)).empty()) return out;
  for (auto& part : split(inner, ',')) out.emplace_back(trim(part));
  return out;
}

isa::EffectRecord parse_record(std::string_view line, int lineno) {
  auto bad = [&](const std::string& msg) {
    return std::runtime_error("trace line " + std::to_string(lineno) + ": " + msg);
  };
  isa::EffectRecord rec;
  size_t ops_at = line.find(" ops=[");
  size_t mem_at = line.find(" mem=[");
  size_t flip_at = line.find(" flipped=");
  if (ops_at == std::string_view::npos || mem_at == std::string_view::npos ||
      flip_at == std::string_view::npos)
    throw bad("missing field");

  std::string_view head = line.substr(0, ops_at);
  for (const auto& f : split(head, ' ')) {
    std::string_view fv = trim(f);
    if (fv.empty()) continue;
    if (starts_with(fv, "addr=")) rec.address = parse_hex(fv.substr(5));
    else if (starts_with(fv, "mnem=")) {
      auto m = isa::mnemonic_from_name(fv.substr(5));
      if (!m) throw bad("unknown mnemonic");
      rec.mnemonic = *m;
    } else {
      throw bad("unexpected field: " + std::string(fv));
    }
  }

  std::string_view ops_body = line.substr(ops_at + 6, mem_at - (ops_at + 6));
  if (ops_body.empty() || ops_body.back() != ']') throw bad("unterminated ops list");
  ops_body.remove_suffix(1);
  for (const auto& item : split_list(ops_body)) {
    auto parts = split(item, ':');
    if (parts.size() != 3) throw bad("bad ops entry: " + item);
    rec.token_values.push_back({parts[0], parse_hex(parts[1]), parse_hex(parts[2])});
  }

  std::string_view mem_body = line.substr(mem_at + 6, flip_at - (mem_at + 6));
  if (mem_body.empty() || mem_body.back() != ']') throw bad("unterminated mem list");
  mem_body.remove_suffix(1);
  for (const auto& item : split_list(mem_body)) {
    auto parts = split(item, ':');
    if (parts.size() != 4) throw bad("bad mem entry: " + item);
    isa::MemAccess m;
    m.address = parse_hex(parts[0]);
    m.width = static_cast<uint8_t>(parse_int(parts[1]));
    if (parts[2] == "w") m.is_write = true;
    else if (parts[2] == "r") m.is_write = false;
    else throw bad("bad access direction");
    m.value = parse_hex(parts[3]);
    rec.mem.push_back(m);
  }

  std::string_view flip = trim(line.substr(flip_at + 9));
  if (flip == "1") rec.flipped = true;
  else if (flip != "0") throw bad("bad flipped value");
  return rec;
}

}  // namespace

std::string format_traces(const std::vector<TraceLog>& traces) {
  std::ostringstream os;
  for (const auto& t : traces) {
    os << "trace func=" << t.function << " run=" << t.run << " seed=" << t.seed
       << " aborted=" << (t.aborted ? 1 : 0) << " budget=" << (t.budget_exhausted ? 1 : 0) << "\n";
    for (const auto& rec : t.records) os << format_record(rec) << "\n";
    os << "end\n";
  }
  return os.str();
}

std::vector<TraceLog> parse_traces(std::string_view text) {
  std::vector<TraceLog> out;
  TraceLog cur;
  bool in_trace = false;
  int lineno = 0;
  for (const auto& raw : split(text, '\n')) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (starts_with(line, "trace ")) {
      if (in_trace) throw std::runtime_error("trace line " + std::to_string(lineno) + ": nested trace");
      cur = TraceLog{};
      for (const auto& f : split(line.substr(6), ' ')) {
        std::string_view fv = trim(f);
        if (fv.empty()) continue;
        if (starts_with(fv, "func=")) cur.function = std::string(fv.substr(5));
        else if (starts_with(fv, "run=")) cur.run = static_cast<int>(parse_int(fv.substr(4)));
        else if (starts_with(fv, "seed=")) cur.seed = parse_u64_dec(fv.substr(5));
        else if (starts_with(fv, "aborted=")) cur.aborted = fv.substr(8) == "1";
        else if (starts_with(fv, "budget=")) cur.budget_exhausted = fv.substr(7) == "1";
        else throw std::runtime_error("trace line " + std::to_string(lineno) + ": unexpected field");
      }
      in_trace = true;
    } else if (line == "end") {
      if (!in_trace) throw std::runtime_error("trace line " + std::to_string(lineno) + ": stray end");
      out.push_back(std::move(cur));
      in_trace = false;
    } else {
      if (!in_trace) throw std::runtime_error("trace line " + std::to_string(lineno) + ": record outside trace");
      auto rec = parse_record(line, lineno);
      if (rec.flipped) cur.flipped_sites.insert(rec.address);
      cur.records.push_back(std::move(rec));
    }
  }
  if (in_trace) throw std::runtime_error("unterminated trace");
  return out;
}

std::string format_dependencies(const std::vector<DependencyRecord>& deps) {
  std::vector<DependencyRecord> sorted = deps;
  std::sort(sorted.begin(), sorted.end());
  std::ostringstream os;
  for (const auto& d : sorted)
    os << "dep " << hex_u64(d.a) << " " << hex_u64(d.b) << " " << dep_kind_name(d.kind) << "\n";
  return os.str();
}

std::vector<DependencyRecord> parse_dependencies(std::string_view text) {
  std::vector<DependencyRecord> out;
  int lineno = 0;
  for (const auto& raw : split(text, '\n')) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto parts = split(line, ' ');
    std::vector<std::string> fields;
    for (auto& p : parts)
      if (!std::string_view(trim(p)).empty()) fields.emplace_back(trim(p));
    if (fields.size() != 4 || fields[0] != "dep")
      throw std::runtime_error("dep line " + std::to_string(lineno) + ": expected 'dep a b kind'");
    DependencyRecord d;
    d.a = parse_hex(fields[1]);
    d.b = parse_hex(fields[2]);
    auto k = dep_kind_from_name(fields[3]);
    if (!k) throw std::runtime_error("dep line " + std::to_string(lineno) + ": bad kind");
    d.kind = *k;
    out.push_back(d);
  }
  return out;
}

std::string format_regions(const std::map<uint64_t, Region>& labels) {
  std::ostringstream os;
  for (const auto& [addr, r] : labels) os << hex_u64(addr) << " " << region_name(r) << "\n";
  return os.str();
}

std::map<uint64_t, Region> parse_regions(std::string_view text) {
  std::map<uint64_t, Region> out;
  int lineno = 0;
  for (const auto& raw : split(text, '\n')) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto fields = split(line, ' ');
    std::vector<std::string> fv;
    for (auto& p : fields)
      if (!std::string_view(trim(p)).empty()) fv.emplace_back(trim(p));
    if (fv.size() != 2)
      throw std::runtime_error("region line " + std::to_string(lineno) + ": expected 'addr region'");
    auto r = region_from_name(fv[1]);
    if (!r) throw std::runtime_error("region line " + std::to_string(lineno) + ": bad region");
    out[parse_hex(fv[0])] = *r;
  }
  return out;
}

}  // namespace memdep::tracer
