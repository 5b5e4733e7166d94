#include "memdep/enc/dataset.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "memdep/util/common.hpp"

namespace memdep::enc {

std::optional<MemDir> static_mem_dir(const isa::Instruction& ins) {
  using M = isa::Mnemonic;
  switch (ins.mnemonic) {
    case M::push: return MemDir::write;
    case M::pop: return MemDir::read;
    case M::ret: return MemDir::read;
    case M::call:
    case M::lea:
    case M::nop:
    case M::jmp:
    case M::je: case M::jne: case M::jl: case M::jge:
    case M::jg: case M::jle: case M::jb: case M::jae:
      return std::nullopt;
    default: break;
  }
  bool dst_mem = !ins.operands.empty() && ins.operands[0].kind == isa::Operand::Kind::mem;
  bool src_mem = false;
  for (size_t k = 1; k < ins.operands.size(); ++k)
    if (ins.operands[k].kind == isa::Operand::Kind::mem) src_mem = true;
  switch (ins.mnemonic) {
    case M::mov:
    case M::movsxd:
      if (dst_mem) return MemDir::write;
      if (src_mem) return MemDir::read;
      return std::nullopt;
    case M::cmp:
    case M::test:
      if (dst_mem || src_mem) return MemDir::read;
      return std::nullopt;
    case M::add: case M::sub: case M::xor_: case M::and_: case M::or_:
      if (dst_mem) return MemDir::readwrite;
      if (src_mem) return MemDir::read;
      return std::nullopt;
    case M::inc: case M::dec: case M::neg:
      if (dst_mem) return MemDir::readwrite;
      return std::nullopt;
    default: return std::nullopt;
  }
}

std::vector<Sample> build_function_samples(const isa::Function& fn,
                                           const std::vector<tracer::TraceLog>& traces,
                                           const FunctionLabels& labels, const Vocab& vocab,
                                           const DatasetOptions& opt) {
  std::vector<Sample> out;
  std::set<std::pair<uint64_t, uint64_t>> dep_pairs;
  for (const auto& d : labels.deps) dep_pairs.insert({d.a, d.b});

  for (const auto& log : traces) {
    auto patched = patch_flipped(fn.instructions, log.flipped_sites);
    auto toks = tokenize(patched, vocab);
    auto trace = encode_trace(log, patched, toks);
    auto addr = encode_addresses(patched, toks);

    size_t n_ins = patched.size();
    size_t start_ins = 0;
    int window = 0;
    while (start_ins < n_ins) {
      size_t t0 = toks.ins_first_token[start_ins];
      size_t end_ins = start_ins;
      while (end_ins < n_ins) {
        size_t next_end =
            end_ins + 1 < n_ins ? toks.ins_first_token[end_ins + 1] : toks.code.size();
        if (next_end - t0 > static_cast<size_t>(opt.max_tokens)) break;
        ++end_ins;
      }
      if (end_ins == start_ins) throw std::runtime_error("instruction exceeds window size");
      size_t t1 = end_ins < n_ins ? toks.ins_first_token[end_ins] : toks.code.size();

      Sample s;
      s.code.assign(toks.code.begin() + static_cast<long>(t0),
                    toks.code.begin() + static_cast<long>(t1));
      s.trace.assign(trace.begin() + static_cast<long>(t0),
                     trace.begin() + static_cast<long>(t1));
      s.addr.assign(addr.begin() + static_cast<long>(t0),
                    addr.begin() + static_cast<long>(t1));
      s.trace_masked.assign(s.code.size(), 0);
      s.func = fn.name;
      s.run = log.run;
      s.window = window++;

      std::vector<std::pair<uint64_t, int>> mem_ins;  // (address, mnemonic pos)
      for (size_t k = start_ins; k < end_ins; ++k) {
        int pos = static_cast<int>(toks.ins_first_token[k] - t0);
        uint64_t a = patched[k].address;
        if (auto dir = static_mem_dir(patched[k])) {
          s.mems.push_back({pos, *dir});
          mem_ins.push_back({a, pos});
        }
        auto rit = labels.regions.find(a);
        if (rit != labels.regions.end())
          s.regions.push_back({pos, static_cast<int>(rit->second)});
        if (patched[k].mnemonic == isa::Mnemonic::call) {
          auto sit = labels.site_sigs.find(a);
          if (sit != labels.site_sigs.end()) s.sites.push_back({pos, sit->second});
        }
      }
      for (size_t x = 0; x < mem_ins.size(); ++x)
        for (size_t y = x + 1; y < mem_ins.size(); ++y) {
          uint64_t a = std::min(mem_ins[x].first, mem_ins[y].first);
          uint64_t b = std::max(mem_ins[x].first, mem_ins[y].first);
          if (dep_pairs.count({a, b}))
            s.deps.push_back({mem_ins[x].second, mem_ins[y].second, 1});
        }
      if (s.window == 0) s.sig = labels.sig;

      out.push_back(std::move(s));

      if (end_ins >= n_ins) break;
      size_t target = t0 + static_cast<size_t>(opt.stride);
      size_t next_start = start_ins + 1;
      while (next_start < n_ins && toks.ins_first_token[next_start] < target) ++next_start;
      if (next_start >= n_ins) break;
      start_ins = next_start;
    }
  }
  return out;
}

std::vector<CandidatePair> candidate_pairs(const Sample& s) {
  auto writes = [](MemDir d) { return d != MemDir::read; };
  std::vector<CandidatePair> out;
  for (size_t x = 0; x < s.mems.size(); ++x)
    for (size_t y = x + 1; y < s.mems.size(); ++y) {
      const auto& [pi, di] = s.mems[x];
      const auto& [pj, dj] = s.mems[y];
      if (!writes(di) && !writes(dj)) continue;
      tracer::DepKind kind = tracer::DepKind::WAW;
      if (writes(di) && !writes(dj)) kind = tracer::DepKind::RAW;
      else if (!writes(di) && writes(dj)) kind = tracer::DepKind::WAR;
      out.push_back({pi, pj, kind});
    }
  return out;
}

// ---- serialization ---------------------------------------------------------

namespace {

void append_csv(std::string& out, const std::string& item, bool first) {
  if (!first) out += ',';
  out += item;
}

std::string format_sample(const Sample& s) {
  std::string line;
  line += "tokens=";
  for (size_t i = 0; i < s.code.size(); ++i) append_csv(line, std::to_string(s.code[i].c), i == 0);
  line += "\tpositions=";
  for (size_t i = 0; i < s.code.size(); ++i) append_csv(line, std::to_string(s.code[i].p), i == 0);
  line += "\tmemflags=";
  for (size_t i = 0; i < s.code.size(); ++i) append_csv(line, s.code[i].m ? "1" : "0", i == 0);
  line += "\ttrace=";
  for (size_t i = 0; i < s.trace.size(); ++i)
    for (size_t j = 0; j < 8; ++j)
      append_csv(line,
                 s.trace[i][j] == kDummyByte ? std::string("d") : std::to_string(s.trace[i][j]),
                 i == 0 && j == 0);
  line += "\taddr=";
  for (size_t i = 0; i < s.addr.size(); ++i)
    for (size_t j = 0; j < 8; ++j)
      append_csv(line, std::to_string(s.addr[i][j]), i == 0 && j == 0);
  line += "\tlabels=";
  std::vector<std::string> entries;
  entries.push_back("func:" + s.func);
  entries.push_back("run:" + std::to_string(s.run));
  entries.push_back("win:" + std::to_string(s.window));
  for (const auto& [pos, dir] : s.mems)
    entries.push_back("mem:" + std::to_string(pos) + ":" + mem_dir_name(dir));
  for (const auto& d : s.deps)
    entries.push_back("dep:" + std::to_string(d.i) + ":" + std::to_string(d.j) + ":" +
                      std::to_string(d.bit));
  for (const auto& [pos, cls] : s.regions)
    entries.push_back("region:" + std::to_string(pos) + ":" + std::to_string(cls));
  if (s.sig) {
    entries.push_back("sig:" + std::to_string(s.sig->arity) + ":" + std::to_string(s.sig->args[0]) +
                      ":" + std::to_string(s.sig->args[1]) + ":" + std::to_string(s.sig->args[2]) +
                      ":" + std::to_string(s.sig->ret));
  }
  for (const auto& [pos, sig] : s.sites) {
    entries.push_back("site:" + std::to_string(pos) + ":" + std::to_string(sig.arity) + ":" +
                      std::to_string(sig.args[0]) + ":" + std::to_string(sig.args[1]) + ":" +
                      std::to_string(sig.args[2]) + ":" + std::to_string(sig.ret));
  }
  for (size_t i = 0; i < entries.size(); ++i) append_csv(line, entries[i], i == 0);
  return line;
}

Sample parse_sample(std::string_view line, int lineno) {
  auto bad = [&](const std::string& msg) {
    return std::runtime_error("sample line " + std::to_string(lineno) + ": " + msg);
  };
  auto fields = split(line, '\t');
  if (fields.size() != 6) throw bad("expected 6 fields");
  auto field = [&](size_t k, std::string_view name) -> std::string_view {
    std::string_view f = fields[k];
    if (!starts_with(f, name) || f.size() < name.size() + 1 || f[name.size()] != '=')
      throw bad("field " + std::to_string(k) + " is not " + std::string(name));
    return f.substr(name.size() + 1);
  };

  Sample s;
  auto toks = split(field(0, "tokens"), ',');
  auto poss = split(field(1, "positions"), ',');
  auto flags = split(field(2, "memflags"), ',');
  if (toks.size() != poss.size() || toks.size() != flags.size()) throw bad("length mismatch");
  size_t n = toks.empty() || toks[0].empty() ? 0 : toks.size();
  for (size_t i = 0; i < n; ++i) {
    CodeTok t;
    t.c = static_cast<int>(parse_int(toks[i]));
    t.p = static_cast<int>(parse_int(poss[i]));
    if (flags[i] == "1") t.m = true;
    else if (flags[i] != "0") throw bad("bad memflag");
    s.code.push_back(t);
  }

  auto parse_bytes = [&](std::string_view text, bool allow_dummy) {
    std::vector<Bytes8> out;
    auto vals = split(text, ',');
    size_t count = vals.empty() || vals[0].empty() ? 0 : vals.size();
    if (count != 8 * n) throw bad("byte channel length mismatch");
    for (size_t i = 0; i < n; ++i) {
      Bytes8 b;
      for (size_t j = 0; j < 8; ++j) {
        const auto& v = vals[i * 8 + j];
        if (v == "d") {
          if (!allow_dummy) throw bad("dummy byte in address channel");
          b[j] = kDummyByte;
        } else {
          b[j] = static_cast<int>(parse_int(v));
          if (b[j] < 0 || b[j] > kSentinelByte) throw bad("byte out of range");
        }
      }
      bool any_dummy = false, all_dummy = true;
      for (size_t j = 0; j < 8; ++j) {
        if (b[j] == kDummyByte) any_dummy = true;
        else all_dummy = false;
      }
      if (any_dummy && !all_dummy) throw bad("partial dummy position");
      out.push_back(b);
    }
    return out;
  };
  s.trace = parse_bytes(field(3, "trace"), true);
  s.addr = parse_bytes(field(4, "addr"), false);
  s.trace_masked.assign(n, 0);

  for (const auto& entry : split(field(5, "labels"), ';')) {
    if (entry.empty()) continue;
    auto parts = split(entry, ':');
    const auto& tag = parts[0];
    if (tag == "func" && parts.size() == 2) s.func = parts[1];
    else if (tag == "run" && parts.size() == 2) s.run = static_cast<int>(parse_int(parts[1]));
    else if (tag == "win" && parts.size() == 2) s.window = static_cast<int>(parse_int(parts[1]));
    else if (tag == "mem" && parts.size() == 3) {
      auto dir = mem_dir_from_name(parts[2]);
      if (!dir) throw bad("bad mem direction");
      s.mems.push_back({static_cast<int>(parse_int(parts[1])), *dir});
    } else if (tag == "dep" && parts.size() == 4) {
      s.deps.push_back({static_cast<int>(parse_int(parts[1])),
                        static_cast<int>(parse_int(parts[2])),
                        static_cast<int>(parse_int(parts[3]))});
    } else if (tag == "region" && parts.size() == 3) {
      s.regions.push_back({static_cast<int>(parse_int(parts[1])),
                           static_cast<int>(parse_int(parts[2]))});
    } else if (tag == "sig" && parts.size() == 6) {
      SigLabel sig;
      sig.arity = static_cast<int>(parse_int(parts[1]));
      for (int k = 0; k < 3; ++k) sig.args[k] = static_cast<int>(parse_int(parts[2 + k]));
      sig.ret = static_cast<int>(parse_int(parts[5]));
      s.sig = sig;
    } else if (tag == "site" && parts.size() == 7) {
      SigLabel sig;
      sig.arity = static_cast<int>(parse_int(parts[2]));
      for (int k = 0; k < 3; ++k) sig.args[k] = static_cast<int>(parse_int(parts[3 + k]));
      sig.ret = static_cast<int>(parse_int(parts[6]));
      s.sites.push_back({static_cast<int>(parse_int(parts[1])), sig});
    } else {
      throw bad("bad label entry: " + entry);
    }
  }
  return s;
}

}  // namespace

std::string format_samples(const std::vector<Sample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += format_sample(s);
    out += '\n';
  }
  return out;
}

std::vector<Sample> parse_samples(std::string_view text) {
  std::vector<Sample> out;
  int lineno = 0;
  for (const auto& raw : split(text, '\n')) {
    ++lineno;
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    out.push_back(parse_sample(raw, lineno));
  }
  return out;
}

void write_samples_file(const std::string& path, const std::vector<Sample>& samples) {
  write_file(path, format_samples(samples));
}

std::vector<Sample> read_samples_file(const std::string& path) {
  return parse_samples(read_file(path));
}

}  // namespace memdep::enc
