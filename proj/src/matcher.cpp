#include "memdep/train/matcher.hpp"

#include <algorithm>
#include <stdexcept>

#include "memdep/util/common.hpp"

namespace memdep::train {

namespace {
constexpr int kRetVoid = 7;
}

std::string MatchPolicy::name() const {
  std::string s = arity == ArityMode::strict ? "strict" : "loose";
  if (use_args) s += "+arg" + std::to_string(args_required);
  if (use_return) s += "+ret";
  return s;
}

std::vector<MatchPolicy> policy_grid(int args_required) {
  std::vector<MatchPolicy> grid;
  for (ArityMode mode : {ArityMode::loose, ArityMode::strict})
    for (auto [args, ret] : {std::pair{false, false}, {false, true}, {true, false}, {true, true}}) {
      MatchPolicy p;
      p.arity = mode;
      p.use_args = args;
      p.use_return = ret;
      p.args_required = args_required;
      grid.push_back(p);
    }
  return grid;
}

bool match_signature(const enc::SigLabel& caller, const enc::SigLabel& callee,
                     const MatchPolicy& policy) {
  bool ok = policy.arity == ArityMode::strict ? caller.arity == callee.arity
                                              : caller.arity >= callee.arity;
  if (ok && policy.use_args) {
    int present = std::min({3, caller.arity, callee.arity});
    int agree = 0;
    for (int k = 0; k < present; ++k) {
      if (caller.args[k] < 0 || callee.args[k] < 0) return false;
      if (caller.args[k] == callee.args[k]) ++agree;
    }
    ok = agree >= std::min(policy.args_required, present);
  }
  if (ok && policy.use_return) ok = caller.ret == kRetVoid || callee.ret != kRetVoid;
  return ok;
}

std::map<uint64_t, std::vector<std::string>> match_sites(
    const std::map<uint64_t, enc::SigLabel>& site_sigs,
    const std::map<std::string, enc::SigLabel>& func_sigs, const MatchPolicy& policy) {
  std::map<uint64_t, std::vector<std::string>> out;
  for (const auto& [site, caller_sig] : site_sigs) {
    auto& candidates = out[site];
    for (const auto& [fn, callee_sig] : func_sigs)
      if (match_signature(caller_sig, callee_sig, policy)) candidates.push_back(fn);
  }
  return out;
}

// ---- text formats ----------------------------------------------------------

namespace {

std::string sig_fields(const enc::SigLabel& s) {
  return std::to_string(s.arity) + " " + std::to_string(s.args[0]) + " " +
         std::to_string(s.args[1]) + " " + std::to_string(s.args[2]) + " " +
         std::to_string(s.ret);
}

enc::SigLabel sig_from_fields(const std::vector<std::string>& f, size_t off, int lineno) {
  enc::SigLabel s;
  s.arity = static_cast<int>(parse_int(f[off]));
  for (int k = 0; k < 3; ++k) s.args[k] = static_cast<int>(parse_int(f[off + 1 + static_cast<size_t>(k)]));
  s.ret = static_cast<int>(parse_int(f[off + 4]));
  if (s.arity < 0 || s.arity > 7 || s.ret < 0 || s.ret > 7)
    throw std::runtime_error("signature line " + std::to_string(lineno) + ": field out of range");
  return s;
}

}  // namespace

std::string format_signatures(const std::map<std::string, enc::SigLabel>& sigs) {
  std::string out;
  for (const auto& [fn, sig] : sigs) {
    out += fn;
    out += ' ';
    out += sig_fields(sig);
    out += '\n';
  }
  return out;
}

std::map<std::string, enc::SigLabel> parse_signatures(std::string_view text) {
  std::map<std::string, enc::SigLabel> out;
  int lineno = 0;
  for (const auto& raw : split(text, '\n')) {
    ++lineno;
    auto line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, ' ');
    f.erase(std::remove(f.begin(), f.end(), std::string()), f.end());
    if (f.size() != 6)
      throw std::runtime_error("signature line " + std::to_string(lineno) + ": expected 6 fields");
    out[f[0]] = sig_from_fields(f, 1, lineno);
  }
  return out;
}

std::string format_call_graph(const CallGraph& g) {
  std::string out;
  for (const auto& c : g.calls) {
    out += "icall ";
    out += c.caller;
    out += ' ';
    out += hex_u64(c.site);
    out += ' ';
    out += c.callee;
    out += '\n';
  }
  for (const auto& [site, sig] : g.site_sigs) {
    out += "sitesig ";
    out += hex_u64(site);
    out += ' ';
    out += sig_fields(sig);
    out += '\n';
  }
  return out;
}

CallGraph parse_call_graph(std::string_view text) {
  CallGraph g;
  int lineno = 0;
  for (const auto& raw : split(text, '\n')) {
    ++lineno;
    auto line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, ' ');
    f.erase(std::remove(f.begin(), f.end(), std::string()), f.end());
    auto bad = [&](const std::string& msg) {
      return std::runtime_error("call graph line " + std::to_string(lineno) + ": " + msg);
    };
    if (f[0] == "icall") {
      if (f.size() != 4) throw bad("expected icall <caller> <site> <callee>");
      g.calls.push_back({f[1], parse_hex(f[2]), f[3]});
    } else if (f[0] == "sitesig") {
      if (f.size() != 7) throw bad("expected sitesig <site> and 5 signature fields");
      g.site_sigs[parse_hex(f[1])] = sig_from_fields(f, 2, lineno);
    } else {
      throw bad("unknown record " + f[0]);
    }
  }
  return g;
}

}  // namespace memdep::train
