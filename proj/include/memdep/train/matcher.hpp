#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "memdep/enc/encoding.hpp"

namespace memdep::train {

enum class ArityMode { loose, strict };

// One composition of the signature-compatibility criteria. The arity check is
// always on; argument-type and return checks are opt-in, and the result is
// the conjunction of the enabled checks.
struct MatchPolicy {
  ArityMode arity = ArityMode::loose;
  bool use_args = false;
  bool use_return = false;
  int args_required = 3;  // agreeing positions needed when use_args (2 or 3)

  std::string name() const;  // e.g. "strict+arg3+ret"
};

// The 8 compositions: {loose, strict} x {arity, +ret, +arg, +arg+ret}.
std::vector<MatchPolicy> policy_grid(int args_required = 3);

// Compatibility of a callee's signature with the signature prepared at a call
// site. Loose arity: caller.arity >= callee.arity; strict: equal. Argument
// check: over the first min(3, both arities) positions, at least
// min(args_required, positions) type classes must agree; an absent slot where
// the arity promises one fails the check. Return check: a caller expecting a
// value requires a non-void callee.
bool match_signature(const enc::SigLabel& caller, const enc::SigLabel& callee,
                     const MatchPolicy& policy);

// Candidate callees per call site: every function whose signature matches the
// site's prepared signature. Pure; safe to run concurrently.
std::map<uint64_t, std::vector<std::string>> match_sites(
    const std::map<uint64_t, enc::SigLabel>& site_sigs,
    const std::map<std::string, enc::SigLabel>& func_sigs, const MatchPolicy& policy);

// ---- text formats ----------------------------------------------------------

// `<func> <arity> <t1> <t2> <t3> <ret>` lines; absent argument slots are -1.
std::string format_signatures(const std::map<std::string, enc::SigLabel>& sigs);
std::map<std::string, enc::SigLabel> parse_signatures(std::string_view text);

struct IndirectCall {
  std::string caller;
  uint64_t site = 0;
  std::string callee;
};

// `icall <caller> <site-hex> <callee>` edges plus
// `sitesig <site-hex> <arity> <t1> <t2> <t3> <ret>` prepared signatures.
struct CallGraph {
  std::vector<IndirectCall> calls;
  std::map<uint64_t, enc::SigLabel> site_sigs;
};

std::string format_call_graph(const CallGraph& g);
CallGraph parse_call_graph(std::string_view text);

}  // namespace memdep::train
