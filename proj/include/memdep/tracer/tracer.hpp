#pragma once

#include "memdep/isa/isa.hpp"
#include "memdep/util/rng.hpp"

#include <map>
#include <set>
#include <vector>

namespace memdep::tracer {

enum class Region : uint8_t { stack, heap, global, other };
const char* region_name(Region r);
std::optional<Region> region_from_name(std::string_view s);

struct RegionMap {
  uint64_t stack_lo = 0, stack_hi = 0;  // [lo, hi]
  uint64_t heap_lo = 0, heap_hi = 0;    // [lo, hi)
  uint64_t global_lo = 0, global_hi = 0;
  Region classify(uint64_t addr) const;
};

struct TracerOptions {
  uint64_t stack_base = 0x7fff0000;
  uint64_t heap_base = 0x20000000;
  uint64_t heap_stride = 0x40;
  uint64_t heap_span = 0x100000;
  int stack_random_slots = 64;  // 8-byte slots below rsp seeded with random bytes
  int step_budget = 4096;
  int max_runs = 32;
  uint64_t reg_bound = 1ull << 16;  // registers drawn uniformly from [0, reg_bound)
};

// Copy-restore execution context: machine state plus the heap allocator cursor.
struct Snapshot {
  isa::MachineState state;
  uint64_t heap_cursor = 0;
};

struct CoverageSet {
  std::set<uint64_t> blocks;  // observed basic-block entry addresses
  bool contains(uint64_t a) const { return blocks.count(a) != 0; }
  // Returns true when newly added.
  bool add(uint64_t a) { return blocks.insert(a).second; }
};

struct TraceLog {
  std::string function;
  int run = 0;
  uint64_t seed = 0;
  std::vector<isa::EffectRecord> records;
  std::set<uint64_t> flipped_sites;
  bool aborted = false;            // jumped outside the function's code
  bool budget_exhausted = false;   // hit the per-run step budget
};

enum class DepKind : uint8_t { RAW, WAR, WAW };
const char* dep_kind_name(DepKind k);
std::optional<DepKind> dep_kind_from_name(std::string_view s);

struct DependencyRecord {
  uint64_t a = 0, b = 0;  // unordered pair, normalized a < b
  DepKind kind = DepKind::RAW;
  uint64_t witness_lo = 0, witness_hi = 0;  // overlapping byte range [lo, hi)

  // Pair identity ignores the witness annotation.
  bool same_pair(const DependencyRecord& o) const { return a == o.a && b == o.b; }
  bool operator==(const DependencyRecord& o) const { return a == o.a && b == o.b && kind == o.kind; }
  bool operator<(const DependencyRecord& o) const {
    if (a != o.a) return a < o.a;
    if (b != o.b) return b < o.b;
    return kind < o.kind;
  }
};

// Basic blocks: leaders are the entry, jump targets, and jump fall-throughs.
struct BasicBlocks {
  std::vector<uint64_t> leaders;  // sorted
  // Entry address of the block containing addr (addresses within the function).
  uint64_t block_of(uint64_t addr) const;
};
BasicBlocks compute_blocks(const isa::Function& f);

class TraceEnv {
 public:
  TraceEnv(const isa::Program& program, TracerOptions opt = {});

  const isa::Program& program() const { return *program_; }
  const TracerOptions& options() const { return opt_; }
  const RegionMap& regions() const { return regions_; }

  // Fresh randomized snapshot for one run of f: registers uniform in
  // [0, reg_bound), rsp at stack_base, slots below rsp seeded with random
  // bytes, globals zeroed, rip at the entry.
  Snapshot initialize_environment(const isa::Function& f, uint64_t run_seed) const;

  // One forced-execution run. Flips a conditional branch when its current
  // target block is covered and the alternate is not; coverage accumulates
  // every block entry observed, including mid-run.
  TraceLog force_execute(const isa::Function& f, CoverageSet& coverage, uint64_t run_seed) const;

  // Runs force_execute with per-run seeds derived from base_seed until
  // coverage stops growing or the run cap is reached.
  std::vector<TraceLog> trace_function_to_fixpoint(const isa::Function& f, CoverageSet& coverage,
                                                   uint64_t base_seed) const;

 private:
  const isa::Program* program_;
  TracerOptions opt_;
  RegionMap regions_;
};

// All pairs of distinct instructions whose accessed byte ranges overlap within
// at least one trace with one side writing. Kind comes from the first
// witnessing access pair in trace order.
std::vector<DependencyRecord> extract_dependencies(const std::vector<TraceLog>& traces);

// First observed access region per instruction address.
std::map<uint64_t, Region> region_labels(const std::vector<TraceLog>& traces, const RegionMap& rm);

// ---- text formats ----------------------------------------------------------

std::string format_traces(const std::vector<TraceLog>& traces);
std::vector<TraceLog> parse_traces(std::string_view text);

std::string format_dependencies(const std::vector<DependencyRecord>& deps);
std::vector<DependencyRecord> parse_dependencies(std::string_view text);

std::string format_regions(const std::map<uint64_t, Region>& labels);
std::map<uint64_t, Region> parse_regions(std::string_view text);

}  // namespace memdep::tracer
