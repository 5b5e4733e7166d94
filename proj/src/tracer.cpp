#include "memdep/tracer/tracer.hpp"

#include <algorithm>

namespace memdep::tracer {

const char* region_name(Region r) {
  switch (r) {
    case Region::stack: return "stack";
    case Region::heap: return "heap";
    case Region::global: return "global";
    case Region::other: return "other";
  }
  return "other";
}

std::optional<Region> region_from_name(std::string_view s) {
  if (s == "stack") return Region::stack;
  if (s == "heap") return Region::heap;
  if (s == "global") return Region::global;
  if (s == "other") return Region::other;
  return std::nullopt;
}

const char* dep_kind_name(DepKind k) {
  switch (k) {
    case DepKind::RAW: return "RAW";
    case DepKind::WAR: return "WAR";
    case DepKind::WAW: return "WAW";
  }
  return "RAW";
}

std::optional<DepKind> dep_kind_from_name(std::string_view s) {
  if (s == "RAW") return DepKind::RAW;
  if (s == "WAR") return DepKind::WAR;
  if (s == "WAW") return DepKind::WAW;
  return std::nullopt;
}

Region RegionMap::classify(uint64_t addr) const {
  if (addr >= stack_lo && addr <= stack_hi) return Region::stack;
  if (addr >= heap_lo && addr < heap_hi) return Region::heap;
  if (addr >= global_lo && addr < global_hi) return Region::global;
  return Region::other;
}

uint64_t BasicBlocks::block_of(uint64_t addr) const {
  auto it = std::upper_bound(leaders.begin(), leaders.end(), addr);
  if (it == leaders.begin()) return addr;  // before the entry: degenerate
  return *(it - 1);
}

BasicBlocks compute_blocks(const isa::Function& f) {
  std::set<uint64_t> leaders;
  if (!f.instructions.empty()) leaders.insert(f.instructions.front().address);
  for (size_t i = 0; i < f.instructions.size(); ++i) {
    const auto& ins = f.instructions[i];
    if (isa::is_jump(ins.mnemonic)) {
      leaders.insert(static_cast<uint64_t>(ins.operands[0].imm));
      if (i + 1 < f.instructions.size()) leaders.insert(f.instructions[i + 1].address);
    }
  }
  BasicBlocks bb;
  bb.leaders.assign(leaders.begin(), leaders.end());
  return bb;
}

TraceEnv::TraceEnv(const isa::Program& program, TracerOptions opt)
    : program_(&program), opt_(opt) {
  regions_.stack_hi = opt_.stack_base;
  regions_.stack_lo = opt_.stack_base - (64ull << 10);
  regions_.heap_lo = opt_.heap_base;
  regions_.heap_hi = opt_.heap_base + opt_.heap_span;
  if (program.data) {
    regions_.global_lo = program.data->base;
    regions_.global_hi = program.data->base + program.data->size;
  }
}

Snapshot TraceEnv::initialize_environment(const isa::Function& f, uint64_t run_seed) const {
  Rng rng(run_seed);
  Snapshot snap;
  auto& st = snap.state;
  for (int i = 0; i < isa::kRegCount; ++i)
    st.regs[static_cast<size_t>(i)] = rng.below(opt_.reg_bound);
  st.write_reg(isa::Reg::rsp, opt_.stack_base);
  for (int s = 0; s < opt_.stack_random_slots; ++s) {
    uint64_t addr = opt_.stack_base - 8ull * (s + 1);
    for (int b = 0; b < 8; ++b)
      st.mem[addr + static_cast<uint64_t>(b)] = static_cast<uint8_t>(rng.below(256));
  }
  // Globals are zeroed; the sparse map's default already reads as zero, so the
  // declared range needs no explicit fill.
  st.write_reg(isa::Reg::rip, f.entry);
  snap.heap_cursor = 0;
  return snap;
}

namespace {

// Stub and unknown-call summaries. Stub calls transfer no control and touch no
// stack; unknown targets produce a deterministic result keyed on the site.
void apply_call_summary(const isa::Instruction& ins, const isa::StubDecl* stub,
                        Snapshot& snap, const TracerOptions& opt, isa::EffectRecord& rec) {
  auto& st = snap.state;
  uint64_t result;
  if (stub && stub->kind == "malloc") {
    result = opt.heap_base + snap.heap_cursor * opt.heap_stride;
    snap.heap_cursor += 1;
  } else if (stub && stub->kind == "write8") {
    uint64_t dst = st.read_reg(isa::Reg::rdi);
    uint64_t val = st.read_reg(isa::Reg::rsi);
    st.store(dst, 8, val);
    rec.mem.push_back({dst, 8, true, val});
    result = dst;
  } else if (stub) {  // ret0
    result = 0;
  } else {
    result = 0xd00d0000ull | (ins.address & 0xffff);
  }
  st.write_reg(isa::Reg::rax, result);
  rec.reg_writes.push_back({isa::Reg::rax, result});
}

}  // namespace

TraceLog TraceEnv::force_execute(const isa::Function& f, CoverageSet& coverage,
                                 uint64_t run_seed) const {
  TraceLog log;
  log.function = f.name;
  log.seed = run_seed;

  BasicBlocks blocks = compute_blocks(f);
  uint64_t fn_lo = f.instructions.front().address;
  uint64_t fn_hi = f.instructions.back().address;

  Snapshot snap = initialize_environment(f, run_seed);
  auto& st = snap.state;
  coverage.add(blocks.block_of(f.entry));

  int depth = 0;
  for (int steps = 0; steps < opt_.step_budget; ++steps) {
    uint64_t pc = st.rip();
    const isa::Instruction* ins = program_->instruction_at(pc);
    if (!ins || pc < fn_lo || pc > fn_hi) {
      // Calls into other local functions execute via step() only in depth>0
      // mode, which stub summaries make unreachable; any stray transfer is an
      // abort.
      log.aborted = true;
      break;
    }

    if (ins->mnemonic == isa::Mnemonic::call) {
      uint64_t target = ins->operands[0].kind == isa::Operand::Kind::reg
                            ? st.read_reg(ins->operands[0].reg)
                            : static_cast<uint64_t>(ins->operands[0].imm);
      const isa::StubDecl* stub = program_->stub_at(target);
      isa::EffectRecord rec;
      rec.address = ins->address;
      rec.mnemonic = ins->mnemonic;
      // Token values as in a normal step: the call target token.
      if (ins->operands[0].kind == isa::Operand::Kind::reg) {
        rec.token_values.push_back({isa::reg_name(ins->operands[0].reg), target, target});
      } else {
        rec.token_values.push_back({"const", target, target});
      }
      apply_call_summary(*ins, stub, snap, opt_, rec);
      rec.next_rip = ins->address + ins->encoded_length;
      st.write_reg(isa::Reg::rip, rec.next_rip);
      log.records.push_back(std::move(rec));
      continue;
    }

    if (ins->mnemonic == isa::Mnemonic::ret && depth == 0) {
      log.records.push_back(isa::step(st, *ins));
      break;
    }

    bool flip = false;
    if (isa::is_cond_jump(ins->mnemonic)) {
      uint64_t jump_target = static_cast<uint64_t>(ins->operands[0].imm);
      uint64_t fall_through = ins->address + ins->encoded_length;
      bool taken = isa::cond_taken(ins->mnemonic, st.flags);
      uint64_t default_target = blocks.block_of(taken ? jump_target : fall_through);
      uint64_t alternate = blocks.block_of(taken ? fall_through : jump_target);
      if (coverage.contains(default_target) && !coverage.contains(alternate)) flip = true;
    }

    isa::EffectRecord rec;
    if (flip) {
      isa::Instruction inverted = *ins;
      inverted.mnemonic = isa::invert_condition(ins->mnemonic);
      rec = isa::step(st, inverted);
      rec.flipped = true;
      log.flipped_sites.insert(ins->address);
    } else {
      rec = isa::step(st, *ins);
    }
    bool was_jump = isa::is_jump(ins->mnemonic);
    log.records.push_back(std::move(rec));

    if (was_jump) {
      coverage.add(blocks.block_of(st.rip()));
    } else if (const isa::Instruction* nxt = program_->instruction_at(st.rip())) {
      // Falling into a new block (e.g. past a label) also counts as observed.
      uint64_t b = blocks.block_of(nxt->address);
      if (b == nxt->address) coverage.add(b);
    }

    if (steps + 1 == opt_.step_budget) log.budget_exhausted = true;
  }
  return log;
}

std::vector<TraceLog> TraceEnv::trace_function_to_fixpoint(const isa::Function& f,
                                                           CoverageSet& coverage,
                                                           uint64_t base_seed) const {
  BasicBlocks blocks = compute_blocks(f);
  auto fully_covered = [&] {
    for (uint64_t l : blocks.leaders)
      if (!coverage.contains(l)) return false;
    return true;
  };
  std::vector<TraceLog> out;
  for (int run = 0; run < opt_.max_runs; ++run) {
    size_t before = coverage.blocks.size();
    uint64_t run_seed = Rng::stream(base_seed, "trace", static_cast<uint64_t>(run)).next();
    out.push_back(force_execute(f, coverage, run_seed));
    out.back().run = run;
    if (fully_covered()) break;
    if (coverage.blocks.size() == before) break;  // stopped growing
  }
  return out;
}

std::vector<DependencyRecord> extract_dependencies(const std::vector<TraceLog>& traces) {
  struct Access {
    uint64_t start, end;  // [start, end)
    uint64_t instr;
    bool write;
    uint64_t order;
  };
  struct Hit {
    DepKind kind;
    uint64_t wlo, whi;
    uint64_t trace_idx;
    uint64_t prio;  // order of the witness's later access, then its earlier one
    uint64_t prio2;
  };
  std::map<std::pair<uint64_t, uint64_t>, Hit> found;
  for (size_t ti = 0; ti < traces.size(); ++ti) {
    const auto& t = traces[ti];
    std::vector<Access> acc;
    uint64_t order = 0;
    for (const auto& rec : t.records)
      for (const auto& m : rec.mem)
        acc.push_back({m.address, m.address + m.width, rec.address, m.is_write, order++});
    std::vector<const Access*> sorted;
    sorted.reserve(acc.size());
    for (const auto& a : acc) sorted.push_back(&a);
    std::sort(sorted.begin(), sorted.end(), [](const Access* x, const Access* y) {
      if (x->start != y->start) return x->start < y->start;
      return x->order < y->order;
    });
    // Sweep: compare each access against actives whose range still overlaps.
    std::vector<const Access*> active;
    for (const Access* a : sorted) {
      std::vector<const Access*> keep;
      keep.reserve(active.size());
      for (const Access* b : active) {
        if (b->end <= a->start) continue;
        keep.push_back(b);
        if (b->instr == a->instr) continue;
        if (!a->write && !b->write) continue;
        const Access* first = b->order < a->order ? b : a;
        const Access* second = b->order < a->order ? a : b;
        DepKind kind;
        if (first->write && second->write) kind = DepKind::WAW;
        else if (first->write) kind = DepKind::RAW;
        else kind = DepKind::WAR;
        Hit h;
        h.kind = kind;
        h.wlo = std::max(a->start, b->start);
        h.whi = std::min(a->end, b->end);
        h.trace_idx = ti;
        h.prio = second->order;
        h.prio2 = first->order;
        auto key = std::minmax(a->instr, b->instr);
        auto [it, inserted] = found.try_emplace({key.first, key.second}, h);
        if (!inserted) {
          // Keep the first witness in (trace, execution) order.
          Hit& cur = it->second;
          if (std::tie(h.trace_idx, h.prio, h.prio2) < std::tie(cur.trace_idx, cur.prio, cur.prio2))
            cur = h;
        }
      }
      keep.push_back(a);
      active.swap(keep);
    }
  }
  std::vector<DependencyRecord> out;
  out.reserve(found.size());
  for (const auto& [pair, hit] : found)
    out.push_back({pair.first, pair.second, hit.kind, hit.wlo, hit.whi});
  return out;
}

std::map<uint64_t, Region> region_labels(const std::vector<TraceLog>& traces, const RegionMap& rm) {
  std::map<uint64_t, Region> out;
  for (const auto& t : traces)
    for (const auto& rec : t.records)
      for (const auto& m : rec.mem)
        out.emplace(rec.address, rm.classify(m.address));
  return out;
}

}  // namespace memdep::tracer
