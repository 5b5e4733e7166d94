#include "memdep/isa/isa.hpp"

namespace memdep::isa {

uint64_t MachineState::load(uint64_t addr, unsigned width) const {
  uint64_t v = 0;
  for (unsigned i = 0; i < width; ++i) {
    auto it = mem.find(addr + i);
    uint64_t byte = it == mem.end() ? 0 : it->second;
    v |= byte << (8 * i);
  }
  return v;
}

void MachineState::store(uint64_t addr, unsigned width, uint64_t value) {
  for (unsigned i = 0; i < width; ++i)
    mem[addr + i] = static_cast<uint8_t>((value >> (8 * i)) & 0xff);
}

bool MachineState::operator==(const MachineState& other) const {
  if (regs != other.regs || !(flags == other.flags)) return false;
  // Sparse maps compare as functions: absent entries equal zero bytes.
  auto covered = [](const MachineState& a, const MachineState& b) {
    for (const auto& [addr, byte] : a.mem) {
      auto it = b.mem.find(addr);
      uint8_t o = it == b.mem.end() ? 0 : it->second;
      if (byte != o) return false;
    }
    return true;
  };
  return covered(*this, other) && covered(other, *this);
}

bool EffectRecord::writes_memory() const {
  for (const auto& a : mem)
    if (a.is_write) return true;
  return false;
}

namespace {

struct FlagResult {
  Flags flags;
  bool written = false;
};

uint64_t sign_bit(uint64_t v) { return v >> 63; }

Flags flags_add(uint64_t a, uint64_t b, uint64_t r) {
  Flags f;
  f.zf = r == 0;
  f.sf = sign_bit(r) != 0;
  f.cf = r < a;
  f.of = ((~(a ^ b)) & (a ^ r)) >> 63;
  return f;
}

Flags flags_sub(uint64_t a, uint64_t b, uint64_t r) {
  Flags f;
  f.zf = r == 0;
  f.sf = sign_bit(r) != 0;
  f.cf = a < b;
  f.of = ((a ^ b) & (a ^ r)) >> 63;
  return f;
}

Flags flags_logic(uint64_t r) {
  Flags f;
  f.zf = r == 0;
  f.sf = sign_bit(r) != 0;
  f.cf = false;
  f.of = false;
  return f;
}

}  // namespace

bool reads_memory(const Instruction& ins) {
  switch (ins.mnemonic) {
    case Mnemonic::pop:
    case Mnemonic::ret:
      return true;
    case Mnemonic::lea:
    case Mnemonic::nop:
    case Mnemonic::push:
    case Mnemonic::call:
    case Mnemonic::jmp:
      return false;
    default:
      break;
  }
  if (is_cond_jump(ins.mnemonic)) return false;
  // Destination memory reads on read-modify-write forms.
  if (!ins.operands.empty() && ins.operands[0].kind == Operand::Kind::mem) {
    switch (ins.mnemonic) {
      case Mnemonic::mov:
        break;  // pure store
      default:
        return true;  // add/sub/xor/and/or/cmp/test/inc/dec/neg read the cell
    }
  }
  for (size_t i = ins.mnemonic == Mnemonic::mov ? 1 : 0; i < ins.operands.size(); ++i)
    if (ins.operands[i].kind == Operand::Kind::mem) return true;
  return false;
}

bool writes_memory(const Instruction& ins) {
  switch (ins.mnemonic) {
    case Mnemonic::push:
    case Mnemonic::call:
      return true;
    case Mnemonic::pop:
    case Mnemonic::ret:
    case Mnemonic::lea:
    case Mnemonic::nop:
    case Mnemonic::jmp:
    case Mnemonic::cmp:
    case Mnemonic::test:
      return false;
    default:
      break;
  }
  if (is_cond_jump(ins.mnemonic)) return false;
  return !ins.operands.empty() && ins.operands[0].kind == Operand::Kind::mem;
}

EffectRecord step(MachineState& state, const Instruction& ins) {
  EffectRecord rec;
  rec.address = ins.address;
  rec.mnemonic = ins.mnemonic;
  uint64_t next = ins.address + ins.encoded_length;

  // Effective address of a memory operand; rip-relative resolves against the
  // next instruction's address.
  auto effective = [&](const MemRef& m) -> uint64_t {
    uint64_t a = 0;
    if (m.rip_relative) a = next;
    if (m.base) a += state.read_reg(*m.base);
    if (m.index) a += state.read_reg(*m.index);
    return a + static_cast<uint64_t>(m.disp);
  };

  // Pre-instruction token values in token order. rip tokens snapshot the
  // current instruction address.
  auto record_tokens = [&](const Instruction& i) {
    for (const auto& op : i.operands) {
      switch (op.kind) {
        case Operand::Kind::reg:
          rec.token_values.push_back({reg_name(op.reg), state.read_reg(op.reg), state.read_reg(op.reg)});
          break;
        case Operand::Kind::imm:
          rec.token_values.push_back({"const", static_cast<uint64_t>(op.imm), static_cast<uint64_t>(op.imm)});
          break;
        case Operand::Kind::mem:
          if (op.mem.rip_relative)
            rec.token_values.push_back({"rip", ins.address, ins.address});
          if (op.mem.base) {
            Reg r = *op.mem.base;
            rec.token_values.push_back({reg_name(r), state.read_reg(r), state.read_reg(r)});
          }
          if (op.mem.index) {
            Reg r = *op.mem.index;
            rec.token_values.push_back({reg_name(r), state.read_reg(r), state.read_reg(r)});
          }
          break;
      }
    }
  };
  record_tokens(ins);

  auto token_out = [&](size_t operand_token_index, uint64_t value) {
    // Updates the out value of the token that corresponds to a standalone
    // register operand. Token entries map 1:1 to value-bearing tokens; for the
    // operand forms we support, operand 0 of a register destination is always
    // the first token entry.
    rec.token_values[operand_token_index].out = value;
  };

  auto read_operand = [&](const Operand& op, uint64_t* mem_addr) -> uint64_t {
    switch (op.kind) {
      case Operand::Kind::reg:
        return state.read_reg(op.reg);
      case Operand::Kind::imm:
        return static_cast<uint64_t>(op.imm);
      case Operand::Kind::mem: {
        uint64_t a = effective(op.mem);
        if (mem_addr) *mem_addr = a;
        uint64_t v = state.load(a, 8);
        rec.mem.push_back({a, 8, false, v});
        return v;
      }
    }
    return 0;
  };

  auto write_operand = [&](const Operand& op, uint64_t value, size_t token_index) {
    switch (op.kind) {
      case Operand::Kind::reg:
        state.write_reg(op.reg, value);
        rec.reg_writes.push_back({op.reg, value});
        token_out(token_index, value);
        break;
      case Operand::Kind::mem: {
        uint64_t a = effective(op.mem);
        state.store(a, 8, value);
        rec.mem.push_back({a, 8, true, value});
        break;
      }
      case Operand::Kind::imm:
        throw std::logic_error("immediate destination");
    }
  };

  auto set_flags = [&](const Flags& f) {
    state.flags = f;
    rec.flags_written = true;
  };

  auto push_value = [&](uint64_t v) {
    uint64_t sp = state.read_reg(Reg::rsp) - 8;
    state.write_reg(Reg::rsp, sp);
    state.store(sp, 8, v);
    rec.reg_writes.push_back({Reg::rsp, sp});
    rec.mem.push_back({sp, 8, true, v});
  };

  auto pop_value = [&]() -> uint64_t {
    uint64_t sp = state.read_reg(Reg::rsp);
    uint64_t v = state.load(sp, 8);
    rec.mem.push_back({sp, 8, false, v});
    state.write_reg(Reg::rsp, sp + 8);
    rec.reg_writes.push_back({Reg::rsp, sp + 8});
    return v;
  };

  switch (ins.mnemonic) {
    case Mnemonic::nop:
      break;
    case Mnemonic::mov: {
      uint64_t v = read_operand(ins.operands[1], nullptr);
      write_operand(ins.operands[0], v, 0);
      break;
    }
    case Mnemonic::movsxd: {
      uint64_t v = read_operand(ins.operands[1], nullptr);
      uint64_t r = static_cast<uint64_t>(static_cast<int64_t>(static_cast<int32_t>(v & 0xffffffffull)));
      write_operand(ins.operands[0], r, 0);
      break;
    }
    case Mnemonic::lea: {
      uint64_t a = effective(ins.operands[1].mem);
      write_operand(ins.operands[0], a, 0);
      break;
    }
    case Mnemonic::add:
    case Mnemonic::sub:
    case Mnemonic::xor_:
    case Mnemonic::and_:
    case Mnemonic::or_: {
      uint64_t a = read_operand(ins.operands[0], nullptr);
      uint64_t b = read_operand(ins.operands[1], nullptr);
      uint64_t r = 0;
      switch (ins.mnemonic) {
        case Mnemonic::add: r = a + b; set_flags(flags_add(a, b, r)); break;
        case Mnemonic::sub: r = a - b; set_flags(flags_sub(a, b, r)); break;
        case Mnemonic::xor_: r = a ^ b; set_flags(flags_logic(r)); break;
        case Mnemonic::and_: r = a & b; set_flags(flags_logic(r)); break;
        case Mnemonic::or_: r = a | b; set_flags(flags_logic(r)); break;
        default: break;
      }
      write_operand(ins.operands[0], r, 0);
      break;
    }
    case Mnemonic::cmp: {
      uint64_t a = read_operand(ins.operands[0], nullptr);
      uint64_t b = read_operand(ins.operands[1], nullptr);
      set_flags(flags_sub(a, b, a - b));
      break;
    }
    case Mnemonic::test: {
      uint64_t a = read_operand(ins.operands[0], nullptr);
      uint64_t b = read_operand(ins.operands[1], nullptr);
      set_flags(flags_logic(a & b));
      break;
    }
    case Mnemonic::inc: {
      uint64_t a = read_operand(ins.operands[0], nullptr);
      uint64_t r = a + 1;
      set_flags(flags_add(a, 1, r));
      write_operand(ins.operands[0], r, 0);
      break;
    }
    case Mnemonic::dec: {
      uint64_t a = read_operand(ins.operands[0], nullptr);
      uint64_t r = a - 1;
      set_flags(flags_sub(a, 1, r));
      write_operand(ins.operands[0], r, 0);
      break;
    }
    case Mnemonic::neg: {
      uint64_t a = read_operand(ins.operands[0], nullptr);
      uint64_t r = 0 - a;
      Flags f = flags_sub(0, a, r);
      f.cf = a != 0;
      set_flags(f);
      write_operand(ins.operands[0], r, 0);
      break;
    }
    case Mnemonic::push:
      push_value(state.read_reg(ins.operands[0].reg));
      break;
    case Mnemonic::pop: {
      uint64_t v = pop_value();
      state.write_reg(ins.operands[0].reg, v);
      rec.reg_writes.push_back({ins.operands[0].reg, v});
      token_out(0, v);
      break;
    }
    case Mnemonic::call: {
      uint64_t target = ins.operands[0].kind == Operand::Kind::reg
                            ? state.read_reg(ins.operands[0].reg)
                            : static_cast<uint64_t>(ins.operands[0].imm);
      push_value(next);
      next = target;
      break;
    }
    case Mnemonic::ret:
      next = pop_value();
      break;
    case Mnemonic::jmp:
      next = static_cast<uint64_t>(ins.operands[0].imm);
      break;
    default: {
      if (!is_cond_jump(ins.mnemonic)) throw std::logic_error("unhandled mnemonic");
      if (cond_taken(ins.mnemonic, state.flags))
        next = static_cast<uint64_t>(ins.operands[0].imm);
      break;
    }
  }

  if (rec.flags_written) rec.flags_after = state.flags;
  state.write_reg(Reg::rip, next);
  rec.next_rip = next;
  return rec;
}

void replay(MachineState& state, const EffectRecord& rec) {
  for (const auto& a : rec.mem)
    if (a.is_write) state.store(a.address, a.width, a.value);
  for (const auto& w : rec.reg_writes) state.write_reg(w.reg, w.value);
  if (rec.flags_written) state.flags = rec.flags_after;
  state.write_reg(Reg::rip, rec.next_rip);
}

}  // namespace memdep::isa
