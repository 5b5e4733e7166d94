#include "memdep/isa/isa.hpp"
#include "memdep/util/common.hpp"

#include <cctype>

namespace memdep::isa {

namespace {

const char* const kRegNames[kRegCount] = {
    "rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rbp", "rsp",
    "r8",  "r9",  "r10", "r11", "r12", "r13", "r14", "r15", "rip"};

const char* const kMnemonicNames[kMnemonicCount] = {
    "mov", "movsxd", "lea", "add", "sub", "xor", "and", "or", "cmp", "test",
    "inc", "dec", "neg", "push", "pop", "call", "ret",
    "jmp", "je", "jne", "jl", "jge", "jg", "jle", "jb", "jae", "nop"};

}  // namespace

const char* reg_name(Reg r) { return kRegNames[static_cast<size_t>(r)]; }

std::optional<Reg> reg_from_name(std::string_view name) {
  for (int i = 0; i < kRegCount; ++i)
    if (name == kRegNames[i]) return static_cast<Reg>(i);
  return std::nullopt;
}

const char* mnemonic_name(Mnemonic m) { return kMnemonicNames[static_cast<size_t>(m)]; }

std::optional<Mnemonic> mnemonic_from_name(std::string_view name) {
  for (int i = 0; i < kMnemonicCount; ++i)
    if (name == kMnemonicNames[i]) return static_cast<Mnemonic>(i);
  return std::nullopt;
}

bool is_cond_jump(Mnemonic m) {
  switch (m) {
    case Mnemonic::je: case Mnemonic::jne: case Mnemonic::jl: case Mnemonic::jge:
    case Mnemonic::jg: case Mnemonic::jle: case Mnemonic::jb: case Mnemonic::jae:
      return true;
    default:
      return false;
  }
}

bool is_jump(Mnemonic m) { return m == Mnemonic::jmp || is_cond_jump(m); }

Mnemonic invert_condition(Mnemonic m) {
  switch (m) {
    case Mnemonic::je:  return Mnemonic::jne;
    case Mnemonic::jne: return Mnemonic::je;
    case Mnemonic::jl:  return Mnemonic::jge;
    case Mnemonic::jge: return Mnemonic::jl;
    case Mnemonic::jg:  return Mnemonic::jle;
    case Mnemonic::jle: return Mnemonic::jg;
    case Mnemonic::jb:  return Mnemonic::jae;
    case Mnemonic::jae: return Mnemonic::jb;
    default:
      throw std::invalid_argument(std::string("not a conditional jump: ") + mnemonic_name(m));
  }
}

bool cond_taken(Mnemonic m, const Flags& f) {
  switch (m) {
    case Mnemonic::je:  return f.zf;
    case Mnemonic::jne: return !f.zf;
    case Mnemonic::jl:  return f.sf != f.of;
    case Mnemonic::jge: return f.sf == f.of;
    case Mnemonic::jg:  return !f.zf && f.sf == f.of;
    case Mnemonic::jle: return f.zf || f.sf != f.of;
    case Mnemonic::jb:  return f.cf;
    case Mnemonic::jae: return !f.cf;
    default:
      throw std::invalid_argument(std::string("not a conditional jump: ") + mnemonic_name(m));
  }
}

uint32_t default_length(Mnemonic m) {
  switch (m) {
    case Mnemonic::push: case Mnemonic::pop: case Mnemonic::ret: case Mnemonic::nop:
      return 1;
    case Mnemonic::jmp: case Mnemonic::je: case Mnemonic::jne: case Mnemonic::jl:
    case Mnemonic::jge: case Mnemonic::jg: case Mnemonic::jle: case Mnemonic::jb:
    case Mnemonic::jae:
      return 2;
    case Mnemonic::movsxd: case Mnemonic::lea:
      return 4;
    case Mnemonic::call:
      return 5;
    default:
      return 3;
  }
}

Operand Operand::make_reg(Reg r) {
  Operand o;
  o.kind = Kind::reg;
  o.reg = r;
  return o;
}

Operand Operand::make_imm(int64_t v) {
  Operand o;
  o.kind = Kind::imm;
  o.imm = v;
  return o;
}

Operand Operand::make_mem(MemRef m) {
  Operand o;
  o.kind = Kind::mem;
  o.mem = m;
  return o;
}

const Function* Program::find_function(std::string_view name) const {
  for (const auto& f : functions)
    if (f.name == name) return &f;
  return nullptr;
}

std::optional<std::pair<int, int>> Program::locate(uint64_t address) const {
  auto it = index_.find(address);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const Instruction* Program::instruction_at(uint64_t address) const {
  auto loc = locate(address);
  if (!loc) return nullptr;
  return &functions[static_cast<size_t>(loc->first)]
              .instructions[static_cast<size_t>(loc->second)];
}

const StubDecl* Program::stub_at(uint64_t address) const {
  for (const auto& s : stubs)
    if (s.address == address) return &s;
  return nullptr;
}

void Program::build_index() {
  index_.clear();
  for (size_t fi = 0; fi < functions.size(); ++fi)
    for (size_t ii = 0; ii < functions[fi].instructions.size(); ++ii)
      index_[functions[fi].instructions[ii].address] = {static_cast<int>(fi),
                                                        static_cast<int>(ii)};
}

namespace {

struct PendingRef {
  int function;    // index into functions
  int instruction; // index into instructions
  int operand;     // index into operands
  std::string symbol;
  int line;
};

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

// Splits an instruction body on top-level commas (none occur inside []).
std::vector<std::string> split_operands(std::string_view body) {
  std::vector<std::string> parts;
  std::string cur;
  int depth = 0;
  for (char c : body) {
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (c == ',' && depth == 0) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!std::string_view(trim(cur)).empty() || !parts.empty()) parts.push_back(cur);
  return parts;
}

bool looks_numeric(std::string_view s) {
  if (s.empty()) return false;
  if (s.front() == '-' || s.front() == '+') s.remove_prefix(1);
  return !s.empty() && std::isdigit(static_cast<unsigned char>(s.front()));
}

MemRef parse_memref(std::string_view inner, int line) {
  MemRef m;
  // Tokenize on +/- at top level, keeping signs with the terms.
  std::vector<std::pair<char, std::string>> terms;  // sign, text
  char sign = '+';
  std::string cur;
  for (char c : inner) {
    if (c == '+' || c == '-') {
      if (!std::string_view(trim(cur)).empty()) terms.emplace_back(sign, std::string(trim(cur)));
      sign = c;
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!std::string_view(trim(cur)).empty()) terms.emplace_back(sign, std::string(trim(cur)));
  if (terms.empty()) throw ParseError(line, "empty memory operand");

  for (const auto& [sg, text] : terms) {
    if (auto r = reg_from_name(text)) {
      if (sg == '-') throw ParseError(line, "negative register term in memory operand");
      if (*r == Reg::rip) {
        m.rip_relative = true;
      } else if (!m.base) {
        m.base = *r;
      } else if (!m.index) {
        m.index = *r;
      } else {
        throw ParseError(line, "too many registers in memory operand");
      }
    } else if (looks_numeric(text)) {
      int64_t v;
      try {
        v = parse_int(text);
      } catch (const std::invalid_argument& e) {
        throw ParseError(line, e.what());
      }
      m.disp += (sg == '-') ? -v : v;
      m.explicit_disp = true;
    } else {
      throw ParseError(line, "bad memory operand term: " + text);
    }
  }
  if (m.rip_relative && (m.base || m.index))
    throw ParseError(line, "rip-relative operand cannot carry base or index registers");
  return m;
}

void check_operands(const Instruction& ins, int line) {
  auto arity = [&](size_t n) {
    if (ins.operands.size() != n)
      throw ParseError(line, std::string(mnemonic_name(ins.mnemonic)) + ": expected " +
                                 std::to_string(n) + " operand(s)");
  };
  auto kind = [&](size_t i) { return ins.operands[i].kind; };
  using K = Operand::Kind;
  switch (ins.mnemonic) {
    case Mnemonic::nop:
    case Mnemonic::ret:
      arity(0);
      break;
    case Mnemonic::push:
    case Mnemonic::pop:
      arity(1);
      if (kind(0) != K::reg)
        throw ParseError(line, std::string(mnemonic_name(ins.mnemonic)) + ": register operand required");
      break;
    case Mnemonic::inc:
    case Mnemonic::dec:
    case Mnemonic::neg:
      arity(1);
      if (kind(0) == K::imm) throw ParseError(line, "immediate destination");
      break;
    case Mnemonic::call:
      arity(1);
      if (kind(0) == K::mem) throw ParseError(line, "call through memory not supported");
      break;
    case Mnemonic::jmp: case Mnemonic::je: case Mnemonic::jne: case Mnemonic::jl:
    case Mnemonic::jge: case Mnemonic::jg: case Mnemonic::jle: case Mnemonic::jb:
    case Mnemonic::jae:
      arity(1);
      if (kind(0) != K::imm) throw ParseError(line, "jump target must be a label or immediate");
      break;
    case Mnemonic::lea:
      arity(2);
      if (kind(0) != K::reg || kind(1) != K::mem)
        throw ParseError(line, "lea: register destination and memory source required");
      break;
    case Mnemonic::movsxd:
      arity(2);
      if (kind(0) != K::reg) throw ParseError(line, "movsxd: register destination required");
      if (kind(1) == K::imm) throw ParseError(line, "movsxd: immediate source not supported");
      break;
    case Mnemonic::mov: case Mnemonic::add: case Mnemonic::sub: case Mnemonic::xor_:
    case Mnemonic::and_: case Mnemonic::or_: case Mnemonic::cmp: case Mnemonic::test:
      arity(2);
      if (kind(0) == K::imm) throw ParseError(line, "immediate destination");
      if (kind(0) == K::mem && kind(1) == K::mem)
        throw ParseError(line, "memory-to-memory operands not supported");
      break;
    default:
      throw ParseError(line, "unsupported mnemonic");
  }
}

}  // namespace

Program parse_asm(std::string_view text) {
  Program prog;
  std::unordered_map<std::string, uint64_t> labels;
  std::vector<PendingRef> pending;
  std::unordered_map<std::string, int> stub_index;

  uint64_t cursor = kDefaultCodeBase;
  bool cursor_set = false;
  std::vector<std::string> waiting_labels;  // labels awaiting their address

  auto current_function = [&]() -> Function* {
    return prog.functions.empty() ? nullptr : &prog.functions.back();
  };

  int lineno = 0;
  for (const auto& raw : split(text, '\n')) {
    ++lineno;
    std::string_view line = trim(raw);
    size_t sc = line.find(';');
    if (sc != std::string_view::npos) line = trim(line.substr(0, sc));
    if (line.empty()) continue;

    if (line.front() == '.') {
      // Directive or local label definition.
      if (line.back() == ':') {
        waiting_labels.emplace_back(trim(line.substr(0, line.size() - 1)));
        continue;
      }
      auto fields = split(std::string(line), ' ');
      std::vector<std::string> parts;
      for (auto& f : fields)
        if (!std::string_view(trim(f)).empty()) parts.emplace_back(trim(f));
      if (parts[0] == ".data") {
        if (parts.size() != 3) throw ParseError(lineno, ".data expects base and size");
        DataDecl d;
        try {
          d.base = static_cast<uint64_t>(parse_int(parts[1]));
          d.size = static_cast<uint64_t>(parse_int(parts[2]));
        } catch (const std::invalid_argument& e) {
          throw ParseError(lineno, e.what());
        }
        prog.data = d;
      } else if (parts[0] == ".stub") {
        if (parts.size() != 3) throw ParseError(lineno, ".stub expects name and kind");
        if (parts[2] != "ret0" && parts[2] != "malloc" && parts[2] != "write8")
          throw ParseError(lineno, "unknown stub kind: " + parts[2]);
        if (stub_index.count(parts[1])) throw ParseError(lineno, "duplicate stub: " + parts[1]);
        StubDecl s;
        s.name = parts[1];
        s.kind = parts[2];
        s.address = kStubAddrBase + kStubAddrStride * prog.stubs.size();
        stub_index[s.name] = static_cast<int>(prog.stubs.size());
        prog.stubs.push_back(s);
      } else {
        throw ParseError(lineno, "unknown directive: " + parts[0]);
      }
      continue;
    }

    if (line.back() == ':' && line.find(' ') == std::string_view::npos) {
      std::string name(trim(line.substr(0, line.size() - 1)));
      if (name.empty()) throw ParseError(lineno, "empty label");
      if (labels.count(name)) throw ParseError(lineno, "duplicate label: " + name);
      waiting_labels.push_back(name);
      // Non-local labels begin a new function.
      if (name[0] != '.') {
        Function f;
        f.name = name;
        prog.functions.push_back(std::move(f));
      }
      continue;
    }

    // Instruction line.
    size_t ws = line.find_first_of(" \t");
    std::string mnem_text(ws == std::string_view::npos ? line : line.substr(0, ws));
    std::string_view rest = ws == std::string_view::npos ? std::string_view{} : trim(line.substr(ws));

    // Trailing annotations: @addr=<hex> @len=<int>
    std::optional<uint64_t> at_addr;
    std::optional<uint32_t> at_len;
    while (true) {
      size_t at = rest.rfind('@');
      if (at == std::string_view::npos) break;
      std::string_view ann = trim(rest.substr(at));
      if (starts_with(ann, "@addr=")) {
        try {
          at_addr = parse_hex(ann.substr(6));
        } catch (const std::invalid_argument& e) {
          throw ParseError(lineno, e.what());
        }
      } else if (starts_with(ann, "@len=")) {
        int64_t v;
        try {
          v = parse_int(ann.substr(5));
        } catch (const std::invalid_argument& e) {
          throw ParseError(lineno, e.what());
        }
        if (v <= 0 || v > 15) throw ParseError(lineno, "@len out of range");
        at_len = static_cast<uint32_t>(v);
      } else {
        throw ParseError(lineno, "unknown annotation: " + std::string(ann));
      }
      rest = trim(rest.substr(0, at));
    }

    auto mnem = mnemonic_from_name(mnem_text);
    if (!mnem) throw ParseError(lineno, "unknown mnemonic: " + mnem_text);

    if (!current_function()) {
      // Bare listing without a leading label: wrap it in an implicit function.
      Function f;
      f.name = "entry";
      prog.functions.push_back(std::move(f));
    }

    Instruction ins;
    ins.mnemonic = *mnem;
    ins.line = static_cast<uint32_t>(lineno);

    if (!rest.empty()) {
      for (const auto& part_raw : split_operands(rest)) {
        std::string_view part = trim(part_raw);
        if (part.empty()) throw ParseError(lineno, "empty operand");
        if (part.front() == '[') {
          if (part.back() != ']') throw ParseError(lineno, "unterminated memory operand");
          ins.operands.push_back(
              Operand::make_mem(parse_memref(part.substr(1, part.size() - 2), lineno)));
        } else if (auto r = reg_from_name(part)) {
          ins.operands.push_back(Operand::make_reg(*r));
        } else if (looks_numeric(part)) {
          try {
            ins.operands.push_back(Operand::make_imm(parse_int(part)));
          } catch (const std::invalid_argument& e) {
            throw ParseError(lineno, e.what());
          }
        } else {
          // Label or stub reference; resolved after the address pass.
          for (char c : part)
            if (!is_ident_char(c)) throw ParseError(lineno, "bad operand: " + std::string(part));
          ins.operands.push_back(Operand::make_imm(0));
          pending.push_back({static_cast<int>(prog.functions.size()) - 1,
                             static_cast<int>(current_function()->instructions.size()),
                             static_cast<int>(ins.operands.size()) - 1, std::string(part),
                             lineno});
        }
      }
    }

    check_operands(ins, lineno);

    if (at_addr) {
      cursor = *at_addr;
      cursor_set = true;
    } else if (!cursor_set) {
      cursor_set = true;  // first instruction anchors at the default base
    }
    ins.address = cursor;
    ins.encoded_length = at_len ? *at_len : default_length(ins.mnemonic);
    cursor += ins.encoded_length;

    for (const auto& l : waiting_labels) labels[l] = ins.address;
    if (!waiting_labels.empty() && current_function()->instructions.empty())
      current_function()->entry = ins.address;
    waiting_labels.clear();

    current_function()->instructions.push_back(std::move(ins));
  }

  for (auto& f : prog.functions) {
    if (f.instructions.empty())
      throw ParseError(lineno, "function with no instructions: " + f.name);
    f.entry = f.instructions.front().address;
  }

  for (const auto& ref : pending) {
    uint64_t target;
    if (auto it = labels.find(ref.symbol); it != labels.end()) {
      target = it->second;
    } else if (auto si = stub_index.find(ref.symbol); si != stub_index.end()) {
      target = prog.stubs[static_cast<size_t>(si->second)].address;
    } else {
      throw ParseError(ref.line, "undefined symbol: " + ref.symbol);
    }
    prog.functions[static_cast<size_t>(ref.function)]
        .instructions[static_cast<size_t>(ref.instruction)]
        .operands[static_cast<size_t>(ref.operand)]
        .imm = static_cast<int64_t>(target);
  }

  prog.build_index();
  return prog;
}

}  // namespace memdep::isa
