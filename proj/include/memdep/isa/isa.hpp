#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace memdep::isa {

// 64-bit integer subset: no sub-register aliases, no SIMD/FP, no segments.

enum class Reg : uint8_t {
  rax, rbx, rcx, rdx, rsi, rdi, rbp, rsp,
  r8, r9, r10, r11, r12, r13, r14, r15,
  rip,
  count
};
constexpr int kRegCount = static_cast<int>(Reg::count);

const char* reg_name(Reg r);
std::optional<Reg> reg_from_name(std::string_view name);

enum class Mnemonic : uint8_t {
  mov, movsxd, lea,
  add, sub, xor_, and_, or_, cmp, test,
  inc, dec, neg,
  push, pop, call, ret,
  jmp, je, jne, jl, jge, jg, jle, jb, jae,
  nop,
  count
};
constexpr int kMnemonicCount = static_cast<int>(Mnemonic::count);

const char* mnemonic_name(Mnemonic m);
std::optional<Mnemonic> mnemonic_from_name(std::string_view name);

bool is_cond_jump(Mnemonic m);
bool is_jump(Mnemonic m);  // jmp or any conditional

// je<->jne, jl<->jge, jg<->jle, jb<->jae. Throws on non-conditionals.
Mnemonic invert_condition(Mnemonic m);

struct Flags {
  bool zf = false, sf = false, cf = false, of = false;
  bool operator==(const Flags&) const = default;
};

// Condition-code evaluation over the flag model.
bool cond_taken(Mnemonic m, const Flags& f);

struct MemRef {
  std::optional<Reg> base;
  std::optional<Reg> index;  // no scale in the subset
  int64_t disp = 0;
  bool rip_relative = false;
  bool explicit_disp = false;  // displacement (or absolute address) written in source
};

struct Operand {
  enum class Kind : uint8_t { reg, imm, mem };
  Kind kind = Kind::imm;
  Reg reg = Reg::rax;
  int64_t imm = 0;
  MemRef mem;

  static Operand make_reg(Reg r);
  static Operand make_imm(int64_t v);
  static Operand make_mem(MemRef m);
};

struct Instruction {
  uint64_t address = 0;
  uint32_t encoded_length = 0;
  Mnemonic mnemonic = Mnemonic::nop;
  std::vector<Operand> operands;
  uint32_t line = 0;  // 1-based source line
};

// Fixed per-mnemonic length table; @len annotations override per instruction.
uint32_t default_length(Mnemonic m);

struct StubDecl {
  std::string name;
  std::string kind;  // ret0 | malloc | write8
  uint64_t address = 0;
};

struct DataDecl {
  uint64_t base = 0;
  uint64_t size = 0;
};

struct Function {
  std::string name;
  uint64_t entry = 0;
  std::vector<Instruction> instructions;
};

struct Program {
  std::vector<Function> functions;
  std::vector<StubDecl> stubs;
  std::optional<DataDecl> data;

  const Function* find_function(std::string_view name) const;
  // (function index, instruction index) by address, or nullopt.
  std::optional<std::pair<int, int>> locate(uint64_t address) const;
  const Instruction* instruction_at(uint64_t address) const;
  const StubDecl* stub_at(uint64_t address) const;

  void build_index();  // called by the parser; rebuild after manual edits

 private:
  std::unordered_map<uint64_t, std::pair<int, int>> index_;
};

struct ParseError : std::runtime_error {
  ParseError(int line_, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_) + ": " + what), line(line_) {}
  int line;
};

constexpr uint64_t kDefaultCodeBase = 0x1000;
constexpr uint64_t kStubAddrBase = 0x100000;
constexpr uint64_t kStubAddrStride = 0x100;

Program parse_asm(std::string_view text);

// ---- machine state ---------------------------------------------------------

struct MachineState {
  std::array<uint64_t, kRegCount> regs{};
  Flags flags;
  std::unordered_map<uint64_t, uint8_t> mem;  // sparse; absent bytes read as 0

  uint64_t read_reg(Reg r) const { return regs[static_cast<size_t>(r)]; }
  void write_reg(Reg r, uint64_t v) { regs[static_cast<size_t>(r)] = v; }
  uint64_t rip() const { return read_reg(Reg::rip); }

  uint64_t load(uint64_t addr, unsigned width) const;  // little-endian
  void store(uint64_t addr, unsigned width, uint64_t value);

  bool operator==(const MachineState& other) const;
};

// ---- execution effects -----------------------------------------------------

struct MemAccess {
  uint64_t address = 0;
  uint8_t width = 8;
  bool is_write = false;
  uint64_t value = 0;  // value read, or value written
};

// One entry per value-bearing token, in token order: standalone register
// operands, registers inside memory operands, standalone immediates.
// Displacements inside memory operands and mnemonics carry no entry.
struct TokenValue {
  std::string token;  // register name or "const"
  uint64_t in = 0;    // pre-instruction value
  uint64_t out = 0;   // post-instruction value (== in unless written)
};

struct RegWrite {
  Reg reg = Reg::rax;
  uint64_t value = 0;
};

struct EffectRecord {
  uint64_t address = 0;
  Mnemonic mnemonic = Mnemonic::nop;  // as executed (inverted when flipped)
  std::vector<TokenValue> token_values;
  std::vector<MemAccess> mem;
  std::vector<RegWrite> reg_writes;  // excludes rip
  bool flags_written = false;
  Flags flags_after;
  uint64_t next_rip = 0;
  bool flipped = false;

  bool accesses_memory() const { return !mem.empty(); }
  bool writes_memory() const;
};

// Executes one instruction, mutating state (including rip). The instruction
// need not live at state.rip; rip semantics use ins.address.
EffectRecord step(MachineState& state, const Instruction& ins);

// Applies a record's effects (memory writes, register writes, flags, rip).
void replay(MachineState& state, const EffectRecord& rec);

// Whether the instruction statically reads/writes memory (push/pop/call/ret
// included, lea excluded). Used for candidate-pair enumeration.
bool reads_memory(const Instruction& ins);
bool writes_memory(const Instruction& ins);

}  // namespace memdep::isa
