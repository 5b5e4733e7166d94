#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "memdep/isa/isa.hpp"
#include "memdep/tracer/tracer.hpp"
#include "memdep/util/rng.hpp"

namespace memdep::enc {

// ---- vocabulary ------------------------------------------------------------

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kMask = 1;
  static constexpr int kUnk = 2;
  static constexpr int kConst = 3;

  // Fixed layout: reserved ids, then mnemonics, then registers.
  static Vocab standard();

  int id(std::string_view token) const;  // unknown tokens map to kUnk
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(id_to_token_.size()); }

  std::string to_text() const;  // one token per line, line number = id
  static Vocab from_text(std::string_view text);

 private:
  std::vector<std::string> id_to_token_;
  std::map<std::string, int, std::less<>> token_to_id_;
  void push(const std::string& tok);
};

// ---- tokenization ----------------------------------------------------------

// One (c, p, m) tuple per token.
struct CodeTok {
  int c = Vocab::kPad;
  int p = 0;      // 1-based within instruction, 0 for padding
  bool m = false; // true only inside a memory operand
};

enum class TokRole { mnemonic, reg, konst, pad };

struct TokenInfo {
  TokRole role = TokRole::pad;
  bool value_bearing = false;  // carries a concrete 8-byte trace value
  size_t ins_index = 0;        // owning instruction (within the tokenized sequence)
  std::string text;            // original token text ("rax", "const", "add")
};

struct Tokenized {
  std::vector<CodeTok> code;
  std::vector<TokenInfo> info;
  std::vector<size_t> ins_first_token;  // instruction index -> first token position
};

Tokenized tokenize(const std::vector<isa::Instruction>& ins, const Vocab& vocab);

// Returns a copy of the instructions with every flipped conditional replaced by
// its inverted mnemonic, so token streams match what actually ran.
std::vector<isa::Instruction> patch_flipped(const std::vector<isa::Instruction>& ins,
                                            const std::set<uint64_t>& flipped_sites);

// ---- value and address channels -------------------------------------------

// Unnormalized byte channel: entries 0..255 for regular bytes, 256 for the
// not-executed sentinel (exactly 1.0 after the /256 normalization downstream),
// or all kDummyByte when the token carries no value.
constexpr int kDummyByte = -1;
constexpr int kSentinelByte = 256;
using Bytes8 = std::array<int, 8>;

bool is_dummy(const Bytes8& b);
Bytes8 dummy_bytes();
Bytes8 sentinel_bytes();
Bytes8 value_bytes(uint64_t v);  // most-significant byte first

// Per-token trace values for one run of a function. `ins` must be the patched
// instruction sequence the log was recorded against; register and standalone
// const tokens of executed instructions carry the instruction's input values,
// tokens of unexecuted instructions carry the sentinel, everything else dummy.
std::vector<Bytes8> encode_trace(const tracer::TraceLog& log,
                                 const std::vector<isa::Instruction>& ins,
                                 const Tokenized& toks);

// Per-token instruction address bytes (identical across one instruction).
std::vector<Bytes8> encode_addresses(const std::vector<isa::Instruction>& ins,
                                     const Tokenized& toks);

// ---- samples ---------------------------------------------------------------

struct DepLabel {
  int i = 0;  // mnemonic token position of the earlier instruction
  int j = 0;
  int bit = 0;
};

struct SigLabel {
  int arity = 0;        // 0..7
  int args[3] = {-1, -1, -1};  // type class 0..6, -1 when absent
  int ret = 7;          // 0..6, 7 = void
};

enum class MemDir { read, write, readwrite };
const char* mem_dir_name(MemDir d);
std::optional<MemDir> mem_dir_from_name(std::string_view s);

struct Sample {
  std::vector<CodeTok> code;
  std::vector<Bytes8> trace;
  std::vector<Bytes8> addr;

  std::string func;
  int run = 0;
  int window = 0;

  std::vector<DepLabel> deps;                 // labeled pairs within the window
  std::vector<std::pair<int, MemDir>> mems;   // (mnemonic pos, static direction)
  std::vector<std::pair<int, int>> regions;   // (mnemonic pos, region class)
  std::optional<SigLabel> sig;                // the enclosing function's own signature
  std::vector<std::pair<int, SigLabel>> sites;  // (call mnemonic pos, prepared signature)

  // Masking state (empty until mask_sample).
  std::vector<int> mi;                        // masked code positions
  std::vector<int> mt;                        // masked trace positions
  std::vector<int> code_targets;              // original ids, aligned with mi
  std::vector<Bytes8> trace_targets;          // original bytes, aligned with mt
  std::vector<uint8_t> trace_masked;          // per-position mask-channel bit

  size_t length() const { return code.size(); }
  uint64_t address_at(int pos) const;  // reconstructed from addr bytes
};

enum class MaskMode { interpret, synthesize, both };
const char* mask_mode_name(MaskMode m);

// Masks floor(r * maskable) positions per affected stream: interpret touches
// only trace positions (never dummies), synthesize only code positions (never
// padding), both draws each stream independently. Targets are stored so
// unmask_sample restores the input exactly.
void mask_sample(Sample& s, double r, MaskMode mode, Rng& rng);
void unmask_sample(Sample& s);

double curriculum_rate(int k, int epo, double lo, double hi);

// Stable ascending sort by token count.
void order_by_length(std::vector<Sample>& samples);

}  // namespace memdep::enc
