#include "memdep/enc/encoding.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "memdep/util/common.hpp"

namespace memdep::enc {

// ---- vocabulary ------------------------------------------------------------

void Vocab::push(const std::string& tok) {
  token_to_id_.emplace(tok, static_cast<int>(id_to_token_.size()));
  id_to_token_.push_back(tok);
}

Vocab Vocab::standard() {
  Vocab v;
  v.push("<pad>");
  v.push("<mask>");
  v.push("<unk>");
  v.push("const");
  for (int m = 0; m < isa::kMnemonicCount; ++m)
    v.push(isa::mnemonic_name(static_cast<isa::Mnemonic>(m)));
  for (int r = 0; r < isa::kRegCount; ++r)
    v.push(isa::reg_name(static_cast<isa::Reg>(r)));
  return v;
}

int Vocab::id(std::string_view token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("vocab id " + std::to_string(id));
  return id_to_token_[static_cast<size_t>(id)];
}

std::string Vocab::to_text() const {
  std::string out;
  for (const auto& t : id_to_token_) {
    out += t;
    out += '\n';
  }
  return out;
}

Vocab Vocab::from_text(std::string_view text) {
  Vocab v;
  for (const auto& raw : split(text, '\n')) {
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    v.push(std::string(line));
  }
  if (v.size() < 4 || v.token(kPad) != "<pad>" || v.token(kMask) != "<mask>" ||
      v.token(kUnk) != "<unk>" || v.token(kConst) != "const")
    throw std::runtime_error("vocabulary file missing reserved entries");
  return v;
}

// ---- tokenization ----------------------------------------------------------

namespace {

void push_token(Tokenized& out, const Vocab& vocab, const std::string& text, int p, bool m,
                TokRole role, bool value_bearing, size_t ins_index) {
  out.code.push_back({vocab.id(text), p, m});
  out.info.push_back({role, value_bearing, ins_index, text});
}

}  // namespace

Tokenized tokenize(const std::vector<isa::Instruction>& ins, const Vocab& vocab) {
  Tokenized out;
  for (size_t k = 0; k < ins.size(); ++k) {
    const auto& i = ins[k];
    out.ins_first_token.push_back(out.code.size());
    int p = 1;
    push_token(out, vocab, isa::mnemonic_name(i.mnemonic), p++, false, TokRole::mnemonic, false, k);
    for (const auto& op : i.operands) {
      switch (op.kind) {
        case isa::Operand::Kind::reg:
          push_token(out, vocab, isa::reg_name(op.reg), p++, false, TokRole::reg, true, k);
          break;
        case isa::Operand::Kind::imm:
          push_token(out, vocab, "const", p++, false, TokRole::konst, true, k);
          break;
        case isa::Operand::Kind::mem: {
          if (op.mem.rip_relative)
            push_token(out, vocab, "rip", p++, true, TokRole::reg, true, k);
          if (op.mem.base)
            push_token(out, vocab, isa::reg_name(*op.mem.base), p++, true, TokRole::reg, true, k);
          if (op.mem.index)
            push_token(out, vocab, isa::reg_name(*op.mem.index), p++, true, TokRole::reg, true, k);
          if (op.mem.explicit_disp)
            push_token(out, vocab, "const", p++, true, TokRole::konst, false, k);
          break;
        }
      }
    }
  }
  return out;
}

std::vector<isa::Instruction> patch_flipped(const std::vector<isa::Instruction>& ins,
                                            const std::set<uint64_t>& flipped_sites) {
  std::vector<isa::Instruction> out = ins;
  for (auto& i : out)
    if (flipped_sites.count(i.address)) i.mnemonic = isa::invert_condition(i.mnemonic);
  return out;
}

// ---- value and address channels -------------------------------------------

bool is_dummy(const Bytes8& b) { return b[0] == kDummyByte; }

Bytes8 dummy_bytes() {
  Bytes8 b;
  b.fill(kDummyByte);
  return b;
}

Bytes8 sentinel_bytes() {
  Bytes8 b;
  b.fill(kSentinelByte);
  return b;
}

Bytes8 value_bytes(uint64_t v) {
  Bytes8 b;
  for (int j = 7; j >= 0; --j) {
    b[static_cast<size_t>(j)] = static_cast<int>(v & 0xff);
    v >>= 8;
  }
  return b;
}

std::vector<Bytes8> encode_trace(const tracer::TraceLog& log,
                                 const std::vector<isa::Instruction>& ins,
                                 const Tokenized& toks) {
  // First execution of each instruction supplies its token values.
  std::map<uint64_t, const isa::EffectRecord*> first_exec;
  for (const auto& rec : log.records) first_exec.emplace(rec.address, &rec);

  std::vector<Bytes8> out(toks.code.size(), dummy_bytes());
  size_t pos = 0;
  for (size_t k = 0; k < ins.size(); ++k) {
    size_t end = k + 1 < ins.size() ? toks.ins_first_token[k + 1] : toks.code.size();
    auto it = first_exec.find(ins[k].address);
    const isa::EffectRecord* rec = it == first_exec.end() ? nullptr : it->second;
    size_t vi = 0;
    for (; pos < end; ++pos) {
      const auto& info = toks.info[pos];
      if (!info.value_bearing) continue;
      if (!rec) {
        out[pos] = sentinel_bytes();
        continue;
      }
      if (vi >= rec->token_values.size())
        throw std::runtime_error("trace alignment: too few recorded values at " +
                                 hex_u64(ins[k].address));
      const auto& tv = rec->token_values[vi++];
      if (tv.token != info.text)
        throw std::runtime_error("trace alignment: token mismatch at " + hex_u64(ins[k].address) +
                                 ": " + tv.token + " vs " + info.text);
      out[pos] = value_bytes(tv.in);
    }
    if (rec && vi != rec->token_values.size())
      throw std::runtime_error("trace alignment: unconsumed recorded values at " +
                               hex_u64(ins[k].address));
  }
  return out;
}

std::vector<Bytes8> encode_addresses(const std::vector<isa::Instruction>& ins,
                                     const Tokenized& toks) {
  std::vector<Bytes8> out(toks.code.size(), dummy_bytes());
  for (size_t pos = 0; pos < toks.code.size(); ++pos)
    out[pos] = value_bytes(ins[toks.info[pos].ins_index].address);
  return out;
}

// ---- samples ---------------------------------------------------------------

const char* mem_dir_name(MemDir d) {
  switch (d) {
    case MemDir::read: return "r";
    case MemDir::write: return "w";
    case MemDir::readwrite: return "rw";
  }
  return "?";
}

std::optional<MemDir> mem_dir_from_name(std::string_view s) {
  if (s == "r") return MemDir::read;
  if (s == "w") return MemDir::write;
  if (s == "rw") return MemDir::readwrite;
  return std::nullopt;
}

uint64_t Sample::address_at(int pos) const {
  const auto& b = addr[static_cast<size_t>(pos)];
  uint64_t v = 0;
  for (int j = 0; j < 8; ++j) v = (v << 8) | static_cast<uint64_t>(b[static_cast<size_t>(j)]);
  return v;
}

const char* mask_mode_name(MaskMode m) {
  switch (m) {
    case MaskMode::interpret: return "interpret";
    case MaskMode::synthesize: return "synthesize";
    case MaskMode::both: return "both";
  }
  return "?";
}

void mask_sample(Sample& s, double r, MaskMode mode, Rng& rng) {
  if (r < 0.0 || r > 1.0) throw std::invalid_argument("mask rate out of [0,1]");
  unmask_sample(s);
  s.trace_masked.assign(s.length(), 0);

  if (mode == MaskMode::synthesize || mode == MaskMode::both) {
    std::vector<int> maskable;
    for (size_t i = 0; i < s.code.size(); ++i)
      if (s.code[i].c != Vocab::kPad) maskable.push_back(static_cast<int>(i));
    size_t take = static_cast<size_t>(r * static_cast<double>(maskable.size()));
    for (size_t idx : rng.sample_indices(maskable.size(), take)) {
      int pos = maskable[idx];
      s.mi.push_back(pos);
      s.code_targets.push_back(s.code[static_cast<size_t>(pos)].c);
      s.code[static_cast<size_t>(pos)].c = Vocab::kMask;
    }
  }
  if (mode == MaskMode::interpret || mode == MaskMode::both) {
    std::vector<int> maskable;
    for (size_t i = 0; i < s.trace.size(); ++i)
      if (!is_dummy(s.trace[i])) maskable.push_back(static_cast<int>(i));
    size_t take = static_cast<size_t>(r * static_cast<double>(maskable.size()));
    for (size_t idx : rng.sample_indices(maskable.size(), take)) {
      int pos = maskable[idx];
      s.mt.push_back(pos);
      s.trace_targets.push_back(s.trace[static_cast<size_t>(pos)]);
      s.trace_masked[static_cast<size_t>(pos)] = 1;
    }
  }
}

void unmask_sample(Sample& s) {
  for (size_t k = 0; k < s.mi.size(); ++k)
    s.code[static_cast<size_t>(s.mi[k])].c = s.code_targets[k];
  s.mi.clear();
  s.code_targets.clear();
  s.mt.clear();
  s.trace_targets.clear();
  s.trace_masked.assign(s.length(), 0);
}

double curriculum_rate(int k, int epo, double lo, double hi) {
  if (k < 1 || k > epo) throw std::invalid_argument("curriculum epoch out of range");
  if (lo < 0.0 || hi > 1.0 || lo > hi) throw std::invalid_argument("curriculum bounds invalid");
  return lo + (hi - lo) * static_cast<double>(k - 1) / static_cast<double>(epo);
}

void order_by_length(std::vector<Sample>& samples) {
  std::stable_sort(samples.begin(), samples.end(),
                   [](const Sample& a, const Sample& b) { return a.length() < b.length(); });
}

}  // namespace memdep::enc
