#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "memdep/enc/encoding.hpp"
#include "memdep/isa/isa.hpp"
#include "memdep/tracer/tracer.hpp"

namespace memdep::enc {

struct DatasetOptions {
  int max_tokens = 512;
  int stride = 256;
};

// Ground-truth labels attached while building samples for one function.
struct FunctionLabels {
  std::vector<tracer::DependencyRecord> deps;
  std::map<uint64_t, tracer::Region> regions;
  std::optional<SigLabel> sig;
  std::map<uint64_t, SigLabel> site_sigs;  // call-site address -> callee signature
};

// Static direction of an instruction's memory access, as witnessed by traces:
// push writes, pop and ret read, calls are summarized without stack traffic,
// explicit memory operands follow the mnemonic's read/write behavior.
std::optional<MemDir> static_mem_dir(const isa::Instruction& ins);

// One Sample per (run, window). Flipped conditionals appear with their
// inverted mnemonic; windows start on instruction boundaries and advance by
// `stride` tokens; dependency pairs are labeled only when both endpoints fall
// inside the window.
std::vector<Sample> build_function_samples(const isa::Function& fn,
                                           const std::vector<tracer::TraceLog>& traces,
                                           const FunctionLabels& labels, const Vocab& vocab,
                                           const DatasetOptions& opt);

// Unordered instruction pair that could alias, derived from the static memory
// directions in the sample; read-read pairs are excluded. `kind` annotates the
// pair from the static directions of the program-order earlier/later access.
struct CandidatePair {
  int i = 0;  // mnemonic token positions, i < j
  int j = 0;
  tracer::DepKind kind = tracer::DepKind::RAW;
};

std::vector<CandidatePair> candidate_pairs(const Sample& s);

// ---- serialization ---------------------------------------------------------

std::string format_samples(const std::vector<Sample>& samples);
std::vector<Sample> parse_samples(std::string_view text);

void write_samples_file(const std::string& path, const std::vector<Sample>& samples);
std::vector<Sample> read_samples_file(const std::string& path);

}  // namespace memdep::enc
