#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memdep/enc/dataset.hpp"
#include "memdep/model/model.hpp"
#include "memdep/train/metrics.hpp"

namespace memdep::train {

struct PretrainConfig {
  int epochs = 10;
  double rate_lo = 0.2;
  double rate_hi = 0.8;
  int batch = 16;
  double lr = 1e-4;
  double alpha = 100.0;  // weight of the value squared-error term
  int threads = 1;
  uint64_t seed = 0;

  void validate() const;
};

// Per-epoch audit: maskable counts and floor(rate * maskable) are recounted
// independently of the masking code and compared with the realized counts.
struct EpochAudit {
  int epoch = 1;
  double rate = 0;
  long long expected_code = 0;
  long long realized_code = 0;
  long long expected_trace = 0;
  long long realized_trace = 0;

  bool ok() const {
    return expected_code == realized_code && expected_trace == realized_trace;
  }
};

struct PretrainResult {
  std::vector<double> loss_curve;  // mean per-sample loss per step
  std::vector<EpochAudit> audits;
};

// Masked-code cross-entropy plus alpha times the summed squared error of the
// predicted byte values, for one masked sample.
tensor::Tensor pretrain_sample_loss(tensor::Tape& tp, const model::Model& m, const enc::Sample& s,
                                    double alpha);

// One optimizer step over a batch of already-masked samples: per-sample
// forward/backward on worker tapes, gradients merged in worker order, scaled
// by 1/batch, applied in parameter-creation order. Returns the mean
// per-sample loss. Deterministic for a fixed (seed, threads) pair.
double pretrain_step(model::Model& m, tensor::Adam& opt,
                     const std::vector<const enc::Sample*>& batch, double alpha, int threads);

// Curriculum pretraining: epoch k masks at curriculum_rate(k, epochs, lo, hi),
// each step draws one of the three masking modes uniformly, samples are
// visited in stable length order.
PretrainResult pretrain(model::Model& m, std::vector<enc::Sample>& corpus,
                        const PretrainConfig& cfg);

// ---- dependency finetuning -------------------------------------------------

struct FinetuneConfig {
  int epochs = 8;
  int batch = 16;  // samples per step; each carries its own pair list
  double lr = 1e-4;
  double threshold = 0.5;
  int neg_ratio = 3;  // negatives kept per function, as a multiple of positives
  double eval_fraction = 0.2;
  int threads = 1;
  uint64_t seed = 0;

  void validate() const;
};

struct PairExample {
  int i = 0;  // mnemonic token positions, i < j
  int j = 0;
  int label = 0;
};

struct SamplePairs {
  const enc::Sample* sample = nullptr;
  std::vector<PairExample> pairs;
};

// Positive pairs from the window labels plus seeded negatives drawn from the
// non-dependent candidate pairs, capped at neg_ratio x positives across the
// function's samples.
std::vector<SamplePairs> build_pair_sets(const std::vector<const enc::Sample*>& fn_samples,
                                         int fn_index, int neg_ratio, uint64_t seed);

// Summed binary cross-entropy of the pair logits for one sample.
tensor::Tensor pair_loss(tensor::Tape& tp, const model::Model& m, const SamplePairs& sp);

struct PairScore {
  uint64_t a = 0;  // unordered address pair, a < b
  uint64_t b = 0;
  tracer::DepKind kind = tracer::DepKind::RAW;
  double score = 0;  // max over windows and runs
};

// Scores every candidate pair of every sample and keeps the maximum score per
// address pair. Pure over the model; parallel over samples.
std::vector<PairScore> predict_dependencies(const model::Model& m,
                                            const std::vector<enc::Sample>& samples, int threads);

std::vector<tracer::DependencyRecord> apply_threshold(const std::vector<PairScore>& scores,
                                                      double threshold);

std::vector<SweepRow> sweep_thresholds(const std::vector<PairScore>& scores,
                                       const std::vector<tracer::DependencyRecord>& reference,
                                       const std::vector<double>& thresholds);

struct FinetuneResult {
  std::vector<double> loss_curve;  // mean per-sample loss per step
  std::vector<std::string> train_functions;
  std::vector<std::string> eval_functions;
  EvalReport eval;              // held-out functions at cfg.threshold
  std::vector<SweepRow> sweep;  // held-out functions, thresholds 0.05..0.95
};

// Trains dependency prediction on the static forward (the trace path is never
// computed) with binary cross-entropy over labeled pairs; functions with no
// candidate pairs are skipped with a note on stderr. The held-out fraction of
// functions is chosen by seed and evaluated after the last epoch.
FinetuneResult finetune_dependency(model::Model& m, const std::vector<enc::Sample>& samples,
                                   const FinetuneConfig& cfg);

// ---- score file ------------------------------------------------------------

// `<a-hex> <b-hex> <KIND> <score>` lines, score with six fixed decimals.
std::string format_scores(const std::vector<PairScore>& scores);
std::vector<PairScore> parse_scores(std::string_view text);

}  // namespace memdep::train
