#pragma once

#include <array>
#include <string>
#include <vector>

#include "memdep/tracer/tracer.hpp"

namespace memdep::train {

// Set arithmetic over dependency pairs. Pairs are identified by their
// unordered address pair; the kind is an annotation that routes counts into
// the per-kind breakdown (reference kind for detect and miss, predicted kind
// for false positives).
struct DepCounts {
  int detect = 0;
  int miss = 0;
  int fp = 0;

  double precision() const;  // detect / (detect + fp), 0 when undefined
  double recall() const;     // detect / (detect + miss), 0 when undefined
  double f1() const;
};

struct EvalReport {
  double threshold = 0.5;
  DepCounts total;
  std::array<DepCounts, 3> by_kind;  // indexed by tracer::DepKind
};

EvalReport evaluate_dependencies(const std::vector<tracer::DependencyRecord>& predicted,
                                 const std::vector<tracer::DependencyRecord>& reference,
                                 double threshold = 0.5);

// Aligned table for humans; `eval kind=... detect=...` lines for machines.
// Both print ratios with four fixed decimals so equal reports are
// byte-identical.
std::string format_report(const EvalReport& r);
std::string format_report_machine(const EvalReport& r);

struct SweepRow {
  double threshold = 0;
  int detect = 0;
  int miss = 0;
  int fp = 0;
};

// `<threshold> <detect> <miss> <fp>` rows.
std::string format_sweep(const std::vector<SweepRow>& rows);

// k-class confusion matrix; truth selects the row, prediction the column.
struct Confusion {
  int k = 0;
  std::vector<int> cells;

  explicit Confusion(int classes = 0)
      : k(classes), cells(static_cast<size_t>(classes) * static_cast<size_t>(classes), 0) {}

  void add(int truth, int predicted);
  int at(int truth, int predicted) const;
  int total() const;
  double accuracy() const;
  // Per-class F1 averaged over the classes with any support or any
  // prediction; absent classes do not dilute the mean.
  double macro_f1() const;
};

std::string format_confusion(const Confusion& c, const std::vector<std::string>& names);

}  // namespace memdep::train
