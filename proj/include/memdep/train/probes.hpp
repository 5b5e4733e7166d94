#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memdep/enc/dataset.hpp"
#include "memdep/model/model.hpp"
#include "memdep/train/metrics.hpp"

namespace memdep::train {

struct ProbeConfig {
  int epochs = 10;
  int batch = 16;
  double lr = 1e-3;
  double eval_fraction = 0.2;
  int threads = 1;
  uint64_t seed = 0;

  void validate() const;
};

// Probes freeze the backbone: features are extracted once with gradients off,
// then only the probed head's parameters are trained.

struct RegionProbeResult {
  std::vector<double> loss_curve;
  Confusion cm;  // held-out, 4 region classes
};

// Linear-probe training of the region head on per-token features at the
// labeled memory-accessing positions.
RegionProbeResult probe_region(model::Model& m, const std::vector<enc::Sample>& samples,
                               const ProbeConfig& cfg);

struct SignatureProbeResult {
  std::vector<double> loss_curve;
  Confusion arity;   // held-out, 8 classes
  Confusion args[3]; // 7 classes each, positions present in the label only
  Confusion ret;     // 8 classes (void included)
};

// caller=true probes call sites (feature: the call token); caller=false
// probes whole functions (feature: mean-pooled sequence).
SignatureProbeResult probe_signature(model::Model& m, const std::vector<enc::Sample>& samples,
                                     bool caller, const ProbeConfig& cfg);

}  // namespace memdep::train
