#pragma once

#include <vector>

#include "memdep/tensor/tensor.hpp"

namespace memdep::train::detail {

// Dense per-parameter gradient sums, indexed by parameter creation order.
// Workers each fill one accumulator; merging in worker order keeps results
// independent of thread scheduling.
class GradAccum {
 public:
  explicit GradAccum(const tensor::ParamStore& store)
      : sums_(store.names().size()) {}

  void add_from(const tensor::Tape& tp, const tensor::ParamStore& store) {
    const auto& names = store.names();
    for (size_t i = 0; i < names.size(); ++i) {
      const auto* g = tp.maybe_grad(store.get(names[i]));
      if (!g) continue;
      auto& sum = sums_[i];
      if (sum.empty()) sum.assign(g->size(), 0.0);
      for (size_t k = 0; k < g->size(); ++k) sum[k] += (*g)[k];
    }
  }

  void merge(const GradAccum& other) {
    for (size_t i = 0; i < sums_.size(); ++i) {
      const auto& o = other.sums_[i];
      if (o.empty()) continue;
      auto& sum = sums_[i];
      if (sum.empty()) sum.assign(o.size(), 0.0);
      for (size_t k = 0; k < o.size(); ++k) sum[k] += o[k];
    }
  }

  void scale(double s) {
    for (auto& sum : sums_)
      for (double& v : sum) v *= s;
  }

  // One optimizer step in parameter-creation order; parameters that gathered
  // no gradient are left untouched.
  void apply(tensor::Adam& opt, tensor::ParamStore& store) const {
    opt.tick();
    const auto& names = store.names();
    for (size_t i = 0; i < names.size(); ++i) {
      if (sums_[i].empty()) continue;
      opt.update(store.get(names[i]), sums_[i]);
    }
  }

 private:
  std::vector<std::vector<double>> sums_;
};

}  // namespace memdep::train::detail
