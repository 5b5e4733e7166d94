#pragma once

#include <optional>
#include <string>

#include "memdep/enc/encoding.hpp"
#include "memdep/tensor/tensor.hpp"
#include "memdep/util/common.hpp"

namespace memdep::model {

struct ModelConfig {
  int d = 128;
  int layers = 8;        // total self-attention layers
  int fusion_layer = 1;  // fusion applied after this many layers; 1 <= l < layers
  int heads = 8;
  int conv_channels = 16;  // per kernel width; 8 widths concatenate to 8*conv_channels
  double dropout = 0.0;
  bool static_address_fusion = true;
  int vocab_size = 0;
  int max_pos = 16;   // position-in-instruction embedding rows
  int max_len = 512;  // hard cap on tokens per sample

  void validate() const;
  static ModelConfig from_config(KvConfig& cfg, int vocab_size);
};

// The sequence model: summed (code, position, memflag) embeddings, a shared
// convolution+highway byte-value encoder for the trace and address channels,
// gated fusion after `fusion_layer` attention layers, and prediction heads.
// All parameters (every head included) are created at construction so a
// checkpoint always carries the complete set.
class Model {
 public:
  Model(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  tensor::ParamStore& params() { return params_; }
  const tensor::ParamStore& params() const { return params_; }

  struct PretrainOut {
    tensor::Tensor code_logits;  // |MI| x vocab
    tensor::Tensor value_pred;   // |MT| x 8
  };
  // Full three-channel forward on a masked sample; heads applied at the
  // masked positions.
  PretrainOut forward_pretrain(tensor::Tape& tp, const enc::Sample& s,
                               Rng* dropout_rng = nullptr) const;

  // Static forward: the trace path is never touched; the address channel is
  // fused only when configured.
  tensor::Tensor forward_static(tensor::Tape& tp, const enc::Sample& s,
                                Rng* dropout_rng = nullptr) const;

  // Dependency logit for the instructions anchored at token positions i and j.
  tensor::Tensor dep_logit(tensor::Tape& tp, const tensor::Tensor& el, int i, int j) const;

  tensor::Tensor region_logits(tensor::Tape& tp, const tensor::Tensor& el) const;  // n x 4

  struct SigLogits {
    tensor::Tensor arity;  // 1 x 8
    tensor::Tensor arg1, arg2, arg3;  // 1 x 7 each
    tensor::Tensor ret;    // 1 x 8
  };
  SigLogits signature_logits(tensor::Tape& tp, const tensor::Tensor& el,
                             std::optional<int> site, bool caller) const;

 private:
  tensor::Tensor embed_tokens(tensor::Tape& tp, const enc::Sample& s) const;
  tensor::Tensor encode_values(tensor::Tape& tp, const tensor::Tensor& bytes) const;
  tensor::Tensor trace_embedding(tensor::Tape& tp, const enc::Sample& s) const;
  tensor::Tensor address_embedding(tensor::Tape& tp, const enc::Sample& s) const;
  tensor::Tensor attention_layer(tensor::Tape& tp, const tensor::Tensor& x, int layer,
                                 Rng* dropout_rng) const;
  tensor::Tensor mlp2(tensor::Tape& tp, const tensor::Tensor& x, const std::string& prefix) const;
  tensor::Tensor fuse(tensor::Tape& tp, const tensor::Tensor& el, const tensor::Tensor* et,
                      const tensor::Tensor* ea) const;
  tensor::Tensor forward_core(tensor::Tape& tp, const enc::Sample& s, bool use_trace,
                              bool use_addr, Rng* dropout_rng) const;
  tensor::Tensor dropout(tensor::Tape& tp, const tensor::Tensor& x, Rng* rng) const;

  ModelConfig cfg_;
  tensor::ParamStore params_;
};

}  // namespace memdep::model
