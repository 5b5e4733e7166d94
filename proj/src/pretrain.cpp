#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "memdep/train/train.hpp"
#include "memdep/util/parallel.hpp"
#include "train_detail.hpp"

namespace memdep::train {

void PretrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("pretrain epochs must be >= 1");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (lr <= 0) throw ConfigError("learning rate must be positive");
  if (alpha <= 0) throw ConfigError("alpha must be positive");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (!(rate_lo >= 0 && rate_lo <= rate_hi && rate_hi <= 1))
    throw ConfigError("mask rate bounds must satisfy 0 <= lo <= hi <= 1");
}

tensor::Tensor pretrain_sample_loss(tensor::Tape& tp, const model::Model& m, const enc::Sample& s,
                                    double alpha) {
  auto out = m.forward_pretrain(tp, s);
  tensor::Tensor loss;
  if (!s.mi.empty()) loss = tensor::cross_entropy_rows(tp, out.code_logits, s.code_targets);
  if (!s.mt.empty()) {
    int rows = static_cast<int>(s.mt.size());
    tensor::Tensor target({rows, 8});
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < 8; ++c)
        target.at2(r, c) = s.trace_targets[static_cast<size_t>(r)][static_cast<size_t>(c)] / 256.0;
    auto diff = tensor::sub(tp, out.value_pred, target);
    auto term = tensor::scale(tp, tensor::sum_all(tp, tensor::mul(tp, diff, diff)), alpha);
    loss = loss.defined() ? tensor::add(tp, loss, term) : term;
  }
  if (!loss.defined()) loss = tensor::Tensor::scalar(0.0);
  return loss;
}

double pretrain_step(model::Model& m, tensor::Adam& opt,
                     const std::vector<const enc::Sample*>& batch, double alpha, int threads) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const auto& store = m.params();
  std::vector<detail::GradAccum> accums(static_cast<size_t>(std::max(threads, 1)),
                                        detail::GradAccum(store));
  std::vector<double> losses(batch.size(), 0.0);
  parallel_for(static_cast<int>(batch.size()), threads, [&](int i, int worker) {
    tensor::Tape tp;
    auto loss = pretrain_sample_loss(tp, m, *batch[static_cast<size_t>(i)], alpha);
    tp.backward(loss);
    losses[static_cast<size_t>(i)] = loss.item();
    accums[static_cast<size_t>(worker)].add_from(tp, store);
  });
  auto& total = accums[0];
  for (size_t w = 1; w < accums.size(); ++w) total.merge(accums[w]);
  total.scale(1.0 / static_cast<double>(batch.size()));
  total.apply(opt, m.params());
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(batch.size());
}

PretrainResult pretrain(model::Model& m, std::vector<enc::Sample>& corpus,
                        const PretrainConfig& cfg) {
  cfg.validate();
  PretrainResult res;
  tensor::Adam opt(cfg.lr);
  Rng mode_rng = Rng::stream(cfg.seed, "mode");
  constexpr enc::MaskMode kModes[3] = {enc::MaskMode::interpret, enc::MaskMode::synthesize,
                                       enc::MaskMode::both};

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    enc::order_by_length(corpus);
    double rate = enc::curriculum_rate(epoch, cfg.epochs, cfg.rate_lo, cfg.rate_hi);
    EpochAudit audit;
    audit.epoch = epoch;
    audit.rate = rate;

    for (size_t start = 0; start < corpus.size(); start += static_cast<size_t>(cfg.batch)) {
      size_t end = std::min(start + static_cast<size_t>(cfg.batch), corpus.size());
      enc::MaskMode mode = kModes[mode_rng.below(3)];
      std::vector<const enc::Sample*> batch;
      batch.reserve(end - start);
      for (size_t i = start; i < end; ++i) {
        enc::Sample& s = corpus[i];
        Rng mask_rng = Rng::stream(cfg.seed, "mask",
                                   (static_cast<uint64_t>(epoch) << 32) | static_cast<uint64_t>(i));
        enc::mask_sample(s, rate, mode, mask_rng);

        long long maskable_code = 0, maskable_trace = 0;
        for (const auto& t : s.code)
          if (t.c != enc::Vocab::kPad) ++maskable_code;
        for (const auto& b : s.trace)
          if (!enc::is_dummy(b)) ++maskable_trace;
        if (mode != enc::MaskMode::interpret) {
          audit.expected_code += static_cast<long long>(rate * static_cast<double>(maskable_code));
          audit.realized_code += static_cast<long long>(s.mi.size());
        }
        if (mode != enc::MaskMode::synthesize) {
          audit.expected_trace += static_cast<long long>(rate * static_cast<double>(maskable_trace));
          audit.realized_trace += static_cast<long long>(s.mt.size());
        }
        batch.push_back(&s);
      }
      res.loss_curve.push_back(pretrain_step(m, opt, batch, cfg.alpha, cfg.threads));
      for (size_t i = start; i < end; ++i) enc::unmask_sample(corpus[i]);
    }
    res.audits.push_back(audit);
  }
  return res;
}

}  // namespace memdep::train
