#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "memdep/train/probes.hpp"
#include "memdep/util/parallel.hpp"
#include "train_detail.hpp"

namespace memdep::train {

void ProbeConfig::validate() const {
  if (epochs < 1) throw ConfigError("probe epochs must be >= 1");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (lr <= 0) throw ConfigError("learning rate must be positive");
  if (eval_fraction < 0 || eval_fraction >= 1) throw ConfigError("eval fraction must be in [0,1)");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

namespace {

// Membership of each function in the held-out split, chosen by seed over the
// functions in first-appearance order.
std::set<std::string> eval_split(const std::vector<enc::Sample>& samples, double fraction,
                                 uint64_t seed) {
  std::vector<std::string> fns;
  std::set<std::string> seen;
  for (const auto& s : samples)
    if (seen.insert(s.func).second) fns.push_back(s.func);
  std::vector<size_t> order(fns.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = Rng::stream(seed, "split");
  rng.shuffle(order);
  size_t count = static_cast<size_t>(fraction * static_cast<double>(fns.size()));
  std::set<std::string> out;
  for (size_t i = 0; i < count; ++i) out.insert(fns[order[i]]);
  return out;
}

int argmax_row(const tensor::Tensor& t) {
  int best = 0;
  for (int c = 1; c < t.cols(); ++c)
    if (t.at2(0, c) > t.at2(0, best)) best = c;
  return best;
}

tensor::Tensor rows_tensor(const std::vector<const std::vector<double>*>& rows, int d) {
  tensor::Tensor out({static_cast<int>(rows.size()), d});
  for (size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < d; ++c) out.at2(static_cast<int>(r), c) = (*rows[r])[static_cast<size_t>(c)];
  return out;
}

}  // namespace

RegionProbeResult probe_region(model::Model& m, const std::vector<enc::Sample>& samples,
                               const ProbeConfig& cfg) {
  cfg.validate();
  int d = m.config().d;

  struct Item {
    const enc::Sample* sample;
    std::vector<double> feat;
    int cls;
  };
  std::vector<std::vector<Item>> worker_items(static_cast<size_t>(std::max(cfg.threads, 1)));
  parallel_for(static_cast<int>(samples.size()), cfg.threads, [&](int i, int worker) {
    const enc::Sample& s = samples[static_cast<size_t>(i)];
    if (s.regions.empty()) return;
    tensor::Tape tp;
    tp.set_enabled(false);
    auto el = m.forward_static(tp, s);
    for (const auto& [pos, cls] : s.regions) {
      Item item{&s, std::vector<double>(static_cast<size_t>(d)), cls};
      for (int c = 0; c < d; ++c) item.feat[static_cast<size_t>(c)] = el.at2(pos, c);
      worker_items[static_cast<size_t>(worker)].push_back(std::move(item));
    }
  });
  std::vector<Item> items;
  for (auto& w : worker_items)
    for (auto& it : w) items.push_back(std::move(it));

  auto held_out = eval_split(samples, cfg.eval_fraction, cfg.seed);
  std::vector<size_t> train_idx, eval_idx;
  for (size_t i = 0; i < items.size(); ++i)
    (held_out.count(items[i].sample->func) ? eval_idx : train_idx).push_back(i);

  RegionProbeResult res;
  res.cm = Confusion(4);
  tensor::Adam opt(cfg.lr);
  const auto& store = m.params();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto visit = train_idx;
    Rng order_rng = Rng::stream(cfg.seed, "order", static_cast<uint64_t>(epoch));
    order_rng.shuffle(visit);
    for (size_t start = 0; start < visit.size(); start += static_cast<size_t>(cfg.batch)) {
      size_t end = std::min(start + static_cast<size_t>(cfg.batch), visit.size());
      std::vector<const std::vector<double>*> rows;
      std::vector<int> targets;
      for (size_t i = start; i < end; ++i) {
        rows.push_back(&items[visit[i]].feat);
        targets.push_back(items[visit[i]].cls);
      }
      tensor::Tape tp;
      auto logits = m.region_logits(tp, rows_tensor(rows, d));
      auto loss = tensor::cross_entropy_rows(tp, logits, targets);
      tp.backward(loss);
      detail::GradAccum accum(store);
      accum.add_from(tp, store);
      accum.scale(1.0 / static_cast<double>(rows.size()));
      accum.apply(opt, m.params());
      res.loss_curve.push_back(loss.item() / static_cast<double>(rows.size()));
    }
  }

  for (size_t i : eval_idx) {
    tensor::Tape tp;
    tp.set_enabled(false);
    auto logits = m.region_logits(tp, rows_tensor({&items[i].feat}, d));
    res.cm.add(items[i].cls, argmax_row(logits));
  }
  return res;
}

SignatureProbeResult probe_signature(model::Model& m, const std::vector<enc::Sample>& samples,
                                     bool caller, const ProbeConfig& cfg) {
  cfg.validate();
  int d = m.config().d;

  struct Item {
    const enc::Sample* sample;
    std::vector<double> feat;
    enc::SigLabel sig;
  };
  std::vector<std::vector<Item>> worker_items(static_cast<size_t>(std::max(cfg.threads, 1)));
  parallel_for(static_cast<int>(samples.size()), cfg.threads, [&](int i, int worker) {
    const enc::Sample& s = samples[static_cast<size_t>(i)];
    if (caller ? s.sites.empty() : !s.sig.has_value()) return;
    tensor::Tape tp;
    tp.set_enabled(false);
    auto el = m.forward_static(tp, s);
    auto row_of = [&](const tensor::Tensor& one_row) {
      std::vector<double> feat(static_cast<size_t>(d));
      for (int c = 0; c < d; ++c) feat[static_cast<size_t>(c)] = one_row.at2(0, c);
      return feat;
    };
    if (caller) {
      for (const auto& [pos, sig] : s.sites) {
        auto row = tensor::slice_rows(tp, el, pos, pos + 1);
        worker_items[static_cast<size_t>(worker)].push_back({&s, row_of(row), sig});
      }
    } else {
      auto pooled = tensor::mean_rows(tp, el);
      worker_items[static_cast<size_t>(worker)].push_back({&s, row_of(pooled), *s.sig});
    }
  });
  std::vector<Item> items;
  for (auto& w : worker_items)
    for (auto& it : w) items.push_back(std::move(it));

  auto held_out = eval_split(samples, cfg.eval_fraction, cfg.seed);
  std::vector<size_t> train_idx, eval_idx;
  for (size_t i = 0; i < items.size(); ++i)
    (held_out.count(items[i].sample->func) ? eval_idx : train_idx).push_back(i);

  SignatureProbeResult res;
  res.arity = Confusion(8);
  for (auto& a : res.args) a = Confusion(7);
  res.ret = Confusion(8);

  auto item_logits = [&](tensor::Tape& tp, const Item& item) {
    auto feat = rows_tensor({&item.feat}, d);
    return m.signature_logits(tp, feat, caller ? std::optional<int>(0) : std::nullopt, caller);
  };

  tensor::Adam opt(cfg.lr);
  const auto& store = m.params();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto visit = train_idx;
    Rng order_rng = Rng::stream(cfg.seed, "order", static_cast<uint64_t>(epoch));
    order_rng.shuffle(visit);
    for (size_t start = 0; start < visit.size(); start += static_cast<size_t>(cfg.batch)) {
      size_t end = std::min(start + static_cast<size_t>(cfg.batch), visit.size());
      size_t count = end - start;
      tensor::Tape tp;
      tensor::Tensor loss;
      for (size_t i = start; i < end; ++i) {
        const Item& item = items[visit[i]];
        auto sl = item_logits(tp, item);
        auto add_ce = [&](const tensor::Tensor& logits, int target) {
          auto ce = tensor::cross_entropy_rows(tp, logits, {target});
          loss = loss.defined() ? tensor::add(tp, loss, ce) : ce;
        };
        add_ce(sl.arity, item.sig.arity);
        const tensor::Tensor* arg_heads[3] = {&sl.arg1, &sl.arg2, &sl.arg3};
        for (int k = 0; k < 3 && k < item.sig.arity; ++k)
          if (item.sig.args[k] >= 0) add_ce(*arg_heads[k], item.sig.args[k]);
        add_ce(sl.ret, item.sig.ret);
      }
      tp.backward(loss);
      detail::GradAccum accum(store);
      accum.add_from(tp, store);
      accum.scale(1.0 / static_cast<double>(count));
      accum.apply(opt, m.params());
      res.loss_curve.push_back(loss.item() / static_cast<double>(count));
    }
  }

  for (size_t i : eval_idx) {
    const Item& item = items[i];
    tensor::Tape tp;
    tp.set_enabled(false);
    auto sl = item_logits(tp, item);
    res.arity.add(item.sig.arity, argmax_row(sl.arity));
    const tensor::Tensor* arg_heads[3] = {&sl.arg1, &sl.arg2, &sl.arg3};
    for (int k = 0; k < 3 && k < item.sig.arity; ++k)
      if (item.sig.args[k] >= 0) res.args[k].add(item.sig.args[k], argmax_row(*arg_heads[k]));
    res.ret.add(item.sig.ret, argmax_row(sl.ret));
  }
  return res;
}

}  // namespace memdep::train
