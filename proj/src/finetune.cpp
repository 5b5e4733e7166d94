#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

#include "memdep/train/train.hpp"
#include "memdep/util/common.hpp"
#include "memdep/util/parallel.hpp"
#include "train_detail.hpp"

namespace memdep::train {

void FinetuneConfig::validate() const {
  if (epochs < 1) throw ConfigError("finetune epochs must be >= 1");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (lr <= 0) throw ConfigError("learning rate must be positive");
  if (threshold < 0 || threshold > 1) throw ConfigError("threshold must be in [0,1]");
  if (neg_ratio < 0) throw ConfigError("negative ratio must be >= 0");
  if (eval_fraction < 0 || eval_fraction >= 1) throw ConfigError("eval fraction must be in [0,1)");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

std::vector<SamplePairs> build_pair_sets(const std::vector<const enc::Sample*>& fn_samples,
                                         int fn_index, int neg_ratio, uint64_t seed) {
  std::vector<SamplePairs> out;
  struct NegRef {
    size_t sample;
    int i, j;
  };
  std::vector<NegRef> negatives;
  size_t positives = 0;
  for (size_t idx = 0; idx < fn_samples.size(); ++idx) {
    const enc::Sample* s = fn_samples[idx];
    SamplePairs sp;
    sp.sample = s;
    std::set<std::pair<int, int>> pos;
    for (const auto& d : s->deps) {
      sp.pairs.push_back({d.i, d.j, d.bit});
      if (d.bit) pos.insert({d.i, d.j});
    }
    positives += pos.size();
    for (const auto& c : candidate_pairs(*s))
      if (!pos.count({c.i, c.j})) negatives.push_back({idx, c.i, c.j});
    out.push_back(std::move(sp));
  }
  size_t cap = positives * static_cast<size_t>(neg_ratio);
  if (negatives.size() > cap) {
    Rng rng = Rng::stream(seed, "neg", static_cast<uint64_t>(fn_index));
    std::vector<NegRef> kept;
    kept.reserve(cap);
    for (int k : rng.sample_indices(static_cast<int>(negatives.size()), static_cast<int>(cap)))
      kept.push_back(negatives[static_cast<size_t>(k)]);
    negatives.swap(kept);
  }
  for (const auto& n : negatives) out[n.sample].pairs.push_back({n.i, n.j, 0});
  out.erase(std::remove_if(out.begin(), out.end(),
                           [](const SamplePairs& sp) { return sp.pairs.empty(); }),
            out.end());
  return out;
}

tensor::Tensor pair_loss(tensor::Tape& tp, const model::Model& m, const SamplePairs& sp) {
  if (sp.pairs.empty()) throw std::invalid_argument("sample has no pairs");
  auto el = m.forward_static(tp, *sp.sample);
  std::vector<tensor::Tensor> logits;
  std::vector<double> targets;
  logits.reserve(sp.pairs.size());
  for (const auto& p : sp.pairs) {
    logits.push_back(m.dep_logit(tp, el, p.i, p.j));
    targets.push_back(static_cast<double>(p.label));
  }
  return tensor::bce_with_logits(tp, tensor::concat_rows(tp, logits), targets);
}

namespace {

// Static kind annotation for a labeled pair, from the window's direction list.
tracer::DepKind pair_kind(const enc::Sample& s, int i, int j) {
  auto dir_at = [&](int pos) {
    for (const auto& [p, d] : s.mems)
      if (p == pos) return d;
    throw std::logic_error("pair endpoint is not a memory instruction");
  };
  bool wi = dir_at(i) != enc::MemDir::read;
  bool wj = dir_at(j) != enc::MemDir::read;
  if (wi && wj) return tracer::DepKind::WAW;
  return wi ? tracer::DepKind::RAW : tracer::DepKind::WAR;
}

struct FnGroup {
  std::string name;
  std::vector<const enc::Sample*> samples;
};

std::vector<FnGroup> group_by_function(const std::vector<enc::Sample>& samples) {
  std::vector<FnGroup> groups;
  std::map<std::string, size_t> index;
  for (const auto& s : samples) {
    auto [it, fresh] = index.emplace(s.func, groups.size());
    if (fresh) groups.push_back({s.func, {}});
    groups[it->second].samples.push_back(&s);
  }
  return groups;
}

}  // namespace

std::vector<PairScore> predict_dependencies(const model::Model& m,
                                            const std::vector<enc::Sample>& samples, int threads) {
  std::vector<const enc::Sample*> ptrs;
  ptrs.reserve(samples.size());
  for (const auto& s : samples) ptrs.push_back(&s);

  struct Raw {
    uint64_t a, b;
    tracer::DepKind kind;
    double score;
  };
  std::vector<std::vector<Raw>> worker_out(static_cast<size_t>(std::max(threads, 1)));
  parallel_for(static_cast<int>(ptrs.size()), threads, [&](int i, int worker) {
    const enc::Sample& s = *ptrs[static_cast<size_t>(i)];
    tensor::Tape tp;
    tp.set_enabled(false);
    auto el = m.forward_static(tp, s);
    for (const auto& c : candidate_pairs(s)) {
      double logit = m.dep_logit(tp, el, c.i, c.j).item();
      double score = 1.0 / (1.0 + std::exp(-logit));
      uint64_t a = s.address_at(c.i), b = s.address_at(c.j);
      if (a > b) std::swap(a, b);
      worker_out[static_cast<size_t>(worker)].push_back({a, b, c.kind, score});
    }
  });

  std::map<std::pair<uint64_t, uint64_t>, PairScore> best;
  for (const auto& rows : worker_out)
    for (const auto& r : rows) {
      auto [it, fresh] = best.emplace(std::pair{r.a, r.b}, PairScore{r.a, r.b, r.kind, r.score});
      if (!fresh && r.score > it->second.score) it->second.score = r.score;
    }
  std::vector<PairScore> out;
  out.reserve(best.size());
  for (const auto& [k, v] : best) out.push_back(v);
  return out;
}

std::vector<tracer::DependencyRecord> apply_threshold(const std::vector<PairScore>& scores,
                                                      double threshold) {
  std::vector<tracer::DependencyRecord> out;
  for (const auto& s : scores)
    if (s.score >= threshold) out.push_back({s.a, s.b, s.kind, 0, 0});
  return out;
}

std::vector<SweepRow> sweep_thresholds(const std::vector<PairScore>& scores,
                                       const std::vector<tracer::DependencyRecord>& reference,
                                       const std::vector<double>& thresholds) {
  std::vector<SweepRow> rows;
  for (double t : thresholds) {
    auto rep = evaluate_dependencies(apply_threshold(scores, t), reference, t);
    rows.push_back({t, rep.total.detect, rep.total.miss, rep.total.fp});
  }
  return rows;
}

FinetuneResult finetune_dependency(model::Model& m, const std::vector<enc::Sample>& samples,
                                   const FinetuneConfig& cfg) {
  cfg.validate();
  FinetuneResult res;
  auto groups = group_by_function(samples);

  std::vector<size_t> order(groups.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng = Rng::stream(cfg.seed, "split");
  split_rng.shuffle(order);
  size_t eval_count = static_cast<size_t>(cfg.eval_fraction * static_cast<double>(groups.size()));
  std::set<size_t> eval_set(order.begin(), order.begin() + static_cast<long>(eval_count));
  for (size_t g = 0; g < groups.size(); ++g)
    (eval_set.count(g) ? res.eval_functions : res.train_functions).push_back(groups[g].name);

  std::vector<SamplePairs> units;
  for (size_t g = 0; g < groups.size(); ++g) {
    if (eval_set.count(g)) continue;
    bool any_candidates = false;
    for (const auto* s : groups[g].samples)
      if (!candidate_pairs(*s).empty()) any_candidates = true;
    if (!any_candidates) {
      std::fprintf(stderr, "note: function %s has no memory pairs, skipped\n",
                   groups[g].name.c_str());
      continue;
    }
    for (auto& sp :
         build_pair_sets(groups[g].samples, static_cast<int>(g), cfg.neg_ratio, cfg.seed))
      units.push_back(std::move(sp));
  }

  const auto& store = m.params();
  tensor::Adam opt(cfg.lr);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<size_t> visit(units.size());
    for (size_t i = 0; i < visit.size(); ++i) visit[i] = i;
    Rng order_rng = Rng::stream(cfg.seed, "order", static_cast<uint64_t>(epoch));
    order_rng.shuffle(visit);

    for (size_t start = 0; start < visit.size(); start += static_cast<size_t>(cfg.batch)) {
      size_t end = std::min(start + static_cast<size_t>(cfg.batch), visit.size());
      size_t count = end - start;
      std::vector<detail::GradAccum> accums(static_cast<size_t>(std::max(cfg.threads, 1)),
                                            detail::GradAccum(store));
      std::vector<double> losses(count, 0.0);
      parallel_for(static_cast<int>(count), cfg.threads, [&](int i, int worker) {
        const SamplePairs& sp = units[visit[start + static_cast<size_t>(i)]];
        tensor::Tape tp;
        auto loss = pair_loss(tp, m, sp);
        tp.backward(loss);
        losses[static_cast<size_t>(i)] = loss.item();
        accums[static_cast<size_t>(worker)].add_from(tp, store);
      });
      auto& total = accums[0];
      for (size_t w = 1; w < accums.size(); ++w) total.merge(accums[w]);
      total.scale(1.0 / static_cast<double>(count));
      total.apply(opt, m.params());
      double sum = 0.0;
      for (double l : losses) sum += l;
      res.loss_curve.push_back(sum / static_cast<double>(count));
    }
  }

  std::vector<enc::Sample> eval_samples;
  for (size_t g = 0; g < groups.size(); ++g)
    if (eval_set.count(g))
      for (const auto* s : groups[g].samples) eval_samples.push_back(*s);

  std::map<std::pair<uint64_t, uint64_t>, tracer::DepKind> ref_pairs;
  for (const auto& s : eval_samples)
    for (const auto& d : s.deps) {
      if (!d.bit) continue;
      uint64_t a = s.address_at(d.i), b = s.address_at(d.j);
      if (a > b) std::swap(a, b);
      ref_pairs.emplace(std::pair{a, b}, pair_kind(s, d.i, d.j));
    }
  std::vector<tracer::DependencyRecord> reference;
  for (const auto& [pair, kind] : ref_pairs) reference.push_back({pair.first, pair.second, kind, 0, 0});

  auto scores = predict_dependencies(m, eval_samples, cfg.threads);
  res.eval = evaluate_dependencies(apply_threshold(scores, cfg.threshold), reference, cfg.threshold);
  std::vector<double> grid;
  for (int i = 1; i <= 19; ++i) grid.push_back(0.05 * i);
  res.sweep = sweep_thresholds(scores, reference, grid);
  return res;
}

// ---- score file ------------------------------------------------------------

std::string format_scores(const std::vector<PairScore>& scores) {
  std::string out;
  char buf[32];
  for (const auto& s : scores) {
    out += hex_u64(s.a);
    out += ' ';
    out += hex_u64(s.b);
    out += ' ';
    out += tracer::dep_kind_name(s.kind);
    std::snprintf(buf, sizeof buf, " %.6f\n", s.score);
    out += buf;
  }
  return out;
}

std::vector<PairScore> parse_scores(std::string_view text) {
  std::vector<PairScore> out;
  int lineno = 0;
  for (const auto& raw : split(text, '\n')) {
    ++lineno;
    auto line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, ' ');
    f.erase(std::remove(f.begin(), f.end(), std::string()), f.end());
    if (f.size() != 4)
      throw std::runtime_error("score line " + std::to_string(lineno) + ": expected 4 fields");
    auto kind = tracer::dep_kind_from_name(f[2]);
    if (!kind)
      throw std::runtime_error("score line " + std::to_string(lineno) + ": bad kind " + f[2]);
    double score = 0;
    auto [end, ec] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), score);
    if (ec != std::errc() || end != f[3].data() + f[3].size())
      throw std::runtime_error("score line " + std::to_string(lineno) + ": bad score " + f[3]);
    out.push_back({parse_hex(f[0]), parse_hex(f[1]), *kind, score});
  }
  return out;
}

}  // namespace memdep::train
