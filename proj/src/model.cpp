#include "memdep/model/model.hpp"

#include <cmath>
#include <stdexcept>

namespace memdep::model {

using tensor::Tensor;
using tensor::Tape;

void ModelConfig::validate() const {
  if (d <= 0 || layers <= 0 || heads <= 0 || conv_channels <= 0)
    throw ConfigError("model dimensions must be positive");
  if (fusion_layer < 1 || fusion_layer >= layers)
    throw ConfigError("fusion-layer must satisfy 1 <= l < layers");
  if (d % heads != 0) throw ConfigError("d must be divisible by heads");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0,1)");
  if (vocab_size <= 0) throw ConfigError("vocabulary size not set");
}

ModelConfig ModelConfig::from_config(KvConfig& cfg, int vocab_size) {
  ModelConfig m;
  m.d = static_cast<int>(cfg.get_int("d", m.d));
  m.layers = static_cast<int>(cfg.get_int("layers", m.layers));
  m.fusion_layer = static_cast<int>(cfg.get_int("fusion-layer", m.fusion_layer));
  m.heads = static_cast<int>(cfg.get_int("heads", m.heads));
  m.conv_channels = static_cast<int>(cfg.get_int("conv-channels", m.conv_channels));
  m.dropout = cfg.get_real("dropout", m.dropout);
  m.static_address_fusion = cfg.get_bool("static-address-fusion", m.static_address_fusion);
  m.max_len = static_cast<int>(cfg.get_int("max-len", m.max_len));
  m.vocab_size = vocab_size;
  m.validate();
  return m;
}

namespace {

constexpr double kInitStd = 0.02;

void create_mlp2(tensor::ParamStore& ps, const std::string& prefix, int in, int hidden, int out) {
  ps.create(prefix + ".w1", {in, hidden});
  ps.create(prefix + ".b1", {1, hidden});
  ps.create(prefix + ".w2", {hidden, out});
  ps.create(prefix + ".b2", {1, out});
}

}  // namespace

Model::Model(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  int d = cfg_.d, c = cfg_.conv_channels, v = cfg_.vocab_size;

  params_.create("embed.code", {v, d});
  params_.create("embed.pos", {cfg_.max_pos, d});
  params_.create("embed.mem", {2, d});

  for (int w = 1; w <= 8; ++w) {
    params_.create("value.conv" + std::to_string(w) + ".w", {w, c});
    params_.create("value.conv" + std::to_string(w) + ".b", {1, c});
  }
  params_.create("value.proj.w", {8 * c, d});
  params_.create("value.proj.b", {1, d});
  params_.create("value.hw.wt", {d, d});
  params_.create("value.hw.bt", {1, d});
  params_.create("value.hw.wh", {d, d});
  params_.create("value.hw.bh", {1, d});
  params_.create("value.dummy", {1, d});
  params_.create("value.mask", {1, d});

  create_mlp2(params_, "fusion.gt", 2 * d, d, d);
  create_mlp2(params_, "fusion.ga", 2 * d, d, d);
  create_mlp2(params_, "fusion.vt", d, d, d);
  create_mlp2(params_, "fusion.va", d, d, d);

  for (int i = 0; i < cfg_.layers; ++i) {
    std::string p = "layer" + std::to_string(i);
    params_.create(p + ".ln1.g", {1, d});
    params_.create(p + ".ln1.b", {1, d});
    params_.create(p + ".attn.wq", {d, d});
    params_.create(p + ".attn.bq", {1, d});
    params_.create(p + ".attn.wk", {d, d});
    params_.create(p + ".attn.bk", {1, d});
    params_.create(p + ".attn.wv", {d, d});
    params_.create(p + ".attn.bv", {1, d});
    params_.create(p + ".attn.wo", {d, d});
    params_.create(p + ".attn.bo", {1, d});
    params_.create(p + ".ln2.g", {1, d});
    params_.create(p + ".ln2.b", {1, d});
    params_.create(p + ".ffn.w1", {d, 4 * d});
    params_.create(p + ".ffn.b1", {1, 4 * d});
    params_.create(p + ".ffn.w2", {4 * d, d});
    params_.create(p + ".ffn.b2", {1, d});
  }
  params_.create("final.ln.g", {1, d});
  params_.create("final.ln.b", {1, d});

  create_mlp2(params_, "head.code", d, d, v);
  create_mlp2(params_, "head.value", d, d, 8);
  create_mlp2(params_, "head.dep", 5 * d, d, 1);
  create_mlp2(params_, "head.region", d, d, 4);
  for (const char* side : {"caller", "callee"}) {
    std::string p = std::string("head.") + side;
    create_mlp2(params_, p + ".arity", d, d, 8);
    create_mlp2(params_, p + ".arg1", d, d, 7);
    create_mlp2(params_, p + ".arg2", d, d, 7);
    create_mlp2(params_, p + ".arg3", d, d, 7);
    create_mlp2(params_, p + ".ret", d, d, 8);
  }

  // Weights get small Gaussian noise in creation order; biases stay zero and
  // norm gains start at one.
  Rng rng = Rng::stream(seed, "init");
  for (const auto& name : params_.names()) {
    bool is_bias = name.size() > 3 && name.compare(name.size() - 3, 3, ".b1") == 0;
    is_bias = is_bias || (name.size() > 3 && name.compare(name.size() - 3, 3, ".b2") == 0);
    is_bias = is_bias || name.ends_with(".b") || name.ends_with(".bt") || name.ends_with(".bh") ||
              name.ends_with(".bq") || name.ends_with(".bk") || name.ends_with(".bv") ||
              name.ends_with(".bo");
    bool is_gain = name.ends_with(".g");
    if (is_gain) {
      Tensor& t = params_.get(name);
      for (int64_t i = 0; i < t.numel(); ++i) t.at(i) = 1.0;
    } else if (!is_bias) {
      params_.init_normal(name, rng, kInitStd);
    }
  }
}

Tensor Model::mlp2(Tape& tp, const Tensor& x, const std::string& prefix) const {
  Tensor h = tensor::relu(
      tp, tensor::add(tp, tensor::matmul(tp, x, params_.get(prefix + ".w1")),
                      params_.get(prefix + ".b1")));
  return tensor::add(tp, tensor::matmul(tp, h, params_.get(prefix + ".w2")),
                     params_.get(prefix + ".b2"));
}

Tensor Model::dropout(Tape& tp, const Tensor& x, Rng* rng) const {
  if (cfg_.dropout <= 0.0 || rng == nullptr) return x;
  double keep = 1.0 - cfg_.dropout;
  Tensor mask(x.shape(), false);
  for (int64_t i = 0; i < mask.numel(); ++i)
    mask.at(i) = rng->real() < keep ? 1.0 / keep : 0.0;
  return tensor::mul(tp, x, mask);
}

Tensor Model::embed_tokens(Tape& tp, const enc::Sample& s) const {
  std::vector<int> cids, pids, mids;
  for (const auto& t : s.code) {
    if (t.c < 0 || t.c >= cfg_.vocab_size)
      throw std::invalid_argument("token id out of range: " + std::to_string(t.c));
    if (t.p < 0 || t.p >= cfg_.max_pos)
      throw std::invalid_argument("position out of range: " + std::to_string(t.p));
    cids.push_back(t.c);
    pids.push_back(t.p);
    mids.push_back(t.m ? 1 : 0);
  }
  Tensor e = tensor::add(tp, tensor::gather_rows(tp, params_.get("embed.code"), cids),
                         tensor::gather_rows(tp, params_.get("embed.pos"), pids));
  return tensor::add(tp, e, tensor::gather_rows(tp, params_.get("embed.mem"), mids));
}

Tensor Model::encode_values(Tape& tp, const Tensor& bytes) const {
  std::vector<Tensor> pooled;
  for (int w = 1; w <= 8; ++w) {
    const Tensor& kw = params_.get("value.conv" + std::to_string(w) + ".w");
    const Tensor& kb = params_.get("value.conv" + std::to_string(w) + ".b");
    Tensor best;
    for (int pos = 0; pos + w <= 8; ++pos) {
      Tensor window = tensor::slice_cols(tp, bytes, pos, pos + w);
      Tensor conv = tensor::add(tp, tensor::matmul(tp, window, kw), kb);
      best = pos == 0 ? conv : tensor::emax(tp, best, conv);
    }
    pooled.push_back(tensor::relu(tp, best));
  }
  Tensor cat = tensor::concat_cols(tp, pooled);
  Tensor x = tensor::add(tp, tensor::matmul(tp, cat, params_.get("value.proj.w")),
                         params_.get("value.proj.b"));
  Tensor t = tensor::sigmoid(tp, tensor::add(tp, tensor::matmul(tp, x, params_.get("value.hw.wt")),
                                             params_.get("value.hw.bt")));
  Tensor h = tensor::relu(tp, tensor::add(tp, tensor::matmul(tp, x, params_.get("value.hw.wh")),
                                          params_.get("value.hw.bh")));
  Tensor ones = Tensor::full(t.shape(), 1.0);
  return tensor::add(tp, tensor::mul(tp, t, h),
                     tensor::mul(tp, tensor::sub(tp, ones, t), x));
}

Tensor Model::trace_embedding(Tape& tp, const enc::Sample& s) const {
  int n = static_cast<int>(s.length());
  // Value-bearing positions run through the conv encoder in one batch; dummy
  // and masked positions take their learned vectors.
  std::vector<int> value_pos;
  for (int i = 0; i < n; ++i)
    if (!s.trace_masked[static_cast<size_t>(i)] && !enc::is_dummy(s.trace[static_cast<size_t>(i)]))
      value_pos.push_back(i);

  Tensor encoded;
  std::vector<int> row_of(static_cast<size_t>(n), -1);
  if (!value_pos.empty()) {
    Tensor bytes({static_cast<int>(value_pos.size()), 8}, false);
    for (size_t k = 0; k < value_pos.size(); ++k) {
      const auto& b = s.trace[static_cast<size_t>(value_pos[k])];
      for (int j = 0; j < 8; ++j)
        bytes.at2(static_cast<int>(k), j) = static_cast<double>(b[static_cast<size_t>(j)]) / 256.0;
      row_of[static_cast<size_t>(value_pos[k])] = static_cast<int>(k);
    }
    encoded = encode_values(tp, bytes);
  }

  std::vector<Tensor> rows;
  rows.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (s.trace_masked[static_cast<size_t>(i)]) rows.push_back(params_.get("value.mask"));
    else if (row_of[static_cast<size_t>(i)] >= 0)
      rows.push_back(tensor::slice_rows(tp, encoded, row_of[static_cast<size_t>(i)],
                                        row_of[static_cast<size_t>(i)] + 1));
    else rows.push_back(params_.get("value.dummy"));
  }
  return tensor::concat_rows(tp, rows);
}

Tensor Model::address_embedding(Tape& tp, const enc::Sample& s) const {
  int n = static_cast<int>(s.length());
  Tensor bytes({n, 8}, false);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 8; ++j)
      bytes.at2(i, j) =
          static_cast<double>(s.addr[static_cast<size_t>(i)][static_cast<size_t>(j)]) / 256.0;
  return encode_values(tp, bytes);
}

Tensor Model::attention_layer(Tape& tp, const Tensor& x, int layer, Rng* dropout_rng) const {
  std::string p = "layer" + std::to_string(layer);
  int d = cfg_.d, h = cfg_.heads, dh = d / h;
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor norm1 = tensor::layer_norm(tp, x, params_.get(p + ".ln1.g"), params_.get(p + ".ln1.b"));
  Tensor q = tensor::add(tp, tensor::matmul(tp, norm1, params_.get(p + ".attn.wq")),
                         params_.get(p + ".attn.bq"));
  Tensor k = tensor::add(tp, tensor::matmul(tp, norm1, params_.get(p + ".attn.wk")),
                         params_.get(p + ".attn.bk"));
  Tensor v = tensor::add(tp, tensor::matmul(tp, norm1, params_.get(p + ".attn.wv")),
                         params_.get(p + ".attn.bv"));
  std::vector<Tensor> ctx;
  for (int i = 0; i < h; ++i) {
    Tensor qh = tensor::slice_cols(tp, q, i * dh, (i + 1) * dh);
    Tensor kh = tensor::slice_cols(tp, k, i * dh, (i + 1) * dh);
    Tensor vh = tensor::slice_cols(tp, v, i * dh, (i + 1) * dh);
    Tensor scores = tensor::scale(tp, tensor::matmul(tp, qh, tensor::transpose(tp, kh)), inv_sqrt);
    Tensor attn = tensor::softmax_rows(tp, scores);
    ctx.push_back(tensor::matmul(tp, attn, vh));
  }
  Tensor merged = tensor::concat_cols(tp, ctx);
  Tensor attended = tensor::add(tp, tensor::matmul(tp, merged, params_.get(p + ".attn.wo")),
                                params_.get(p + ".attn.bo"));
  Tensor x1 = tensor::add(tp, x, dropout(tp, attended, dropout_rng));

  Tensor norm2 = tensor::layer_norm(tp, x1, params_.get(p + ".ln2.g"), params_.get(p + ".ln2.b"));
  Tensor f = tensor::add(
      tp,
      tensor::matmul(tp,
                     tensor::relu(tp, tensor::add(tp,
                                                  tensor::matmul(tp, norm2,
                                                                 params_.get(p + ".ffn.w1")),
                                                  params_.get(p + ".ffn.b1"))),
                     params_.get(p + ".ffn.w2")),
      params_.get(p + ".ffn.b2"));
  return tensor::add(tp, x1, dropout(tp, f, dropout_rng));
}

Tensor Model::fuse(Tape& tp, const Tensor& el, const Tensor* et, const Tensor* ea) const {
  Tensor out = el;
  if (et) {
    Tensor gate = tensor::sigmoid(tp, mlp2(tp, tensor::concat_cols(tp, {el, *et}), "fusion.gt"));
    out = tensor::add(tp, out, tensor::mul(tp, gate, mlp2(tp, *et, "fusion.vt")));
  }
  if (ea) {
    Tensor gate = tensor::sigmoid(tp, mlp2(tp, tensor::concat_cols(tp, {el, *ea}), "fusion.ga"));
    out = tensor::add(tp, out, tensor::mul(tp, gate, mlp2(tp, *ea, "fusion.va")));
  }
  return out;
}

Tensor Model::forward_core(Tape& tp, const enc::Sample& s, bool use_trace, bool use_addr,
                           Rng* dropout_rng) const {
  int n = static_cast<int>(s.length());
  if (n < 1) throw std::invalid_argument("empty sample");
  if (n > cfg_.max_len)
    throw std::invalid_argument("sample length " + std::to_string(n) + " exceeds limit " +
                                std::to_string(cfg_.max_len));
  Tensor x = dropout(tp, embed_tokens(tp, s), dropout_rng);
  for (int i = 0; i < cfg_.fusion_layer; ++i) x = attention_layer(tp, x, i, dropout_rng);
  if (use_trace || use_addr) {
    Tensor et, ea;
    if (use_trace) et = trace_embedding(tp, s);
    if (use_addr) ea = address_embedding(tp, s);
    x = fuse(tp, x, use_trace ? &et : nullptr, use_addr ? &ea : nullptr);
  }
  for (int i = cfg_.fusion_layer; i < cfg_.layers; ++i) x = attention_layer(tp, x, i, dropout_rng);
  return tensor::layer_norm(tp, x, params_.get("final.ln.g"), params_.get("final.ln.b"));
}

Model::PretrainOut Model::forward_pretrain(Tape& tp, const enc::Sample& s, Rng* dropout_rng) const {
  Tensor el = forward_core(tp, s, true, true, dropout_rng);
  PretrainOut out;
  if (!s.mi.empty()) out.code_logits = mlp2(tp, tensor::gather_rows(tp, el, s.mi), "head.code");
  if (!s.mt.empty()) out.value_pred = mlp2(tp, tensor::gather_rows(tp, el, s.mt), "head.value");
  return out;
}

Tensor Model::forward_static(Tape& tp, const enc::Sample& s, Rng* dropout_rng) const {
  return forward_core(tp, s, false, cfg_.static_address_fusion, dropout_rng);
}

Tensor Model::dep_logit(Tape& tp, const Tensor& el, int i, int j) const {
  if (i == j) throw std::invalid_argument("dependency pair needs distinct instructions");
  if (i < 0 || j < 0 || i >= el.rows() || j >= el.rows())
    throw std::invalid_argument("dependency anchor out of range");
  Tensor pool = tensor::mean_rows(tp, el);
  Tensor ei = tensor::slice_rows(tp, el, i, i + 1);
  Tensor ej = tensor::slice_rows(tp, el, j, j + 1);
  Tensor diff = tensor::abs_val(tp, tensor::sub(tp, ei, ej));
  Tensor prod = tensor::mul(tp, ei, ej);
  Tensor feat = tensor::concat_cols(tp, {pool, ei, ej, diff, prod});
  return mlp2(tp, feat, "head.dep");
}

Tensor Model::region_logits(Tape& tp, const Tensor& el) const {
  return mlp2(tp, el, "head.region");
}

Model::SigLogits Model::signature_logits(Tape& tp, const Tensor& el, std::optional<int> site,
                                         bool caller) const {
  Tensor x;
  std::string side;
  if (caller) {
    if (!site) throw std::invalid_argument("caller signature needs a call-site index");
    if (*site < 0 || *site >= el.rows())
      throw std::invalid_argument("call-site index out of range");
    x = tensor::slice_rows(tp, el, *site, *site + 1);
    side = "head.caller";
  } else {
    x = tensor::mean_rows(tp, el);
    side = "head.callee";
  }
  SigLogits out;
  out.arity = mlp2(tp, x, side + ".arity");
  out.arg1 = mlp2(tp, x, side + ".arg1");
  out.arg2 = mlp2(tp, x, side + ".arg2");
  out.arg3 = mlp2(tp, x, side + ".arg3");
  out.ret = mlp2(tp, x, side + ".ret");
  return out;
}

}  // namespace memdep::model
