#include <cmath>
#include <stdexcept>
#include <string>

#include "internal.hpp"
#include "transtrack/kernels.hpp"
#include "transtrack/synth.hpp"

namespace transtrack::toynet {

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("model config: " + m); };
  if (grid_h < 1 || grid_w < 1) fail("grid must be at least 1x1");
  if (feature_channels < 1) fail("feature_channels must be >= 1");
  if (d_model < 4 || d_model % 4 != 0) fail("d_model must be a positive multiple of 4");
  if (ffn_dim < 1) fail("ffn_dim must be >= 1");
  if (num_queries < 1) fail("num_queries must be >= 1");
  if (encoder_layers < 0 || decoder_layers < 0) fail("layer counts must be >= 0");
  if (classes < 1) fail("classes must be >= 1");
  if (!(init_scale > 0.0)) fail("init_scale must be positive");
}

const DecoderWeights& ModelParams::decoder(DecoderRole role) const {
  return role == DecoderRole::Track && !config.share_decoders ? track_decoder : det_decoder;
}

DecoderWeights& ModelParams::decoder(DecoderRole role) {
  return role == DecoderRole::Track && !config.share_decoders ? track_decoder : det_decoder;
}

namespace {

AttentionWeights zero_attention(std::size_t d) {
  return {Tensor::matrix(d, d), Tensor::matrix(d, d), Tensor::matrix(d, d), Tensor::matrix(d, d)};
}

FfnWeights zero_ffn(std::size_t d, std::size_t f) {
  return {Tensor::matrix(d, f), Tensor({f}), Tensor::matrix(f, d), Tensor({d})};
}

DecoderWeights zero_decoder(const ModelConfig& cfg) {
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto f = static_cast<std::size_t>(cfg.ffn_dim);
  const auto nc = static_cast<std::size_t>(cfg.classes);
  DecoderWeights w;
  for (int l = 0; l < cfg.decoder_layers; ++l) {
    w.layers.push_back({zero_attention(d), zero_attention(d), zero_ffn(d, f)});
  }
  w.box_w = Tensor::matrix(d, 4);
  w.box_b = Tensor({4});
  w.cls_w = Tensor::matrix(d, nc);
  w.cls_b = Tensor({nc});
  return w;
}

template <typename P, typename Fn>
void visit_attention(P& a, const std::string& prefix, Fn& fn) {
  fn(prefix + ".wq", a.wq);
  fn(prefix + ".wk", a.wk);
  fn(prefix + ".wv", a.wv);
  fn(prefix + ".wo", a.wo);
}

template <typename P, typename Fn>
void visit_ffn(P& f, const std::string& prefix, Fn& fn) {
  fn(prefix + ".w1", f.w1);
  fn(prefix + ".b1", f.b1);
  fn(prefix + ".w2", f.w2);
  fn(prefix + ".b2", f.b2);
}

template <typename P, typename Fn>
void visit_decoder(P& dec, const std::string& prefix, Fn& fn) {
  for (std::size_t l = 0; l < dec.layers.size(); ++l) {
    const std::string lp = prefix + "." + std::to_string(l);
    visit_attention(dec.layers[l].self, lp + ".self", fn);
    visit_attention(dec.layers[l].cross, lp + ".cross", fn);
    visit_ffn(dec.layers[l].ffn, lp + ".ffn", fn);
  }
  fn(prefix + ".box_w", dec.box_w);
  fn(prefix + ".box_b", dec.box_b);
  fn(prefix + ".cls_w", dec.cls_w);
  fn(prefix + ".cls_b", dec.cls_b);
}

template <typename P, typename Fn>
void visit_all(P& p, Fn& fn) {
  fn(std::string("embed"), p.embed);
  fn(std::string("frame_offset"), p.frame_offset);
  for (std::size_t l = 0; l < p.encoder.size(); ++l) {
    const std::string lp = "encoder." + std::to_string(l);
    visit_attention(p.encoder[l].self, lp + ".self", fn);
    visit_ffn(p.encoder[l].ffn, lp + ".ffn", fn);
  }
  fn(std::string("object_queries"), p.object_queries);
  visit_decoder(p.det_decoder, "det", fn);
  if (!p.config.share_decoders) visit_decoder(p.track_decoder, "track", fn);
}

}  // namespace

ModelParams zero_params(const ModelConfig& cfg) {
  cfg.validate();
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto f = static_cast<std::size_t>(cfg.ffn_dim);
  ModelParams p;
  p.config = cfg;
  p.embed = Tensor::matrix(static_cast<std::size_t>(cfg.feature_channels), d);
  p.frame_offset = Tensor::matrix(2, d);
  for (int l = 0; l < cfg.encoder_layers; ++l) p.encoder.push_back({zero_attention(d), zero_ffn(d, f)});
  p.object_queries = Tensor::matrix(static_cast<std::size_t>(cfg.num_queries), d);
  p.det_decoder = zero_decoder(cfg);
  if (!cfg.share_decoders) p.track_decoder = zero_decoder(cfg);
  return p;
}

ModelParams init_params(const ModelConfig& cfg) {
  ModelParams p = zero_params(cfg);
  synth::SplitMix64 rng(cfg.seed);
  for_each_tensor(p, [&](const std::string& name, Tensor& t) {
    if (t.rank() == 1) return;  // biases start at zero
    double bound = 0.0;
    if (name == "object_queries") {
      bound = 1.0;
    } else if (name == "frame_offset") {
      bound = 0.5;
    } else {
      bound = cfg.init_scale * std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    }
    for (double& v : t.values()) v = rng.uniform(-bound, bound);
  });
  return p;
}

void for_each_tensor(ModelParams& p, const std::function<void(const std::string&, Tensor&)>& fn) {
  visit_all(p, fn);
}

void for_each_tensor(const ModelParams& p,
                     const std::function<void(const std::string&, const Tensor&)>& fn) {
  visit_all(p, fn);
}

std::size_t parameter_count(const ModelParams& p) {
  std::size_t n = 0;
  for_each_tensor(p, [&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

Tensor positional_encoding(int grid_h, int grid_w, int d) {
  const auto hw = static_cast<std::size_t>(grid_h) * static_cast<std::size_t>(grid_w);
  const auto dd = static_cast<std::size_t>(d);
  Tensor pe = Tensor::matrix(hw, dd);
  const int quarter = d / 4;
  for (int i = 0; i < grid_h; ++i) {
    for (int j = 0; j < grid_w; ++j) {
      auto row = pe.row(static_cast<std::size_t>(i * grid_w + j));
      for (int k = 0; k < quarter; ++k) {
        const double freq = std::pow(10000.0, -static_cast<double>(k) / quarter);
        const auto c = static_cast<std::size_t>(2 * k);
        row[c] = std::sin(j * freq);
        row[c + 1] = std::cos(j * freq);
        row[dd / 2 + c] = std::sin(i * freq);
        row[dd / 2 + c + 1] = std::cos(i * freq);
      }
    }
  }
  return pe;
}

Tensor encode(const Tensor& feat_curr, const Tensor& feat_prev, const ModelParams& p,
              EncodeCache* cache) {
  const ModelConfig& cfg = p.config;
  const std::vector<std::size_t> want{static_cast<std::size_t>(cfg.grid_h),
                                      static_cast<std::size_t>(cfg.grid_w),
                                      static_cast<std::size_t>(cfg.feature_channels)};
  if (feat_curr.shape() != want || feat_prev.shape() != want) {
    throw std::invalid_argument("encode expects feature grids of shape [" +
                                std::to_string(cfg.grid_h) + ", " + std::to_string(cfg.grid_w) +
                                ", " + std::to_string(cfg.feature_channels) + "], got " +
                                feat_curr.shape_string() + " and " + feat_prev.shape_string());
  }
  const std::size_t hw = want[0] * want[1];
  const std::size_t c = want[2];
  std::vector<double> tokens(feat_curr.values());
  tokens.insert(tokens.end(), feat_prev.values().begin(), feat_prev.values().end());
  Tensor in({2 * hw, c}, std::move(tokens));
  Tensor x = matmul(in, p.embed);
  const Tensor pe = positional_encoding(cfg.grid_h, cfg.grid_w, cfg.d_model);
  for (std::size_t r = 0; r < 2 * hw; ++r) {
    kernels::axpy(x.row(r), 1.0, pe.row(r % hw));
    kernels::axpy(x.row(r), 1.0, p.frame_offset.row(r < hw ? 0 : 1));
  }
  if (cache != nullptr) {
    cache->tokens_in = std::move(in);
    cache->layers.assign(p.encoder.size(), {});
  }
  for (std::size_t l = 0; l < p.encoder.size(); ++l) {
    EncodeCache::Layer* lc = cache != nullptr ? &cache->layers[l] : nullptr;
    x = attn_forward(p.encoder[l].self, x, x, lc != nullptr ? &lc->self : nullptr);
    x = ffn_forward(p.encoder[l].ffn, x, lc != nullptr ? &lc->ffn : nullptr);
  }
  return x;
}

void encode_backward(const ModelParams& p, const EncodeCache& c, const Tensor& d_memory,
                     ModelParams& grads) {
  Tensor dx = d_memory;
  for (std::size_t l = p.encoder.size(); l-- > 0;) {
    dx = ffn_backward(p.encoder[l].ffn, c.layers[l].ffn, dx, grads.encoder[l].ffn);
    auto [dq, dkv] = attn_backward(p.encoder[l].self, c.layers[l].self, dx, grads.encoder[l].self);
    add_inplace(dq, dkv);
    dx = std::move(dq);
  }
  const std::size_t hw = dx.rows() / 2;
  for (std::size_t r = 0; r < dx.rows(); ++r) {
    kernels::axpy(grads.frame_offset.row(r < hw ? 0 : 1), 1.0, dx.row(r));
  }
  matmul_at_acc(c.tokens_in, dx, grads.embed);
}

namespace {

/// Grid positional encoding for every memory row, added to the cross-attention keys.
Tensor memory_key_pos(const ModelConfig& cfg, std::size_t rows) {
  const Tensor pe = positional_encoding(cfg.grid_h, cfg.grid_w, cfg.d_model);
  Tensor out = Tensor::matrix(rows, pe.cols());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto src = pe.row(r % pe.rows());
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace

DecodeOutput decode(const Tensor& queries, const Tensor& memory, const ModelParams& p,
                    DecoderRole role, DecodeCache* cache) {
  const auto d = static_cast<std::size_t>(p.config.d_model);
  if (queries.rank() != 2 || queries.cols() != d) {
    throw std::invalid_argument("decode expects queries of shape [n, " + std::to_string(d) +
                                "], got " + queries.shape_string());
  }
  if (memory.rank() != 2 || memory.cols() != d || memory.rows() == 0) {
    throw std::invalid_argument("decode expects memory of shape [m, " + std::to_string(d) +
                                "], got " + memory.shape_string());
  }
  const DecoderWeights& w = p.decoder(role);
  const Tensor key_pos = memory_key_pos(p.config, memory.rows());
  Tensor x = queries;
  if (cache != nullptr) cache->layers.assign(w.layers.size(), {});
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    DecodeCache::Layer* lc = cache != nullptr ? &cache->layers[l] : nullptr;
    x = attn_forward(w.layers[l].self, x, x, lc != nullptr ? &lc->self : nullptr);
    x = attn_forward(w.layers[l].cross, x, memory, lc != nullptr ? &lc->cross : nullptr, &key_pos);
    x = ffn_forward(w.layers[l].ffn, x, lc != nullptr ? &lc->ffn : nullptr);
  }
  Tensor box = matmul(x, w.box_w);
  add_row_bias(box, w.box_b);
  for (double& v : box.values()) v = sigmoid(v);
  Tensor cls = matmul(x, w.cls_w);
  add_row_bias(cls, w.cls_b);
  for (double& v : cls.values()) v = sigmoid(v);

  DecodeOutput out;
  out.boxes.reserve(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    out.boxes.push_back({box(i, 0), box(i, 1), box(i, 2), box(i, 3)});
  }
  out.class_probs = cls;
  out.out_features = x;
  if (cache != nullptr) {
    cache->out = std::move(x);
    cache->box_sig = std::move(box);
    cache->cls_sig = std::move(cls);
  }
  return out;
}

std::pair<Tensor, Tensor> decode_backward(const ModelParams& p, DecoderRole role,
                                          const DecodeCache& c, const Tensor& d_box,
                                          const Tensor& d_prob, ModelParams& grads) {
  const DecoderWeights& w = p.decoder(role);
  DecoderWeights& g = grads.decoder(role);
  Tensor dzb = d_box;
  for (std::size_t i = 0; i < dzb.size(); ++i) {
    const double s = c.box_sig.values()[i];
    dzb.values()[i] *= s * (1.0 - s);
  }
  Tensor dzc = d_prob;
  for (std::size_t i = 0; i < dzc.size(); ++i) {
    const double s = c.cls_sig.values()[i];
    dzc.values()[i] *= s * (1.0 - s);
  }
  matmul_at_acc(c.out, dzb, g.box_w);
  col_sum_acc(dzb, g.box_b);
  matmul_at_acc(c.out, dzc, g.cls_w);
  col_sum_acc(dzc, g.cls_b);
  Tensor dx = matmul_bt(dzb, w.box_w);
  add_inplace(dx, matmul_bt(dzc, w.cls_w));

  Tensor d_memory;
  for (std::size_t l = w.layers.size(); l-- > 0;) {
    const auto& lc = c.layers[l];
    dx = ffn_backward(w.layers[l].ffn, lc.ffn, dx, g.layers[l].ffn);
    auto [dq_cross, dmem] = attn_backward(w.layers[l].cross, lc.cross, dx, g.layers[l].cross);
    if (d_memory.empty()) {
      d_memory = std::move(dmem);
    } else {
      add_inplace(d_memory, dmem);
    }
    auto [dq_self, dkv_self] = attn_backward(w.layers[l].self, lc.self, dq_cross, g.layers[l].self);
    add_inplace(dq_self, dkv_self);
    dx = std::move(dq_self);
  }
  return {std::move(dx), std::move(d_memory)};
}

std::vector<Prediction> to_predictions(const DecodeOutput& out) {
  std::vector<Prediction> preds;
  preds.reserve(out.boxes.size());
  for (std::size_t i = 0; i < out.boxes.size(); ++i) {
    const auto row = out.class_probs.row(i);
    preds.push_back({out.boxes[i], std::vector<double>(row.begin(), row.end())});
  }
  return preds;
}

}  // namespace transtrack::toynet
