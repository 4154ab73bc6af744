#pragma once

// Layer kernels and activation caches shared by the toy network sources.

#include <vector>

#include "transtrack/toynet.hpp"

namespace transtrack::toynet {

// 2-D helpers. Shapes are checked by the callers.
Tensor matmul(const Tensor& a, const Tensor& b);     // a b
Tensor matmul_bt(const Tensor& a, const Tensor& b);  // a b^T
void matmul_at_acc(const Tensor& a, const Tensor& b, Tensor& out);  // out += a^T b
void add_inplace(Tensor& y, const Tensor& x);
void add_row_bias(Tensor& y, const Tensor& bias);
void col_sum_acc(const Tensor& x, Tensor& out);
void softmax_rows(Tensor& s);
double sigmoid(double z);

struct AttnCache {
  Tensor xq, xk, xkv, q, k, v, p, a;
};

struct FfnCache {
  Tensor x, h;
};

/// Residual single-head attention: xq + softmax(xq Wq (xk Wk)^T / sqrt d) xkv Wv Wo
/// with xk = xkv + key_pos (key_pos may be null).
Tensor attn_forward(const AttentionWeights& w, const Tensor& xq, const Tensor& xkv,
                    AttnCache* cache, const Tensor* key_pos = nullptr);
/// Accumulates parameter gradients into g, returns (d xq, d xkv).
std::pair<Tensor, Tensor> attn_backward(const AttentionWeights& w, const AttnCache& c,
                                        const Tensor& dy, AttentionWeights& g);

/// Residual feed-forward: x + tanh(x W1 + b1) W2 + b2.
Tensor ffn_forward(const FfnWeights& w, const Tensor& x, FfnCache* cache);
Tensor ffn_backward(const FfnWeights& w, const FfnCache& c, const Tensor& dy, FfnWeights& g);

struct EncodeCache {
  Tensor tokens_in;  // 2HW x C
  struct Layer {
    AttnCache self;
    FfnCache ffn;
  };
  std::vector<Layer> layers;
};

struct DecodeCache {
  struct Layer {
    AttnCache self;
    AttnCache cross;
    FfnCache ffn;
  };
  std::vector<Layer> layers;
  Tensor out;      // n x d
  Tensor box_sig;  // n x 4
  Tensor cls_sig;  // n x classes
};

void encode_backward(const ModelParams& p, const EncodeCache& c, const Tensor& d_memory,
                     ModelParams& grads);

/// d_box and d_prob are gradients with respect to the sigmoid outputs.
/// Returns (d queries, d memory).
std::pair<Tensor, Tensor> decode_backward(const ModelParams& p, DecoderRole role,
                                          const DecodeCache& c, const Tensor& d_box,
                                          const Tensor& d_prob, ModelParams& grads);

}  // namespace transtrack::toynet
