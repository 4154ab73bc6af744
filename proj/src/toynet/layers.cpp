#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "internal.hpp"
#include "transtrack/kernels.hpp"

namespace transtrack::toynet {

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tensor c = Tensor::matrix(a.rows(), b.cols());
  kernels::gemm(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

Tensor matmul_bt(const Tensor& a, const Tensor& b) {
  Tensor c = Tensor::matrix(a.rows(), b.rows());
  kernels::gemm_bt(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows());
  return c;
}

void matmul_at_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  kernels::gemm_at(a.data(), b.data(), out.data(), a.rows(), a.cols(), b.cols(), true);
}

void add_inplace(Tensor& y, const Tensor& x) {
  kernels::axpy(y.values(), 1.0, x.values());
}

void add_row_bias(Tensor& y, const Tensor& bias) {
  for (std::size_t r = 0; r < y.rows(); ++r) kernels::axpy(y.row(r), 1.0, bias.values());
}

void col_sum_acc(const Tensor& x, Tensor& out) {
  for (std::size_t r = 0; r < x.rows(); ++r) kernels::axpy(out.values(), 1.0, x.row(r));
}

void softmax_rows(Tensor& s) {
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto row = s.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
}

double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
    throw std::invalid_argument("attention expects 2-D tensors");
  }
  if (q.cols() != k.cols() || k.rows() != v.rows()) {
    throw std::invalid_argument("attention shape mismatch: Q " + q.shape_string() + ", K " +
                                k.shape_string() + ", V " + v.shape_string());
  }
  if (k.rows() == 0) throw std::invalid_argument("attention needs at least one key");
  Tensor s = matmul_bt(q, k);
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  for (double& x : s.values()) x *= scale;
  softmax_rows(s);
  return matmul(s, v);
}

Tensor attn_forward(const AttentionWeights& w, const Tensor& xq, const Tensor& xkv,
                    AttnCache* cache, const Tensor* key_pos) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(xq.cols()));
  Tensor xk;
  if (key_pos != nullptr) {
    xk = xkv;
    add_inplace(xk, *key_pos);
  }
  const Tensor& keys_in = key_pos != nullptr ? xk : xkv;
  Tensor q = matmul(xq, w.wq);
  Tensor k = matmul(keys_in, w.wk);
  Tensor v = matmul(xkv, w.wv);
  Tensor p = matmul_bt(q, k);
  for (double& x : p.values()) x *= scale;
  softmax_rows(p);
  Tensor a = matmul(p, v);
  Tensor y = matmul(a, w.wo);
  add_inplace(y, xq);
  if (cache != nullptr) {
    cache->xq = xq;
    cache->xk = key_pos != nullptr ? std::move(xk) : xkv;
    cache->xkv = xkv;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->p = std::move(p);
    cache->a = std::move(a);
  }
  return y;
}

std::pair<Tensor, Tensor> attn_backward(const AttentionWeights& w, const AttnCache& c,
                                        const Tensor& dy, AttentionWeights& g) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(c.xq.cols()));
  matmul_at_acc(c.a, dy, g.wo);
  const Tensor da = matmul_bt(dy, w.wo);
  Tensor dp = matmul_bt(da, c.v);
  Tensor dv = Tensor::matrix(c.v.rows(), c.v.cols());
  matmul_at_acc(c.p, da, dv);
  // Softmax backward, row by row.
  for (std::size_t r = 0; r < dp.rows(); ++r) {
    auto drow = dp.row(r);
    const auto prow = c.p.row(r);
    const double inner = kernels::dot(drow, prow);
    for (std::size_t j = 0; j < drow.size(); ++j) drow[j] = prow[j] * (drow[j] - inner) * scale;
  }
  const Tensor& ds = dp;
  const Tensor dq = matmul(ds, c.k);
  Tensor dk = Tensor::matrix(c.k.rows(), c.k.cols());
  matmul_at_acc(ds, c.q, dk);

  matmul_at_acc(c.xq, dq, g.wq);
  matmul_at_acc(c.xk, dk, g.wk);
  matmul_at_acc(c.xkv, dv, g.wv);

  Tensor dxq = matmul_bt(dq, w.wq);
  add_inplace(dxq, dy);
  Tensor dxkv = matmul_bt(dk, w.wk);
  add_inplace(dxkv, matmul_bt(dv, w.wv));
  return {std::move(dxq), std::move(dxkv)};
}

Tensor ffn_forward(const FfnWeights& w, const Tensor& x, FfnCache* cache) {
  Tensor h = matmul(x, w.w1);
  add_row_bias(h, w.b1);
  for (double& v : h.values()) v = std::tanh(v);
  Tensor y = matmul(h, w.w2);
  add_row_bias(y, w.b2);
  add_inplace(y, x);
  if (cache != nullptr) {
    cache->x = x;
    cache->h = std::move(h);
  }
  return y;
}

Tensor ffn_backward(const FfnWeights& w, const FfnCache& c, const Tensor& dy, FfnWeights& g) {
  matmul_at_acc(c.h, dy, g.w2);
  col_sum_acc(dy, g.b2);
  Tensor dz = matmul_bt(dy, w.w2);
  for (std::size_t i = 0; i < dz.size(); ++i) {
    const double hv = c.h.values()[i];
    dz.values()[i] *= 1.0 - hv * hv;
  }
  matmul_at_acc(c.x, dz, g.w1);
  col_sum_acc(dz, g.b1);
  Tensor dx = matmul_bt(dz, w.w1);
  add_inplace(dx, dy);
  return dx;
}

}  // namespace transtrack::toynet
