//  Copyright 2026 The SGPT Authors. All Rights Reserved.
//
//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

// A small pre-norm transformer encoder with explicit forward and backward
// passes, plus the token-prediction and pair-prediction heads that the
// pretraining objectives share.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sgpt/common.hpp"
#include "sgpt/corpus.hpp"

namespace sgpt {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t max_len = 128;
  std::size_t ffn_dim = 0;  // 0 means 4 * d_model
  double init_std = 0.02;
  std::uint64_t seed = 1;

  std::size_t ffn() const { return ffn_dim ? ffn_dim : 4 * d_model; }
  std::size_t head_dim() const { return d_model / n_heads; }

  void validate() const {
    if (vocab_size <= static_cast<std::size_t>(special::kMask)) throw InvalidArgument("encoder: vocab too small");
    if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
      throw InvalidArgument("encoder: d_model must be a positive multiple of n_heads");
    }
    if (n_layers == 0 || max_len == 0) throw InvalidArgument("encoder: n_layers and max_len must be positive");
    if (!(init_std > 0.0)) throw InvalidArgument("encoder: init_std must be positive");
  }
  bool operator==(const EncoderConfig&) const = default;
};

struct LayerWeights {
  Matrix ln1_gain, ln1_bias;
  Matrix wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix ln2_gain, ln2_bias;
  Matrix w_ff1, b_ff1, w_ff2, b_ff2;

  template <typename Self, typename F>
  static void visit(Self& s, const std::string& p, F&& f) {
    f(p + "ln1_gain", s.ln1_gain);
    f(p + "ln1_bias", s.ln1_bias);
    f(p + "wq", s.wq);
    f(p + "bq", s.bq);
    f(p + "wk", s.wk);
    f(p + "bk", s.bk);
    f(p + "wv", s.wv);
    f(p + "bv", s.bv);
    f(p + "wo", s.wo);
    f(p + "bo", s.bo);
    f(p + "ln2_gain", s.ln2_gain);
    f(p + "ln2_bias", s.ln2_bias);
    f(p + "w_ff1", s.w_ff1);
    f(p + "b_ff1", s.b_ff1);
    f(p + "w_ff2", s.w_ff2);
    f(p + "b_ff2", s.b_ff2);
  }
};

/// Every trainable tensor of the encoder and its two pretraining heads.
/// Biases and gains are 1 x n matrices so that all tensors share one type.
struct Weights {
  Matrix token_embedding;     // vocab x d
  Matrix position_embedding;  // max_len x d
  std::vector<LayerWeights> layers;
  Matrix final_gain, final_bias;
  Matrix lm_weight, lm_bias;      // d x vocab, 1 x vocab
  Matrix pair_weight, pair_bias;  // d x 1, 1 x 1

  template <typename F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  static Weights zeros(const EncoderConfig& c) {
    const auto d = static_cast<Eigen::Index>(c.d_model);
    const auto v = static_cast<Eigen::Index>(c.vocab_size);
    const auto f = static_cast<Eigen::Index>(c.ffn());
    Weights w;
    w.token_embedding = Matrix::Zero(v, d);
    w.position_embedding = Matrix::Zero(static_cast<Eigen::Index>(c.max_len), d);
    for (std::size_t l = 0; l < c.n_layers; ++l) {
      LayerWeights lw;
      lw.ln1_gain = Matrix::Zero(1, d);
      lw.ln1_bias = Matrix::Zero(1, d);
      lw.wq = Matrix::Zero(d, d);
      lw.bq = Matrix::Zero(1, d);
      lw.wk = Matrix::Zero(d, d);
      lw.bk = Matrix::Zero(1, d);
      lw.wv = Matrix::Zero(d, d);
      lw.bv = Matrix::Zero(1, d);
      lw.wo = Matrix::Zero(d, d);
      lw.bo = Matrix::Zero(1, d);
      lw.ln2_gain = Matrix::Zero(1, d);
      lw.ln2_bias = Matrix::Zero(1, d);
      lw.w_ff1 = Matrix::Zero(d, f);
      lw.b_ff1 = Matrix::Zero(1, f);
      lw.w_ff2 = Matrix::Zero(f, d);
      lw.b_ff2 = Matrix::Zero(1, d);
      w.layers.push_back(std::move(lw));
    }
    w.final_gain = Matrix::Zero(1, d);
    w.final_bias = Matrix::Zero(1, d);
    w.lm_weight = Matrix::Zero(d, v);
    w.lm_bias = Matrix::Zero(1, v);
    w.pair_weight = Matrix::Zero(d, 1);
    w.pair_bias = Matrix::Zero(1, 1);
    return w;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&n](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&ok](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
    return ok;
  }

 private:
  template <typename Self, typename F>
  static void visit(Self& s, F& f) {
    f(std::string("token_embedding"), s.token_embedding);
    f(std::string("position_embedding"), s.position_embedding);
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
      LayerWeights::visit(s.layers[l], "layers." + std::to_string(l) + ".", f);
    }
    f(std::string("final_gain"), s.final_gain);
    f(std::string("final_bias"), s.final_bias);
    f(std::string("lm_weight"), s.lm_weight);
    f(std::string("lm_bias"), s.lm_bias);
    f(std::string("pair_weight"), s.pair_weight);
    f(std::string("pair_bias"), s.pair_bias);
  }
};

/// Raw pointers to every tensor of `w`, in visiting order.
inline std::vector<Matrix*> tensor_refs(Weights& w) {
  std::vector<Matrix*> out;
  w.for_each([&out](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}
inline std::vector<const Matrix*> tensor_refs(const Weights& w) {
  std::vector<const Matrix*> out;
  w.for_each([&out](const std::string&, const Matrix& m) { out.push_back(&m); });
  return out;
}

struct EncoderParams {
  EncoderConfig config;
  Weights weights;

  /// Gaussian(0, init_std) matrices, zero biases, unit layer-norm gains.
  static EncoderParams initialize(const EncoderConfig& config) {
    config.validate();
    EncoderParams p{config, Weights::zeros(config)};
    Rng rng(derive_seed(config.seed, 0x454e43ULL));
    auto fill = [&](Matrix& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = config.init_std * rng.normal();
    };
    fill(p.weights.token_embedding);
    fill(p.weights.position_embedding);
    for (auto& l : p.weights.layers) {
      l.ln1_gain.setOnes();
      l.ln2_gain.setOnes();
      fill(l.wq);
      fill(l.wk);
      fill(l.wv);
      fill(l.wo);
      fill(l.w_ff1);
      fill(l.w_ff2);
    }
    p.weights.final_gain.setOnes();
    fill(p.weights.lm_weight);
    fill(p.weights.pair_weight);
    return p;
  }

  std::size_t parameter_count() const { return weights.parameter_count(); }
};

/// Shape-identical mirror of EncoderParams.
struct Gradients {
  Weights weights;

  Gradients() = default;
  explicit Gradients(const EncoderConfig& config) : weights(Weights::zeros(config)) {}

  void zero() {
    weights.for_each([](const std::string&, Matrix& m) { m.setZero(); });
  }

  Gradients& operator+=(const Gradients& o) {
    auto mine = tensor_refs(weights);
    auto theirs = tensor_refs(o.weights);
    for (std::size_t i = 0; i < mine.size(); ++i) *mine[i] += *theirs[i];
    return *this;
  }

  Gradients& operator*=(double s) {
    weights.for_each([s](const std::string&, Matrix& m) { m *= s; });
    return *this;
  }

  double max_abs() const {
    double m = 0.0;
    weights.for_each([&m](const std::string&, const Matrix& t) {
      if (t.size()) m = std::max(m, t.cwiseAbs().maxCoeff());
    });
    return m;
  }
};

namespace nn {

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormCache {
  Matrix normalized;
  Eigen::VectorXd inv_std;
};

inline Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, LayerNormCache& cache) {
  const auto n = x.rows();
  const double d = static_cast<double>(x.cols());
  cache.normalized.resize(n, x.cols());
  cache.inv_std.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).sum() / d;
    const auto centered = (x.row(i).array() - mu).matrix();
    const double var = centered.squaredNorm() / d;
    const double r = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std(i) = r;
    cache.normalized.row(i) = centered * r;
  }
  Matrix y = cache.normalized.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

inline Matrix layer_norm_backward(const Matrix& dy, const Matrix& gain, const LayerNormCache& cache, Matrix& d_gain,
                                  Matrix& d_bias) {
  d_gain += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
  d_bias += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  const double d = static_cast<double>(dy.cols());
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_g = dxhat.row(i).sum() / d;
    const double mean_gx = dxhat.row(i).dot(cache.normalized.row(i)) / d;
    dx.row(i) = cache.inv_std(i) *
                (dxhat.row(i).array() - mean_g - cache.normalized.row(i).array() * mean_gx).matrix();
  }
  return dx;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

/// Numerically stable softmax of a row.
inline RowVector softmax(const RowVector& z) {
  const double m = z.maxCoeff();
  RowVector e = (z.array() - m).exp().matrix();
  return e / e.sum();
}

inline double log_sum_exp(const RowVector& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

inline Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

}  // namespace nn

struct LayerCache {
  Matrix input;
  nn::LayerNormCache ln1;
  Matrix ln1_out, q, k, v;
  std::vector<Matrix> attention;  // per head, n x n
  Matrix context;
  Matrix mid;
  nn::LayerNormCache ln2;
  Matrix ln2_out, ff_pre, ff_act;
};

/// Everything backward() needs from one forward pass.
struct ForwardCache {
  std::vector<TokenId> ids;
  std::vector<char> key_mask;  // 1 where the position may be attended to
  std::vector<LayerCache> layers;
  nn::LayerNormCache final_ln;
  Matrix hidden;  // n x d_model

  bool empty() const { return layers.empty(); }
};

/// Encodes a token sequence. [PAD] positions are masked as attention keys; a
/// query with no attendable key receives a zero context.
inline ForwardCache forward(const EncoderParams& params, std::span<const TokenId> ids) {
  const auto& cfg = params.config;
  const auto& w = params.weights;
  if (ids.empty() || ids.size() > cfg.max_len) {
    throw InvalidArgument("encoder: sequence length " + std::to_string(ids.size()) + " outside [1, " +
                          std::to_string(cfg.max_len) + "]");
  }
  const auto n = static_cast<Eigen::Index>(ids.size());
  const auto d = static_cast<Eigen::Index>(cfg.d_model);
  const auto dh = static_cast<Eigen::Index>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  ForwardCache cache;
  cache.ids.assign(ids.begin(), ids.end());
  cache.key_mask.resize(ids.size());
  Matrix x(n, d);
  for (Eigen::Index t = 0; t < n; ++t) {
    const TokenId id = ids[static_cast<std::size_t>(t)];
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
      throw InvalidArgument("encoder: token id " + std::to_string(id) + " out of vocabulary");
    }
    x.row(t) = w.token_embedding.row(id) + w.position_embedding.row(t);
    cache.key_mask[static_cast<std::size_t>(t)] = id != special::kPad;
  }

  cache.layers.resize(cfg.n_layers);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const auto& lw = w.layers[l];
    auto& c = cache.layers[l];
    c.input = x;
    c.ln1_out = nn::layer_norm(x, lw.ln1_gain, lw.ln1_bias, c.ln1);
    c.q = nn::affine(c.ln1_out, lw.wq, lw.bq);
    c.k = nn::affine(c.ln1_out, lw.wk, lw.bk);
    c.v = nn::affine(c.ln1_out, lw.wv, lw.bv);
    c.context = Matrix::Zero(n, d);
    c.attention.resize(cfg.n_heads);
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      const auto off = static_cast<Eigen::Index>(h) * dh;
      Matrix scores = (c.q.middleCols(off, dh) * c.k.middleCols(off, dh).transpose()) * scale;
      Matrix& a = c.attention[h];
      a = Matrix::Zero(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j)
          if (cache.key_mask[static_cast<std::size_t>(j)]) m = std::max(m, scores(i, j));
        if (!std::isfinite(m)) continue;
        double z = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (!cache.key_mask[static_cast<std::size_t>(j)]) continue;
          a(i, j) = std::exp(scores(i, j) - m);
          z += a(i, j);
        }
        a.row(i) /= z;
      }
      c.context.middleCols(off, dh) = a * c.v.middleCols(off, dh);
    }
    c.mid = x + nn::affine(c.context, lw.wo, lw.bo);
    c.ln2_out = nn::layer_norm(c.mid, lw.ln2_gain, lw.ln2_bias, c.ln2);
    c.ff_pre = nn::affine(c.ln2_out, lw.w_ff1, lw.b_ff1);
    c.ff_act = c.ff_pre.unaryExpr([](double v) { return nn::gelu(v); });
    x = c.mid + nn::affine(c.ff_act, lw.w_ff2, lw.b_ff2);
  }
  cache.hidden = nn::layer_norm(x, w.final_gain, w.final_bias, cache.final_ln);
  return cache;
}

inline Matrix encode(const EncoderParams& params, std::span<const TokenId> ids) {
  return forward(params, ids).hidden;
}

/// Accumulates into `grads` the gradient of a loss whose derivative with
/// respect to the final hidden states is `d_hidden`.
inline void backward(const EncoderParams& params, const ForwardCache& cache, const Matrix& d_hidden,
                     Gradients& grads) {
  if (cache.empty()) throw InvalidArgument("encoder: backward called without a forward cache");
  if (d_hidden.rows() != cache.hidden.rows() || d_hidden.cols() != cache.hidden.cols()) {
    throw InvalidArgument("encoder: upstream gradient shape mismatch");
  }
  const auto& cfg = params.config;
  const auto& w = params.weights;
  auto& g = grads.weights;
  const auto dh = static_cast<Eigen::Index>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix dx = nn::layer_norm_backward(d_hidden, w.final_gain, cache.final_ln, g.final_gain, g.final_bias);
  for (std::size_t li = cfg.n_layers; li-- > 0;) {
    const auto& lw = w.layers[li];
    auto& lg = g.layers[li];
    const auto& c = cache.layers[li];

    lg.w_ff2.noalias() += c.ff_act.transpose() * dx;
    lg.b_ff2 += dx.colwise().sum();
    Matrix d_pre = dx * lw.w_ff2.transpose();
    d_pre.array() *= c.ff_pre.unaryExpr([](double v) { return nn::gelu_grad(v); }).array();
    lg.w_ff1.noalias() += c.ln2_out.transpose() * d_pre;
    lg.b_ff1 += d_pre.colwise().sum();
    const Matrix d_ln2 = d_pre * lw.w_ff1.transpose();
    Matrix d_mid = dx + nn::layer_norm_backward(d_ln2, lw.ln2_gain, c.ln2, lg.ln2_gain, lg.ln2_bias);

    lg.wo.noalias() += c.context.transpose() * d_mid;
    lg.bo += d_mid.colwise().sum();
    const Matrix d_context = d_mid * lw.wo.transpose();
    Matrix dq = Matrix::Zero(c.q.rows(), c.q.cols());
    Matrix dk = Matrix::Zero(c.k.rows(), c.k.cols());
    Matrix dv = Matrix::Zero(c.v.rows(), c.v.cols());
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      const auto off = static_cast<Eigen::Index>(h) * dh;
      const Matrix& a = c.attention[h];
      const Matrix d_ctx = d_context.middleCols(off, dh);
      const Matrix da = d_ctx * c.v.middleCols(off, dh).transpose();
      dv.middleCols(off, dh).noalias() += a.transpose() * d_ctx;
      const Eigen::VectorXd row_dot = (a.array() * da.array()).rowwise().sum();
      Matrix ds = a.array() * (da.colwise() - row_dot).array();
      ds *= scale;
      dq.middleCols(off, dh).noalias() += ds * c.k.middleCols(off, dh);
      dk.middleCols(off, dh).noalias() += ds.transpose() * c.q.middleCols(off, dh);
    }
    lg.wq.noalias() += c.ln1_out.transpose() * dq;
    lg.bq += dq.colwise().sum();
    lg.wk.noalias() += c.ln1_out.transpose() * dk;
    lg.bk += dk.colwise().sum();
    lg.wv.noalias() += c.ln1_out.transpose() * dv;
    lg.bv += dv.colwise().sum();
    const Matrix d_ln1 = dq * lw.wq.transpose() + dk * lw.wk.transpose() + dv * lw.wv.transpose();
    dx = d_mid + nn::layer_norm_backward(d_ln1, lw.ln1_gain, c.ln1, lg.ln1_gain, lg.ln1_bias);
  }
  for (std::size_t t = 0; t < cache.ids.size(); ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    g.token_embedding.row(cache.ids[t]) += dx.row(ti);
    g.position_embedding.row(ti) += dx.row(ti);
  }
}

inline Gradients backward(const EncoderParams& params, const ForwardCache& cache, const Matrix& d_hidden) {
  Gradients g(params.config);
  backward(params, cache, d_hidden, g);
  return g;
}

/// Token-prediction head: softmax(h W + b) over the vocabulary.
inline RowVector predict_token_distribution(const EncoderParams& params, const RowVector& hidden) {
  RowVector logits = hidden * params.weights.lm_weight + params.weights.lm_bias;
  return nn::softmax(logits);
}

}  // namespace sgpt
