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

// Pretraining examples and the three pretraining losses:
//
//   sentiment word prediction  L_sw  cross-entropy at masked sentiment tokens
//   pair prediction            L_ap  binary cross-entropy on [CLS] of
//                                    [CLS] aspects [SEP] sentiments [SEP]
//   node similarity            L_ns  cosine-score contrastive loss
//
// and their unweighted sum. Every loss optionally accumulates its gradient
// into a Gradients object; pass nullptr for value-only evaluation.

#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "sgpt/corpus.hpp"
#include "sgpt/encoder.hpp"
#include "sgpt/semantic_graph.hpp"
#include "sgpt/term_extraction.hpp"

namespace sgpt {

struct MaskedSequence {
  std::vector<TokenId> input_ids;     // [MASK] at masked positions
  std::vector<TokenId> original_ids;  // targets; only read where mask == 1
  std::vector<char> mask;

  std::size_t size() const { return input_ids.size(); }
  std::size_t masked_count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  }
};

/// Number of positions a sentence of `length` tokens may mask.
inline std::size_t masking_budget(std::size_t length, double rate) {
  return static_cast<std::size_t>(std::floor(rate * static_cast<double>(length) + 1e-12));
}

/// Masks sentiment-term tokens only: a uniformly random subset of the
/// sentiment positions of size min(budget, supply). Other tokens are never
/// masked, even when the budget is not exhausted.
inline MaskedSequence make_masked_sequence(const Sentence& sentence, const std::vector<TermSpan>& spans, double rate,
                                           Rng& rng) {
  if (!(rate > 0.0 && rate <= 1.0)) throw InvalidArgument("masking rate must be in (0, 1]");
  MaskedSequence m;
  m.original_ids = sentence.ids();
  m.input_ids = m.original_ids;
  m.mask.assign(m.original_ids.size(), 0);
  std::vector<std::size_t> candidates;
  for (const auto& s : spans) {
    if (s.kind != TermKind::kSentiment) continue;
    for (std::size_t p = s.first; p <= s.last && p < m.size(); ++p) candidates.push_back(p);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  const std::size_t take = std::min(masking_budget(m.size(), rate), candidates.size());
  // Partial Fisher-Yates: the first `take` entries become a uniform subset.
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(candidates[i], candidates[i + rng.below(candidates.size() - i)]);
    m.mask[candidates[i]] = 1;
    m.input_ids[candidates[i]] = special::kMask;
  }
  return m;
}

/// Concatenates sentences as [CLS] s1 [SEP] s2 [SEP] ... without exceeding
/// `max_len`. A sentence that cannot fit even alone is truncated.
inline std::vector<MaskedSequence> pack_masked_sequences(const std::vector<MaskedSequence>& seqs,
                                                         std::size_t max_len) {
  if (max_len < 3) throw InvalidArgument("pack length must be >= 3");
  std::vector<MaskedSequence> packs;
  MaskedSequence cur;
  auto open = [&]() {
    cur = MaskedSequence{};
    cur.input_ids.push_back(special::kCls);
    cur.original_ids.push_back(special::kCls);
    cur.mask.push_back(0);
  };
  auto append = [&](TokenId in, TokenId orig, char m) {
    cur.input_ids.push_back(in);
    cur.original_ids.push_back(orig);
    cur.mask.push_back(m);
  };
  open();
  for (const auto& s : seqs) {
    if (s.size() == 0) continue;
    if (cur.size() > 1 && cur.size() + s.size() + 1 > max_len) {
      packs.push_back(std::move(cur));
      open();
    }
    const std::size_t room = max_len - cur.size() - 1;
    const std::size_t n = std::min(room, s.size());
    for (std::size_t i = 0; i < n; ++i) append(s.input_ids[i], s.original_ids[i], s.mask[i]);
    append(special::kSep, special::kSep, 0);
  }
  if (cur.size() > 1) packs.push_back(std::move(cur));
  return packs;
}

struct SamplingParams {
  std::size_t depth = 2;   // K
  std::size_t length = 4;  // L
  SamplingMode mode = SamplingMode::kUnion;
};

struct PairSequence {
  std::vector<TokenId> ids;
  int label = 0;
  NodeId aspect = 0;
  NodeId sentiment = 0;
};

inline std::vector<TokenId> node_ids_tokens(const SemanticGraph& graph, const std::vector<NodeId>& nodes,
                                            const Vocab& vocab) {
  std::vector<TokenId> out;
  for (NodeId n : nodes) {
    auto ids = phrase_ids(graph.node(n).word, vocab);
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

/// Sampled neighborhood of `node`, falling back to {node} when empty.
inline std::vector<NodeId> similar_set(const SemanticGraph& graph, NodeId node, const SamplingParams& sp,
                                       const FrequencyTable& freq) {
  auto s = sample_similar_nodes(graph, node, sp.depth, sp.length, freq, sp.mode).members;
  if (s.empty()) s.push_back(node);
  return s;
}

/// [CLS] SA [SEP] SS [SEP], where SA and SS are the sampled similar sets of
/// the aspect and the sentiment.
inline PairSequence make_pair_sequence(const SemanticGraph& graph, NodeId aspect, NodeId sentiment, int label,
                                       const SamplingParams& sp, const FrequencyTable& freq, const Vocab& vocab) {
  if (graph.node(aspect).kind != TermKind::kAspect || graph.node(sentiment).kind != TermKind::kSentiment) {
    throw InvalidArgument("pair sequence needs an aspect node and a sentiment node");
  }
  PairSequence p;
  p.label = label;
  p.aspect = aspect;
  p.sentiment = sentiment;
  p.ids.push_back(special::kCls);
  auto sa = node_ids_tokens(graph, similar_set(graph, aspect, sp, freq), vocab);
  p.ids.insert(p.ids.end(), sa.begin(), sa.end());
  p.ids.push_back(special::kSep);
  auto ss = node_ids_tokens(graph, similar_set(graph, sentiment, sp, freq), vocab);
  p.ids.insert(p.ids.end(), ss.begin(), ss.end());
  p.ids.push_back(special::kSep);
  return p;
}

/// A random sentiment node with no pair edge to `aspect`, if one exists.
inline std::optional<NodeId> corrupt_sentiment(const SemanticGraph& graph, NodeId aspect, Rng& rng) {
  std::vector<NodeId> options;
  for (NodeId n = 0; n < graph.node_count(); ++n) {
    if (graph.node(n).kind == TermKind::kSentiment && !graph.has_pair_edge(aspect, n)) options.push_back(n);
  }
  if (options.empty()) return std::nullopt;
  return options[rng.below(options.size())];
}

/// Up to `n_pairs_max` true pairs, each followed by a corrupted twin that
/// keeps the aspect side and swaps in a non-paired sentiment. A pair whose
/// aspect has no possible corruption is skipped so labels stay balanced.
inline std::vector<PairSequence> make_pair_sequences(const SemanticGraph& graph,
                                                     const std::vector<std::pair<NodeId, NodeId>>& pairs,
                                                     const SamplingParams& sp, const FrequencyTable& freq,
                                                     const Vocab& vocab, std::size_t n_pairs_max, Rng& rng) {
  std::vector<PairSequence> out;
  std::size_t used = 0;
  for (const auto& [a, s] : pairs) {
    if (used == n_pairs_max) break;
    if (!graph.has_pair_edge(a, s)) continue;
    auto neg = corrupt_sentiment(graph, a, rng);
    if (!neg) continue;
    out.push_back(make_pair_sequence(graph, a, s, 1, sp, freq, vocab));
    out.push_back(make_pair_sequence(graph, a, *neg, 0, sp, freq, vocab));
    ++used;
  }
  return out;
}

struct ContrastiveSet {
  NodeId anchor = 0;
  std::vector<TokenId> anchor_ids;
  std::vector<TokenId> positive_ids;  // sampled synonyms, anchor excluded
  std::vector<std::vector<TokenId>> negative_ids;
};

/// Positives are the anchor's sampled similar nodes; negatives are random
/// same-kind nodes outside the anchor's reachable set. Returns nullopt when
/// either side would be empty.
inline std::optional<ContrastiveSet> make_contrastive_set(const SemanticGraph& graph, NodeId anchor,
                                                          const SamplingParams& sp, const FrequencyTable& freq,
                                                          const Vocab& vocab, std::size_t n_negatives, Rng& rng) {
  auto positives = sample_similar_nodes(graph, anchor, sp.depth, sp.length + 1, freq, sp.mode).members;
  positives.erase(std::remove(positives.begin(), positives.end(), anchor), positives.end());
  if (positives.size() > sp.length) positives.resize(sp.length);
  if (positives.empty() || n_negatives == 0) return std::nullopt;

  const auto reach = sample_similar_nodes(graph, anchor, sp.depth, graph.node_count(), freq, SamplingMode::kUnion);
  std::vector<NodeId> pool;
  for (NodeId n = 0; n < graph.node_count(); ++n) {
    if (graph.node(n).kind != graph.node(anchor).kind) continue;
    if (std::find(reach.members.begin(), reach.members.end(), n) != reach.members.end()) continue;
    pool.push_back(n);
  }
  if (pool.empty()) return std::nullopt;

  ContrastiveSet c;
  c.anchor = anchor;
  c.anchor_ids = phrase_ids(graph.node(anchor).word, vocab);
  c.positive_ids = node_ids_tokens(graph, positives, vocab);
  for (std::size_t j = 0; j < n_negatives; ++j) {
    c.negative_ids.push_back(phrase_ids(graph.node(pool[rng.below(pool.size())]).word, vocab));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Losses

/// L_sw: summed cross-entropy over masked positions of every sequence.
inline double loss_sw(const EncoderParams& params, std::span<const MaskedSequence> batch, Gradients* grads) {
  const auto& w = params.weights;
  double loss = 0.0;
  for (const auto& seq : batch) {
    std::vector<Eigen::Index> positions;
    for (std::size_t t = 0; t < seq.mask.size(); ++t)
      if (seq.mask[t]) positions.push_back(static_cast<Eigen::Index>(t));
    if (positions.empty()) continue;
    auto cache = forward(params, seq.input_ids);
    const auto k = static_cast<Eigen::Index>(positions.size());
    Matrix h(k, cache.hidden.cols());
    for (Eigen::Index r = 0; r < k; ++r) h.row(r) = cache.hidden.row(positions[r]);
    Matrix logits = nn::affine(h, w.lm_weight, w.lm_bias);
    Matrix d_logits(k, logits.cols());
    for (Eigen::Index r = 0; r < k; ++r) {
      const RowVector z = logits.row(r);
      const double lse = nn::log_sum_exp(z);
      const TokenId y = seq.original_ids[static_cast<std::size_t>(positions[r])];
      loss += lse - z(y);
      d_logits.row(r) = (z.array() - lse).exp().matrix();
      d_logits(r, y) -= 1.0;
    }
    if (!grads) continue;
    auto& g = grads->weights;
    g.lm_weight.noalias() += h.transpose() * d_logits;
    g.lm_bias += d_logits.colwise().sum();
    const Matrix dh_rows = d_logits * w.lm_weight.transpose();
    Matrix d_hidden = Matrix::Zero(cache.hidden.rows(), cache.hidden.cols());
    for (Eigen::Index r = 0; r < k; ++r) d_hidden.row(positions[r]) += dh_rows.row(r);
    backward(params, cache, d_hidden, *grads);
  }
  return loss;
}

inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// Pair-prediction probability for one sequence.
inline double pair_probability(const EncoderParams& params, const PairSequence& seq) {
  const auto h = encode(params, seq.ids);
  const double z = h.row(0).dot(params.weights.pair_weight.col(0)) + params.weights.pair_bias(0, 0);
  return sigmoid(z);
}

/// L_ap: summed binary cross-entropy of sigmoid(u_cls . W_p + b_p).
inline double loss_ap(const EncoderParams& params, std::span<const PairSequence> batch, Gradients* grads) {
  const auto& w = params.weights;
  double loss = 0.0;
  for (const auto& seq : batch) {
    auto cache = forward(params, seq.ids);
    const RowVector u = cache.hidden.row(0);
    const double z = u.dot(w.pair_weight.col(0)) + w.pair_bias(0, 0);
    const double p = seq.label ? 1.0 : 0.0;
    loss += softplus(z) - p * z;
    if (!grads) continue;
    const double dz = sigmoid(z) - p;
    auto& g = grads->weights;
    g.pair_weight.col(0) += dz * u.transpose();
    g.pair_bias(0, 0) += dz;
    Matrix d_hidden = Matrix::Zero(cache.hidden.rows(), cache.hidden.cols());
    d_hidden.row(0) = dz * w.pair_weight.col(0).transpose();
    backward(params, cache, d_hidden, *grads);
  }
  return loss;
}

inline RowVector mean_pool(const Matrix& hidden) { return hidden.colwise().mean(); }

namespace detail {

inline constexpr double kNormFloor = 1e-12;

// cos(a, b) and its gradients; both gradients are zero under the norm guard.
inline double cosine_with_grad(const RowVector& a, const RowVector& b, RowVector* da, RowVector* db) {
  const double na = a.norm(), nb = b.norm();
  if (na < kNormFloor || nb < kNormFloor) {
    if (da) *da = RowVector::Zero(a.size());
    if (db) *db = RowVector::Zero(b.size());
    return 0.0;
  }
  const double c = a.dot(b) / (na * nb);
  if (da) *da = b / (na * nb) - c * a / (na * na);
  if (db) *db = a / (na * nb) - c * b / (nb * nb);
  return c;
}

}  // namespace detail

/// Cosine scores of one contrastive set: [positive, negative_1, ...].
inline std::vector<double> contrastive_scores(const EncoderParams& params, const ContrastiveSet& set) {
  const RowVector a = mean_pool(encode(params, set.anchor_ids));
  std::vector<double> s;
  s.push_back(detail::cosine_with_grad(a, mean_pool(encode(params, set.positive_ids)), nullptr, nullptr));
  for (const auto& n : set.negative_ids)
    s.push_back(detail::cosine_with_grad(a, mean_pool(encode(params, n)), nullptr, nullptr));
  return s;
}

/// -log(e^{s+} / (e^{s+} + sum_j e^{s-_j})) computed stably.
inline double contrastive_loss_from_scores(const std::vector<double>& scores) {
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - m);
  return m + std::log(z) - scores.front();
}

/// L_ns: contrastive loss averaged over the batch.
inline double loss_ns(const EncoderParams& params, std::span<const ContrastiveSet> batch, Gradients* grads) {
  if (batch.empty()) return 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& set : batch) {
    if (set.negative_ids.empty()) throw InvalidArgument("contrastive set needs at least one negative");
    std::vector<ForwardCache> caches;
    caches.push_back(forward(params, set.anchor_ids));
    caches.push_back(forward(params, set.positive_ids));
    for (const auto& n : set.negative_ids) caches.push_back(forward(params, n));
    std::vector<RowVector> pooled;
    for (const auto& c : caches) pooled.push_back(mean_pool(c.hidden));

    const std::size_t k = caches.size() - 1;  // scored candidates
    std::vector<double> scores(k);
    std::vector<RowVector> d_anchor(k), d_other(k);
    for (std::size_t j = 0; j < k; ++j) {
      scores[j] = detail::cosine_with_grad(pooled[0], pooled[j + 1], &d_anchor[j], &d_other[j]);
    }
    loss += contrastive_loss_from_scores(scores) * inv_b;
    if (!grads) continue;

    const double m = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double s : scores) z += std::exp(s - m);
    RowVector g_anchor = RowVector::Zero(pooled[0].size());
    for (std::size_t j = 0; j < k; ++j) {
      const double d_score = (std::exp(scores[j] - m) / z - (j == 0 ? 1.0 : 0.0)) * inv_b;
      g_anchor += d_score * d_anchor[j];
      const RowVector g_other = d_score * d_other[j];
      const auto rows = caches[j + 1].hidden.rows();
      Matrix d_hidden = g_other.replicate(rows, 1) / static_cast<double>(rows);
      backward(params, caches[j + 1], d_hidden, *grads);
    }
    const auto rows = caches[0].hidden.rows();
    Matrix d_hidden = g_anchor.replicate(rows, 1) / static_cast<double>(rows);
    backward(params, caches[0], d_hidden, *grads);
  }
  return loss;
}

struct JointLoss {
  double sw = 0.0;
  double ap = 0.0;
  double ns = 0.0;
  double total = 0.0;
};

/// L = L_sw + L_ap + L_ns; gradients of all three accumulate into `grads`.
inline JointLoss joint_loss(const EncoderParams& params, std::span<const MaskedSequence> masked,
                            std::span<const PairSequence> pairs, std::span<const ContrastiveSet> contrastive,
                            Gradients* grads) {
  JointLoss l;
  l.sw = loss_sw(params, masked, grads);
  l.ap = loss_ap(params, pairs, grads);
  l.ns = loss_ns(params, contrastive, grads);
  l.total = l.sw + l.ap + l.ns;
  return l;
}

// JSON-lines dumps for inspecting generated examples.
inline nlohmann::json to_json(const MaskedSequence& m) {
  return {{"input_ids", m.input_ids}, {"original_ids", m.original_ids}, {"mask", std::vector<int>(m.mask.begin(), m.mask.end())}};
}
inline nlohmann::json to_json(const PairSequence& p) {
  return {{"ids", p.ids}, {"label", p.label}, {"aspect", p.aspect}, {"sentiment", p.sentiment}};
}
inline nlohmann::json to_json(const ContrastiveSet& c) {
  return {{"anchor", c.anchor}, {"anchor_ids", c.anchor_ids}, {"positive_ids", c.positive_ids}, {"negative_ids", c.negative_ids}};
}

}  // namespace sgpt
