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

// Fine-tuning heads (sentence / aspect classification, BIO tagging with a
// linear-chain CRF), metrics, and the fine-tuning loop.

#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgpt/corpus.hpp"
#include "sgpt/encoder.hpp"
#include "sgpt/optimizer.hpp"

namespace sgpt {

// ---------------------------------------------------------------------------
// Metrics

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MetricsReport {
  std::string task;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::map<std::string, ClassScore> per_class;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["task"] = task;
    j["macro_f1"] = macro_f1;
    j["accuracy"] = accuracy;
    j["per_class"] = nlohmann::ordered_json::object();
    for (const auto& [k, s] : per_class) {
      j["per_class"][k] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
    }
    return j;
  }
};

inline double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, ClassScore* out = nullptr) {
  const double p = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double r = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  const double f = p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
  if (out) {
    out->precision = p;
    out->recall = r;
    out->f1 = f;
    out->support = tp + fn;
  }
  return f;
}

/// Macro-F1 over the classes occurring in gold or predictions.
inline MetricsReport classification_report(const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                                           std::string task = "classification") {
  if (gold.size() != pred.size()) throw InvalidArgument("metrics: gold and predictions differ in length");
  MetricsReport r;
  r.task = std::move(task);
  std::set<std::string> classes(gold.begin(), gold.end());
  classes.insert(pred.begin(), pred.end());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += gold[i] == pred[i];
  r.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());
  double sum = 0.0;
  for (const auto& c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      tp += gold[i] == c && pred[i] == c;
      fp += gold[i] != c && pred[i] == c;
      fn += gold[i] == c && pred[i] != c;
    }
    sum += f1_from_counts(tp, fp, fn, &r.per_class[c]);
  }
  r.macro_f1 = classes.empty() ? 0.0 : sum / static_cast<double>(classes.size());
  return r;
}

// ---------------------------------------------------------------------------
// BIO tags

namespace bio {
inline constexpr std::size_t kO = 0, kBAspect = 1, kIAspect = 2, kBSentiment = 3, kISentiment = 4, kCount = 5;
inline constexpr std::array<std::string_view, kCount> kNames = {"O", "B-ASP", "I-ASP", "B-SENT", "I-SENT"};
}  // namespace bio

inline std::size_t parse_bio_tag(std::string_view s) {
  for (std::size_t i = 0; i < bio::kCount; ++i)
    if (bio::kNames[i] == s) return i;
  throw InvalidArgument("unknown BIO tag '" + std::string(s) + "'");
}

struct LabeledSpan {
  std::size_t first = 0, last = 0;  // inclusive
  std::string type;                 // "ASP" or "SENT"
  auto operator<=>(const LabeledSpan&) const = default;
};

/// Spans from a BIO sequence; an I- tag without a matching open span starts
/// a new one.
inline std::vector<LabeledSpan> bio_spans(const std::vector<std::size_t>& tags) {
  std::vector<LabeledSpan> out;
  std::optional<LabeledSpan> open;
  auto type_of = [](std::size_t t) -> std::string { return t <= bio::kIAspect ? "ASP" : "SENT"; };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::size_t t = tags[i];
    const bool begin = t == bio::kBAspect || t == bio::kBSentiment;
    const bool inside = t == bio::kIAspect || t == bio::kISentiment;
    if (inside && open && open->type == type_of(t)) {
      open->last = i;
      continue;
    }
    if (open) out.push_back(*open);
    open.reset();
    if (begin || inside) open = LabeledSpan{i, i, type_of(t)};
  }
  if (open) out.push_back(*open);
  return out;
}

/// Exact-match span F1 per type (ASP, SENT) and their macro average.
inline MetricsReport extraction_report(const std::vector<std::vector<std::size_t>>& gold,
                                       const std::vector<std::vector<std::size_t>>& pred) {
  if (gold.size() != pred.size()) throw InvalidArgument("metrics: gold and predictions differ in length");
  MetricsReport r;
  r.task = "extraction";
  std::size_t tokens = 0, correct = 0;
  std::map<std::string, std::array<std::size_t, 3>> counts{{"ASP", {0, 0, 0}}, {"SENT", {0, 0, 0}}};
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != pred[i].size()) throw InvalidArgument("metrics: tag sequence length mismatch");
    for (std::size_t t = 0; t < gold[i].size(); ++t) correct += gold[i][t] == pred[i][t];
    tokens += gold[i].size();
    auto g = bio_spans(gold[i]);
    auto p = bio_spans(pred[i]);
    std::set<LabeledSpan> gs(g.begin(), g.end()), ps(p.begin(), p.end());
    for (const auto& s : ps) (gs.count(s) ? counts[s.type][0] : counts[s.type][1])++;
    for (const auto& s : gs)
      if (!ps.count(s)) counts[s.type][2]++;
  }
  double sum = 0.0;
  for (const auto& [type, c] : counts) sum += f1_from_counts(c[0], c[1], c[2], &r.per_class[type]);
  r.macro_f1 = sum / static_cast<double>(counts.size());
  r.accuracy = tokens ? static_cast<double>(correct) / static_cast<double>(tokens) : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Inputs

/// [CLS] tokens, truncated to max_len.
inline std::vector<TokenId> sentence_input(const std::vector<TokenId>& tokens, std::size_t max_len) {
  std::vector<TokenId> ids{special::kCls};
  for (TokenId t : tokens) {
    if (ids.size() == max_len) break;
    ids.push_back(t);
  }
  return ids;
}

/// [CLS] context [SEP] aspect [SEP]. The context is truncated so the aspect
/// part always fits.
inline std::vector<TokenId> aspect_input(const std::vector<TokenId>& context, const std::vector<TokenId>& aspect,
                                         std::size_t max_len) {
  if (aspect.size() + 4 > max_len) throw InvalidArgument("aspect description does not fit max_len");
  const std::size_t room = max_len - aspect.size() - 3;
  std::vector<TokenId> ids{special::kCls};
  ids.insert(ids.end(), context.begin(), context.begin() + static_cast<std::ptrdiff_t>(std::min(room, context.size())));
  ids.push_back(special::kSep);
  ids.insert(ids.end(), aspect.begin(), aspect.end());
  ids.push_back(special::kSep);
  return ids;
}

// ---------------------------------------------------------------------------
// Heads

struct ClsHead {
  Matrix weight;  // d_model x n_classes
  Matrix bias;    // 1 x n_classes

  static ClsHead zeros(std::size_t d_model, std::size_t n_classes) {
    if (n_classes < 2) throw InvalidArgument("classification head needs >= 2 classes");
    return {Matrix::Zero(static_cast<Eigen::Index>(d_model), static_cast<Eigen::Index>(n_classes)),
            Matrix::Zero(1, static_cast<Eigen::Index>(n_classes))};
  }
  static ClsHead initialize(std::size_t d_model, std::size_t n_classes, double std_dev, Rng& rng) {
    auto h = zeros(d_model, n_classes);
    for (Eigen::Index i = 0; i < h.weight.size(); ++i) h.weight.data()[i] = std_dev * rng.normal();
    return h;
  }
  std::size_t classes() const { return static_cast<std::size_t>(weight.cols()); }
  std::vector<Matrix*> tensors() { return {&weight, &bias}; }
  std::vector<const Matrix*> tensors() const { return {&weight, &bias}; }
};

/// Class distribution from the [CLS] state of an already-built input.
inline RowVector classify(const EncoderParams& params, const ClsHead& head, std::span<const TokenId> ids) {
  const Matrix h = encode(params, ids);
  return nn::softmax(h.row(0) * head.weight + head.bias);
}

inline RowVector sentence_classify(const EncoderParams& params, const ClsHead& head,
                                   const std::vector<TokenId>& tokens) {
  return classify(params, head, sentence_input(tokens, params.config.max_len));
}

inline RowVector aspect_classify(const EncoderParams& params, const ClsHead& head, const std::vector<TokenId>& context,
                                 const std::vector<TokenId>& aspect) {
  return classify(params, head, aspect_input(context, aspect, params.config.max_len));
}

/// Cross-entropy of one example; accumulates encoder and head gradients.
inline double classification_loss(const EncoderParams& params, const ClsHead& head, std::span<const TokenId> ids,
                                  std::size_t label, Gradients* enc_grads, ClsHead* head_grads) {
  auto cache = forward(params, ids);
  const RowVector u = cache.hidden.row(0);
  const RowVector z = u * head.weight + head.bias;
  const double lse = nn::log_sum_exp(z);
  const double loss = lse - z(static_cast<Eigen::Index>(label));
  if (!head_grads && !enc_grads) return loss;
  RowVector dz = (z.array() - lse).exp().matrix();
  dz(static_cast<Eigen::Index>(label)) -= 1.0;
  if (head_grads) {
    head_grads->weight.noalias() += u.transpose() * dz;
    head_grads->bias += dz;
  }
  if (enc_grads) {
    Matrix d_hidden = Matrix::Zero(cache.hidden.rows(), cache.hidden.cols());
    d_hidden.row(0) = dz * head.weight.transpose();
    backward(params, cache, d_hidden, *enc_grads);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Linear-chain CRF

struct CrfLayer {
  Matrix emit_weight;  // d_model x n_labels
  Matrix emit_bias;    // 1 x n_labels
  Matrix transitions;  // from x to
  Matrix start;        // 1 x n_labels
  Matrix end;          // 1 x n_labels

  static CrfLayer zeros(std::size_t d_model, std::size_t n_labels) {
    if (n_labels < 1) throw InvalidArgument("CRF needs at least one label");
    const auto d = static_cast<Eigen::Index>(d_model), l = static_cast<Eigen::Index>(n_labels);
    return {Matrix::Zero(d, l), Matrix::Zero(1, l), Matrix::Zero(l, l), Matrix::Zero(1, l), Matrix::Zero(1, l)};
  }
  static CrfLayer initialize(std::size_t d_model, std::size_t n_labels, double std_dev, Rng& rng) {
    auto c = zeros(d_model, n_labels);
    for (Eigen::Index i = 0; i < c.emit_weight.size(); ++i) c.emit_weight.data()[i] = std_dev * rng.normal();
    return c;
  }
  std::size_t labels() const { return static_cast<std::size_t>(transitions.rows()); }
  std::vector<Matrix*> tensors() { return {&emit_weight, &emit_bias, &transitions, &start, &end}; }
  std::vector<const Matrix*> tensors() const { return {&emit_weight, &emit_bias, &transitions, &start, &end}; }

  Matrix emissions(const Matrix& hidden) const { return nn::affine(hidden, emit_weight, emit_bias); }
};

namespace detail {
inline void check_emissions(const CrfLayer& crf, const Matrix& e) {
  if (e.rows() < 1) throw InvalidArgument("CRF: empty emission sequence");
  if (static_cast<std::size_t>(e.cols()) != crf.labels()) throw InvalidArgument("CRF: emission width mismatch");
}

// Forward log-messages alpha (n x L).
inline Matrix crf_alpha(const CrfLayer& crf, const Matrix& e) {
  const auto n = e.rows(), l = e.cols();
  Matrix alpha(n, l);
  alpha.row(0) = crf.start + e.row(0);
  for (Eigen::Index t = 1; t < n; ++t) {
    for (Eigen::Index j = 0; j < l; ++j) {
      RowVector v = alpha.row(t - 1) + crf.transitions.col(j).transpose();
      alpha(t, j) = nn::log_sum_exp(v) + e(t, j);
    }
  }
  return alpha;
}

inline Matrix crf_beta(const CrfLayer& crf, const Matrix& e) {
  const auto n = e.rows(), l = e.cols();
  Matrix beta(n, l);
  beta.row(n - 1) = crf.end;
  for (Eigen::Index t = n - 1; t-- > 0;) {
    for (Eigen::Index i = 0; i < l; ++i) {
      RowVector v = crf.transitions.row(i) + e.row(t + 1) + beta.row(t + 1);
      beta(t, i) = nn::log_sum_exp(v);
    }
  }
  return beta;
}
}  // namespace detail

/// log of the sum over all label paths of exp(path score).
inline double crf_log_partition(const CrfLayer& crf, const Matrix& emissions) {
  detail::check_emissions(crf, emissions);
  const Matrix alpha = detail::crf_alpha(crf, emissions);
  return nn::log_sum_exp(alpha.row(alpha.rows() - 1) + crf.end);
}

inline double crf_path_score(const CrfLayer& crf, const Matrix& emissions, const std::vector<std::size_t>& path) {
  detail::check_emissions(crf, emissions);
  if (path.size() != static_cast<std::size_t>(emissions.rows())) throw InvalidArgument("CRF: path length mismatch");
  double s = crf.start(0, static_cast<Eigen::Index>(path[0])) + crf.end(0, static_cast<Eigen::Index>(path.back()));
  for (std::size_t t = 0; t < path.size(); ++t) {
    const auto y = static_cast<Eigen::Index>(path[t]);
    if (path[t] >= crf.labels()) throw InvalidArgument("CRF: label out of range");
    s += emissions(static_cast<Eigen::Index>(t), y);
    if (t) s += crf.transitions(static_cast<Eigen::Index>(path[t - 1]), y);
  }
  return s;
}

struct ViterbiResult {
  std::vector<std::size_t> path;
  double score = 0.0;
};

/// Best path. Ties go to the lowest label index at every decision, which
/// on an all-zero model yields the all-zero path.
inline ViterbiResult crf_viterbi(const CrfLayer& crf, const Matrix& emissions) {
  detail::check_emissions(crf, emissions);
  const auto n = emissions.rows(), l = emissions.cols();
  Matrix delta(n, l);
  std::vector<std::vector<std::size_t>> back(static_cast<std::size_t>(n), std::vector<std::size_t>(l, 0));
  delta.row(0) = crf.start + emissions.row(0);
  for (Eigen::Index t = 1; t < n; ++t) {
    for (Eigen::Index j = 0; j < l; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (Eigen::Index i = 0; i < l; ++i) {
        const double v = delta(t - 1, i) + crf.transitions(i, j);
        if (v > best) {
          best = v;
          arg = static_cast<std::size_t>(i);
        }
      }
      delta(t, j) = best + emissions(t, j);
      back[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] = arg;
    }
  }
  ViterbiResult r;
  r.score = -std::numeric_limits<double>::infinity();
  std::size_t last = 0;
  for (Eigen::Index j = 0; j < l; ++j) {
    const double v = delta(n - 1, j) + crf.end(0, j);
    if (v > r.score) {
      r.score = v;
      last = static_cast<std::size_t>(j);
    }
  }
  r.path.assign(static_cast<std::size_t>(n), 0);
  r.path.back() = last;
  for (auto t = static_cast<std::size_t>(n) - 1; t > 0; --t) r.path[t - 1] = back[t][r.path[t]];
  return r;
}

/// Negative log-likelihood of `tags`. Gradients of the CRF parameters
/// accumulate into `crf_grads` and the emission gradient is written into
/// `d_emissions` when given.
inline double crf_nll(const CrfLayer& crf, const Matrix& emissions, const std::vector<std::size_t>& tags,
                      CrfLayer* crf_grads, Matrix* d_emissions) {
  const double log_z = crf_log_partition(crf, emissions);
  const double nll = log_z - crf_path_score(crf, emissions, tags);
  if (!crf_grads && !d_emissions) return nll;
  const auto n = emissions.rows(), l = emissions.cols();
  const Matrix alpha = detail::crf_alpha(crf, emissions);
  const Matrix beta = detail::crf_beta(crf, emissions);
  Matrix marg = (alpha + beta).array() - log_z;
  marg = marg.array().exp();
  Matrix de = marg;
  for (Eigen::Index t = 0; t < n; ++t) de(t, static_cast<Eigen::Index>(tags[static_cast<std::size_t>(t)])) -= 1.0;
  if (d_emissions) *d_emissions = de;
  if (crf_grads) {
    crf_grads->start += marg.row(0);
    crf_grads->start(0, static_cast<Eigen::Index>(tags[0])) -= 1.0;
    crf_grads->end += marg.row(n - 1);
    crf_grads->end(0, static_cast<Eigen::Index>(tags.back())) -= 1.0;
    for (Eigen::Index t = 1; t < n; ++t) {
      for (Eigen::Index i = 0; i < l; ++i)
        for (Eigen::Index j = 0; j < l; ++j)
          crf_grads->transitions(i, j) +=
              std::exp(alpha(t - 1, i) + crf.transitions(i, j) + emissions(t, j) + beta(t, j) - log_z);
      crf_grads->transitions(static_cast<Eigen::Index>(tags[static_cast<std::size_t>(t) - 1]),
                             static_cast<Eigen::Index>(tags[static_cast<std::size_t>(t)])) -= 1.0;
    }
  }
  return nll;
}

/// Tagging loss on [CLS] tokens: the CRF reads the token states only.
inline double tagging_loss(const EncoderParams& params, const CrfLayer& crf, std::span<const TokenId> ids,
                           const std::vector<std::size_t>& tags, Gradients* enc_grads, CrfLayer* crf_grads) {
  if (ids.size() != tags.size() + 1) throw InvalidArgument("tagging: ids must be [CLS] plus one id per tag");
  auto cache = forward(params, ids);
  const Matrix h = cache.hidden.bottomRows(cache.hidden.rows() - 1);
  const Matrix e = crf.emissions(h);
  Matrix de;
  const double loss = crf_nll(crf, e, tags, crf_grads, (crf_grads || enc_grads) ? &de : nullptr);
  if (crf_grads) {
    crf_grads->emit_weight.noalias() += h.transpose() * de;
    crf_grads->emit_bias += de.colwise().sum();
  }
  if (enc_grads) {
    Matrix d_hidden = Matrix::Zero(cache.hidden.rows(), cache.hidden.cols());
    d_hidden.bottomRows(d_hidden.rows() - 1) = de * crf.emit_weight.transpose();
    backward(params, cache, d_hidden, *enc_grads);
  }
  return loss;
}

inline std::vector<std::size_t> tag_sequence(const EncoderParams& params, const CrfLayer& crf,
                                             std::span<const TokenId> ids) {
  const Matrix h = encode(params, ids);
  return crf_viterbi(crf, crf.emissions(h.bottomRows(h.rows() - 1))).path;
}

// ---------------------------------------------------------------------------
// Task data

enum class TaskKind { kSentence, kAspect, kExtraction };

inline std::string_view to_string(TaskKind t) {
  switch (t) {
    case TaskKind::kSentence: return "sentence";
    case TaskKind::kAspect: return "aspect";
    case TaskKind::kExtraction: return "extraction";
  }
  return "?";
}

inline TaskKind parse_task(std::string_view s) {
  if (s == "sentence") return TaskKind::kSentence;
  if (s == "aspect") return TaskKind::kAspect;
  if (s == "extraction") return TaskKind::kExtraction;
  throw InvalidArgument("unknown task '" + std::string(s) + "' (expected sentence, aspect or extraction)");
}

/// One downstream example; `ids` is the full model input.
struct TaskExample {
  std::vector<TokenId> ids;
  std::string label;                 // classification tasks
  std::vector<std::size_t> tags;     // extraction task
};

struct TaskData {
  TaskKind kind = TaskKind::kSentence;
  std::vector<TaskExample> examples;
  std::vector<std::string> labels;  // sorted label set (classification)
};

/// Converts parsed JSON objects into model inputs.
inline TaskExample make_example(TaskKind kind, const nlohmann::json& j, const Vocab& vocab, std::size_t max_len) {
  TaskExample ex;
  if (kind == TaskKind::kExtraction) {
    const auto tokens = j.at("tokens").get<std::vector<std::string>>();
    const auto tags = j.at("tags").get<std::vector<std::string>>();
    if (tokens.size() != tags.size()) throw InvalidArgument("tokens and tags differ in length");
    if (tokens.empty()) throw InvalidArgument("empty token list");
    if (tokens.size() + 1 > max_len) throw InvalidArgument("tagged sentence exceeds max_len");
    ex.ids.push_back(special::kCls);
    for (const auto& t : tokens) ex.ids.push_back(vocab.id(to_lower_ascii(t)));
    for (const auto& t : tags) ex.tags.push_back(parse_bio_tag(t));
    return ex;
  }
  const auto text = tokenize(j.at("text").get<std::string>(), vocab).ids();
  ex.label = j.at("label").is_string() ? j.at("label").get<std::string>() : j.at("label").dump();
  if (kind == TaskKind::kSentence) {
    ex.ids = sentence_input(text, max_len);
  } else {
    ex.ids = aspect_input(text, phrase_ids(j.at("aspect").get<std::string>(), vocab), max_len);
  }
  return ex;
}

inline std::vector<nlohmann::json> parse_jsonl(std::string_view text) {
  std::vector<nlohmann::json> out;
  std::size_t line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    if (trim(raw).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(raw));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
  }
  return out;
}

inline TaskData make_task_data(TaskKind kind, const std::vector<nlohmann::json>& rows, const Vocab& vocab,
                               std::size_t max_len) {
  TaskData d;
  d.kind = kind;
  std::set<std::string> labels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      d.examples.push_back(make_example(kind, rows[i], vocab, max_len));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad task row: ") + e.what(), i + 1);
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), i + 1);
    }
    if (kind != TaskKind::kExtraction) labels.insert(d.examples.back().label);
  }
  d.labels.assign(labels.begin(), labels.end());
  return d;
}

struct Splits {
  std::vector<std::size_t> train, valid, test;
};

/// Shuffled 7:1:2 split of n indices.
inline Splits split_indices(std::size_t n, std::uint64_t seed, double train = 0.7, double valid = 0.1) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(derive_seed(seed, 0x53504c54ULL));
  rng.shuffle(idx);
  const auto n_train = static_cast<std::size_t>(std::floor(train * static_cast<double>(n)));
  const auto n_valid = static_cast<std::size_t>(std::floor(valid * static_cast<double>(n)));
  Splits s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.valid.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                 idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), idx.end());
  return s;
}

// ---------------------------------------------------------------------------
// Fine-tuning

struct FinetuneOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  AdamOptions adam{};  // lr 1e-5, warmup 0.1, no weight decay
  double head_init_std = 0.02;
  bool freeze_encoder = false;
  std::uint64_t seed = 1;
};

/// Encoder plus the head for one task.
struct TaskModel {
  TaskKind kind = TaskKind::kSentence;
  EncoderParams encoder;
  ClsHead cls;
  CrfLayer crf;
  std::vector<std::string> labels;
};

inline std::size_t label_index(const TaskModel& m, const std::string& label) {
  auto it = std::lower_bound(m.labels.begin(), m.labels.end(), label);
  if (it == m.labels.end() || *it != label) throw InvalidArgument("label '" + label + "' not seen in training");
  return static_cast<std::size_t>(it - m.labels.begin());
}

inline TaskModel make_task_model(TaskKind kind, const EncoderParams& encoder, std::vector<std::string> labels,
                                 double head_init_std, std::uint64_t seed) {
  TaskModel m;
  m.kind = kind;
  m.encoder = encoder;
  m.labels = std::move(labels);
  Rng rng(derive_seed(seed, 0x48454144ULL));
  if (kind == TaskKind::kExtraction) {
    m.crf = CrfLayer::initialize(encoder.config.d_model, bio::kCount, head_init_std, rng);
  } else {
    if (m.labels.size() < 2) throw InvalidArgument("classification needs at least two labels");
    m.cls = ClsHead::initialize(encoder.config.d_model, m.labels.size(), head_init_std, rng);
  }
  return m;
}

inline MetricsReport evaluate(const TaskModel& m, const std::vector<TaskExample>& data,
                              const std::vector<std::size_t>& subset) {
  if (m.kind == TaskKind::kExtraction) {
    std::vector<std::vector<std::size_t>> gold, pred;
    for (std::size_t i : subset) {
      gold.push_back(data[i].tags);
      pred.push_back(tag_sequence(m.encoder, m.crf, data[i].ids));
    }
    return extraction_report(gold, pred);
  }
  std::vector<std::string> gold, pred;
  for (std::size_t i : subset) {
    gold.push_back(data[i].label);
    const RowVector p = classify(m.encoder, m.cls, data[i].ids);
    Eigen::Index arg = 0;
    for (Eigen::Index c = 1; c < p.size(); ++c)
      if (p(c) > p(arg)) arg = c;
    pred.push_back(m.labels[static_cast<std::size_t>(arg)]);
  }
  auto r = classification_report(gold, pred, std::string(to_string(m.kind)));
  return r;
}

/// Mean per-example loss of a model over `subset`.
inline double mean_loss(const TaskModel& m, const std::vector<TaskExample>& data, const std::vector<std::size_t>& subset) {
  if (subset.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i : subset) {
    const auto& ex = data[i];
    sum += m.kind == TaskKind::kExtraction
               ? tagging_loss(m.encoder, m.crf, ex.ids, ex.tags, nullptr, nullptr)
               : classification_loss(m.encoder, m.cls, ex.ids, label_index(m, ex.label), nullptr, nullptr);
  }
  return sum / static_cast<double>(subset.size());
}

struct FinetuneResult {
  TaskModel model;  // weights of the selected epoch
  std::size_t best_epoch = 0;
  std::vector<double> valid_loss;
  std::vector<double> valid_macro_f1;
  MetricsReport test;
};

/// Mini-batch Adam over encoder and head; keeps the epoch with the lowest
/// validation loss (earliest on ties) and reports it on the test split.
inline FinetuneResult finetune(const EncoderParams& init, const TaskData& data, const Splits& splits,
                               const FinetuneOptions& opt) {
  if (splits.train.empty()) throw InvalidArgument("finetune: empty training split");
  if (opt.epochs == 0 || opt.batch_size == 0) throw InvalidArgument("finetune: epochs and batch size must be > 0");
  {
    std::set<std::size_t> seen;
    for (const auto* part : {&splits.train, &splits.valid, &splits.test})
      for (std::size_t i : *part)
        if (!seen.insert(i).second) throw InvalidArgument("finetune: splits overlap");
  }
  TaskModel model = make_task_model(data.kind, init, data.labels, opt.head_init_std, opt.seed);
  Adam adam(opt.adam);
  const std::size_t batches = (splits.train.size() + opt.batch_size - 1) / opt.batch_size;
  const std::size_t total = batches * opt.epochs;
  std::size_t step = 0;

  FinetuneResult result;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order = splits.train;
  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    Rng rng(derive_seed(opt.seed, 0x46544550ULL, epoch));
    rng.shuffle(order);
    for (std::size_t b = 0; b < batches; ++b) {
      Gradients g(model.encoder.config);
      ClsHead cls_g = data.kind == TaskKind::kExtraction ? ClsHead{} : ClsHead::zeros(model.encoder.config.d_model, model.labels.size());
      CrfLayer crf_g = data.kind == TaskKind::kExtraction ? CrfLayer::zeros(model.encoder.config.d_model, bio::kCount) : CrfLayer{};
      Gradients* enc = opt.freeze_encoder ? nullptr : &g;
      const std::size_t lo = b * opt.batch_size, hi = std::min(order.size(), lo + opt.batch_size);
      for (std::size_t k = lo; k < hi; ++k) {
        const auto& ex = data.examples[order[k]];
        if (data.kind == TaskKind::kExtraction) {
          tagging_loss(model.encoder, model.crf, ex.ids, ex.tags, enc, &crf_g);
        } else {
          classification_loss(model.encoder, model.cls, ex.ids, label_index(model, ex.label), enc, &cls_g);
        }
      }
      // Mean over the batch.
      const double inv = 1.0 / static_cast<double>(hi - lo);
      std::vector<Matrix*> params;
      std::vector<const Matrix*> grads;
      if (!opt.freeze_encoder) {
        g *= inv;
        params = tensor_refs(model.encoder.weights);
        grads = tensor_refs(std::as_const(g).weights);
      }
      auto add = [&](std::vector<Matrix*> p, std::vector<Matrix*> q) {
        for (std::size_t i = 0; i < p.size(); ++i) {
          *q[i] *= inv;
          params.push_back(p[i]);
          grads.push_back(q[i]);
        }
      };
      if (data.kind == TaskKind::kExtraction) add(model.crf.tensors(), crf_g.tensors());
      else add(model.cls.tensors(), cls_g.tensors());
      ++step;
      adam.step(params, grads, scheduled_learning_rate(opt.adam.learning_rate, opt.adam.warmup_ratio, step, total));
    }
    const auto& vs = splits.valid.empty() ? splits.train : splits.valid;
    const double loss = mean_loss(model, data.examples, vs);
    result.valid_loss.push_back(loss);
    result.valid_macro_f1.push_back(evaluate(model, data.examples, vs).macro_f1);
    if (loss < best) {
      best = loss;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  result.test = evaluate(result.model, data.examples, splits.test.empty() ? splits.train : splits.test);
  return result;
}

}  // namespace sgpt
