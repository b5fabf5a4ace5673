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

// Continued pretraining with the joint objective.
//
// Three example streams feed every step: packed masked sequences, pair
// sequences and contrastive sets. Each stream regenerates and reshuffles its
// items once per pass with an RNG derived from (seed, stream, pass), so the
// batch drawn at any step depends only on the seed and the step number. That
// makes an interrupted run resumable with an identical trajectory.

#pragma once

#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "sgpt/checkpoint.hpp"
#include "sgpt/objectives.hpp"

namespace sgpt {

struct ObjectiveSet {
  bool sw = true;
  bool ap = true;
  bool ns = true;
  bool any() const { return sw || ap || ns; }
  bool operator==(const ObjectiveSet&) const = default;
};

/// Pretraining variants compared by the experiment harness.
enum class Variant { kNone, kSwOnly, kSwAp, kSwNs, kFull };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kNone: return "none";
    case Variant::kSwOnly: return "sw_only";
    case Variant::kSwAp: return "sw+ap";
    case Variant::kSwNs: return "sw+ns";
    case Variant::kFull: return "full";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  for (auto v : {Variant::kNone, Variant::kSwOnly, Variant::kSwAp, Variant::kSwNs, Variant::kFull})
    if (to_string(v) == s) return v;
  throw InvalidArgument("unknown pretraining variant '" + std::string(s) + "'");
}

inline ObjectiveSet objectives_of(Variant v) {
  switch (v) {
    case Variant::kNone: return {false, false, false};
    case Variant::kSwOnly: return {true, false, false};
    case Variant::kSwAp: return {true, true, false};
    case Variant::kSwNs: return {true, false, true};
    case Variant::kFull: return {true, true, true};
  }
  return {};
}

struct PretrainOptions {
  ObjectiveSet objectives{};
  std::size_t steps = 1000;
  std::size_t batch_size = 32;
  AdamOptions adam{};
  double masking_rate = 0.2;
  std::size_t n_pairs_max = 2;
  SamplingParams sampling{};
  std::size_t negatives = 4;
  std::size_t pack_len = 128;
  std::uint64_t seed = 1;
};

/// Sentence-level inputs for example generation.
struct PretrainData {
  std::vector<Sentence> sentences;
  std::vector<std::vector<TermSpan>> spans;
  std::vector<std::vector<std::pair<NodeId, NodeId>>> pairs;  // (aspect, sentiment) graph nodes
  std::vector<NodeId> anchors;                                 // nodes with at least one similarity edge
  SemanticGraph graph;
  FrequencyTable freq;
  Vocab vocab;
};

inline PretrainData build_pretrain_data(const Corpus& corpus, const Lexicon& lexicon, const SemanticGraph& graph) {
  PretrainData d;
  d.graph = graph;
  d.freq = build_frequency_table(corpus);
  d.vocab = corpus.vocab;
  std::size_t ref = 0;
  for (const auto& doc : corpus.documents) {
    for (const auto& s : doc.sentences) {
      auto spans = tag_terms(s, lexicon, ref++);
      std::vector<std::pair<NodeId, NodeId>> ps;
      for (const auto& p : match_pairs(spans)) {
        auto a = graph.find(p.aspect.text, TermKind::kAspect);
        auto b = graph.find(p.sentiment.text, TermKind::kSentiment);
        if (a && b && graph.has_pair_edge(*a, *b)) ps.emplace_back(*a, *b);
      }
      d.sentences.push_back(s);
      d.spans.push_back(std::move(spans));
      d.pairs.push_back(std::move(ps));
    }
  }
  for (NodeId n = 0; n < graph.node_count(); ++n)
    if (!graph.similar(n).empty()) d.anchors.push_back(n);
  return d;
}

/// Items regenerated once per pass; `take` walks passes back to back.
template <typename T>
class EpochStream {
 public:
  using Maker = std::function<std::vector<T>(std::size_t pass)>;
  EpochStream() = default;
  explicit EpochStream(Maker make) : make_(std::move(make)) {}

  std::vector<T> take(std::size_t n) {
    std::vector<T> out;
    if (!make_ || dead_) return out;
    while (out.size() < n) {
      if (pos_ == items_.size()) {
        items_ = make_(pass_++);
        pos_ = 0;
        if (items_.empty()) {
          dead_ = true;
          break;
        }
      }
      out.push_back(items_[pos_++]);
    }
    return out;
  }

 private:
  Maker make_;
  std::vector<T> items_;
  std::size_t pass_ = 0, pos_ = 0;
  bool dead_ = false;
};

struct LossLogRow {
  std::size_t step = 0;
  JointLoss loss;

  std::string csv() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g", step, loss.sw, loss.ap, loss.ns, loss.total);
    return buf;
  }
};

inline constexpr std::string_view kLossLogHeader = "step,L_sw,L_ap,L_ns,L";

class Pretrainer {
 public:
  Pretrainer(const PretrainData& data, PretrainOptions opt) : data_(data), opt_(std::move(opt)) {
    if (opt_.batch_size == 0) throw InvalidArgument("pretrain: batch size must be > 0");
    if (!(opt_.masking_rate > 0.0 && opt_.masking_rate <= 1.0)) throw InvalidArgument("pretrain: masking rate must be in (0, 1]");
    if (opt_.negatives == 0) throw InvalidArgument("pretrain: need at least one negative");
    reset_streams();
  }

  static TrainingState initial_state(const EncoderConfig& cfg, const PretrainOptions& opt) {
    return {EncoderParams::initialize(cfg), Adam(opt.adam), 0};
  }

  /// Runs until `state.step == opt.steps` or `stop_after` steps were taken in
  /// this call. `state` may come from a saved training state.
  void run(TrainingState& state, const std::function<void(const LossLogRow&)>& on_step = {},
           std::size_t stop_after = static_cast<std::size_t>(-1)) {
    if (state.params.config.max_len < opt_.pack_len) throw InvalidArgument("pretrain: pack_len exceeds encoder max_len");
    if (state.step != cursor_) {
      reset_streams();
      for (std::size_t s = 0; s < state.step; ++s) draw();
    }
    std::size_t taken = 0;
    while (state.step < opt_.steps && taken < stop_after) {
      auto batch = draw();
      Gradients g(state.params.config);
      LossLogRow row;
      row.step = state.step + 1;
      row.loss = joint_loss(state.params, batch.masked, batch.pairs, batch.contrastive, &g);
      state.optimizer.step(state.params, g, row.step, opt_.steps);
      state.step = row.step;
      ++taken;
      if (on_step) on_step(row);
    }
  }

  struct Batch {
    std::vector<MaskedSequence> masked;
    std::vector<PairSequence> pairs;
    std::vector<ContrastiveSet> contrastive;
  };

  /// Next batch of the three streams; disabled objectives yield empty parts.
  Batch draw() {
    Batch b;
    if (opt_.objectives.sw) b.masked = masked_.take(opt_.batch_size);
    if (opt_.objectives.ap) b.pairs = pairs_.take(opt_.batch_size);
    if (opt_.objectives.ns) b.contrastive = contrastive_.take(opt_.batch_size);
    ++cursor_;
    return b;
  }

  const PretrainOptions& options() const { return opt_; }

 private:
  std::vector<std::size_t> order(std::uint64_t stream, std::size_t pass, std::size_t n) const {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(derive_seed(opt_.seed, stream, pass, 0x4f52ULL));
    rng.shuffle(idx);
    return idx;
  }

  void reset_streams() {
    cursor_ = 0;
    const PretrainData* d = &data_;
    const PretrainOptions* o = &opt_;
    masked_ = EpochStream<MaskedSequence>([this, d, o](std::size_t pass) {
      Rng rng(derive_seed(o->seed, 1, pass));
      std::vector<MaskedSequence> seqs;
      for (std::size_t i : order(1, pass, d->sentences.size())) {
        auto m = make_masked_sequence(d->sentences[i], d->spans[i], o->masking_rate, rng);
        if (m.size() + 2 > o->pack_len) continue;
        seqs.push_back(std::move(m));
      }
      auto packs = pack_masked_sequences(seqs, o->pack_len);
      std::erase_if(packs, [](const MaskedSequence& p) { return p.masked_count() == 0; });
      return packs;
    });
    pairs_ = EpochStream<PairSequence>([this, d, o](std::size_t pass) {
      Rng rng(derive_seed(o->seed, 2, pass));
      std::vector<PairSequence> out;
      for (std::size_t i : order(2, pass, d->sentences.size())) {
        auto ps = make_pair_sequences(d->graph, d->pairs[i], o->sampling, d->freq, d->vocab, o->n_pairs_max, rng);
        for (auto& p : ps) out.push_back(std::move(p));
      }
      return out;
    });
    contrastive_ = EpochStream<ContrastiveSet>([this, d, o](std::size_t pass) {
      Rng rng(derive_seed(o->seed, 3, pass));
      std::vector<ContrastiveSet> out;
      for (std::size_t i : order(3, pass, d->anchors.size())) {
        if (auto c = make_contrastive_set(d->graph, d->anchors[i], o->sampling, d->freq, d->vocab, o->negatives, rng))
          out.push_back(std::move(*c));
      }
      return out;
    });
  }

  const PretrainData& data_;
  PretrainOptions opt_;
  EpochStream<MaskedSequence> masked_;
  EpochStream<PairSequence> pairs_;
  EpochStream<ContrastiveSet> contrastive_;
  std::size_t cursor_ = 0;
};

}  // namespace sgpt
