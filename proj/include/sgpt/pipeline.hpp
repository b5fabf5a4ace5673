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

// Graph mining (tagging, pairing, embeddings, clustering, graph build) and
// the mapping from a PipelineConfig to each stage's options.

#pragma once

#include <set>
#include <string>
#include <vector>

#include "sgpt/config.hpp"
#include "sgpt/corpus.hpp"
#include "sgpt/downstream.hpp"
#include "sgpt/pretrain.hpp"
#include "sgpt/semantic_graph.hpp"
#include "sgpt/similarity.hpp"
#include "sgpt/term_extraction.hpp"

namespace sgpt {

struct MiningOptions {
  SkipGramOptions skipgram{};
  double eps = 0.3;
  std::size_t min_pts = 2;
  RecycleOptions recycle{};
  GraphBuildOptions graph{};
  std::string overrides;  // override directives, possibly empty
};

struct MinedArtifacts {
  std::vector<std::vector<TermSpan>> spans;  // per sentence, corpus order
  std::vector<AspectSentimentPair> pairs;
  EmbeddingTable embeddings;
  std::vector<SynonymCluster> clusters;
  std::vector<std::string> noise;
  SemanticGraph graph;
};

/// Tagged term texts of one kind, sorted and unique.
inline std::vector<std::string> tagged_terms(const std::vector<std::vector<TermSpan>>& spans, TermKind kind) {
  std::set<std::string> out;
  for (const auto& s : spans)
    for (const auto& t : s)
      if (t.kind == kind) out.insert(t.text);
  return {out.begin(), out.end()};
}

inline MinedArtifacts mine(const Corpus& corpus, const Lexicon& lexicon, const MiningOptions& opt) {
  MinedArtifacts m;
  std::size_t ref = 0;
  for (const auto& doc : corpus.documents) {
    for (const auto& s : doc.sentences) {
      m.spans.push_back(tag_terms(s, lexicon, ref++));
      for (auto& p : match_pairs(m.spans.back())) m.pairs.push_back(std::move(p));
    }
  }
  m.embeddings = train_embeddings(corpus, opt.skipgram).embeddings;
  const auto lookup = make_lookup(m.embeddings, corpus.vocab);
  std::set<std::string> known;
  for (auto kind : {TermKind::kAspect, TermKind::kSentiment}) {
    const auto terms = tagged_terms(m.spans, kind);
    known.insert(terms.begin(), terms.end());
    if (terms.empty()) continue;
    auto res = cluster_terms(terms, kind, lookup, opt.eps, opt.min_pts);
    for (auto& c : recycle_clusters(res.clusters, lookup, opt.recycle)) m.clusters.push_back(std::move(c));
    m.noise.insert(m.noise.end(), res.noise.begin(), res.noise.end());
  }
  if (!trim(opt.overrides).empty()) m.clusters = apply_overrides(m.clusters, opt.overrides, known);
  m.graph = build_graph(m.clusters, m.pairs, opt.graph);
  return m;
}

inline MiningOptions mining_options(const PipelineConfig& c) {
  MiningOptions o;
  o.skipgram.dim = c.emb_dim;
  o.skipgram.window = c.emb_window;
  o.skipgram.negatives = c.emb_negatives;
  o.skipgram.epochs = c.emb_epochs;
  o.skipgram.learning_rate = c.emb_lr;
  o.skipgram.seed = c.seed;
  o.eps = c.dbscan_eps;
  o.min_pts = c.dbscan_min_pts;
  o.recycle.max_size = c.recycle_max_size;
  o.graph.min_pair_count = c.min_pair_count;
  o.graph.literal_edges = c.literal_edges;
  return o;
}

inline EncoderConfig encoder_config(const PipelineConfig& c, std::size_t vocab_size) {
  EncoderConfig e;
  e.vocab_size = vocab_size;
  e.d_model = c.d_model;
  e.n_layers = c.n_layers;
  e.n_heads = c.n_heads;
  e.max_len = c.max_len;
  e.ffn_dim = c.ffn_dim;
  e.init_std = c.init_std;
  e.seed = c.seed;
  e.validate();
  return e;
}

inline SamplingMode parse_sampling_mode(std::string_view s) {
  if (s == "union") return SamplingMode::kUnion;
  if (s == "as_written") return SamplingMode::kAsWritten;
  throw ConfigError("config: sampling_mode must be 'union' or 'as_written'");
}

inline PretrainOptions pretrain_options(const PipelineConfig& c) {
  PretrainOptions o;
  o.objectives = objectives_of(parse_variant(c.variant));
  o.steps = c.steps;
  o.batch_size = c.batch_size;
  o.adam.learning_rate = c.lr;
  o.adam.warmup_ratio = c.warmup_ratio;
  o.masking_rate = c.masking_rate;
  o.n_pairs_max = c.n_pairs_max;
  o.sampling.depth = c.sample_depth;
  o.sampling.length = c.sample_length;
  o.sampling.mode = parse_sampling_mode(c.sampling_mode);
  o.negatives = c.negatives;
  o.pack_len = c.pack_len;
  o.seed = c.seed;
  return o;
}

inline FinetuneOptions finetune_options(const PipelineConfig& c) {
  FinetuneOptions o;
  o.epochs = c.ft_epochs;
  o.batch_size = c.ft_batch_size;
  o.adam.learning_rate = c.ft_lr;
  o.adam.warmup_ratio = c.ft_warmup_ratio;
  o.freeze_encoder = c.freeze_encoder;
  o.seed = c.seed;
  return o;
}

/// Range checks beyond what parsing enforces.
inline void validate(const PipelineConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  need(c.emb_dim >= 2, "emb_dim must be >= 2");
  need(c.dbscan_eps > 0.0 && c.dbscan_eps <= 2.0, "dbscan_eps must be in (0, 2]");
  need(c.dbscan_min_pts >= 2, "dbscan_min_pts must be >= 2");
  need(c.d_model > 0 && c.n_heads > 0 && c.d_model % c.n_heads == 0, "d_model must be a multiple of n_heads");
  need(c.masking_rate > 0.0 && c.masking_rate <= 1.0, "masking_rate must be in (0, 1]");
  need(c.sample_depth >= 1 && c.sample_length >= 1, "sample_depth and sample_length must be >= 1");
  need(c.negatives >= 1, "negatives must be >= 1");
  need(c.pack_len >= 3 && c.pack_len <= c.max_len, "pack_len must be in [3, max_len]");
  need(c.batch_size >= 1 && c.ft_batch_size >= 1, "batch sizes must be >= 1");
  need(c.lr > 0.0 && c.ft_lr > 0.0, "learning rates must be positive");
  need(c.warmup_ratio >= 0.0 && c.warmup_ratio <= 1.0, "warmup_ratio must be in [0, 1]");
  need(c.bench_imbalance >= 1.0, "bench_imbalance must be >= 1");
  parse_variant(c.variant);
  parse_sampling_mode(c.sampling_mode);
  parse_task(c.task);
}

}  // namespace sgpt
