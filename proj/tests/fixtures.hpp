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


// A small hand-built review world shared by several tests: a corpus, its
// lexicon, synonym clusters and the graph mined from them.

#pragma once

#include <string>
#include <vector>

#include "sgpt/pretrain.hpp"

namespace fixture {

inline const char* kReviews =
    "the color is great and the fabric feels soft .\n"
    "bad colour , but the material is smooth\n"
    "nice hue ; poor fabric\n"
    "the price is low and the delivery was quick\n"
    "great material , good color , the shipping was slow\n"
    "the hue looks good but the cost is high\n"
    "soft fabric and a nice colour\n"
    "poor delivery , the price is high\n";

inline sgpt::Lexicon lexicon() {
  return sgpt::Lexicon::from_sets({"color", "colour", "hue", "fabric", "material", "price", "cost", "delivery",
                                   "shipping"},
                                  {"great", "nice", "good", "bad", "poor", "soft", "smooth", "low", "high", "quick",
                                   "slow"});
}

inline std::vector<sgpt::SynonymCluster> clusters() {
  using sgpt::TermKind;
  return {{{"color", "colour", "hue"}, TermKind::kAspect, false},
          {{"fabric", "material"}, TermKind::kAspect, false},
          {{"cost", "price"}, TermKind::kAspect, false},
          {{"delivery", "shipping"}, TermKind::kAspect, false},
          {{"good", "great", "nice"}, TermKind::kSentiment, false},
          {{"bad", "poor"}, TermKind::kSentiment, false},
          {{"smooth", "soft"}, TermKind::kSentiment, false},
          {{"high", "low"}, TermKind::kSentiment, false},
          {{"quick", "slow"}, TermKind::kSentiment, false}};
}

struct World {
  sgpt::Corpus corpus;
  sgpt::Lexicon lexicon;
  sgpt::SemanticGraph graph;
  sgpt::PretrainData data;
};

inline World world() {
  World w{sgpt::ingest_text(kReviews), lexicon(), {}, {}};
  std::vector<sgpt::AspectSentimentPair> pairs;
  std::size_t ref = 0;
  for (const auto* s : w.corpus.sentences())
    for (auto& p : sgpt::match_pairs(sgpt::tag_terms(*s, w.lexicon, ref++))) pairs.push_back(p);
  w.graph = sgpt::build_graph(clusters(), pairs, {1, false});
  w.data = sgpt::build_pretrain_data(w.corpus, w.lexicon, w.graph);
  return w;
}

/// d_model 8, two layers, wide init so gradients are far from zero.
inline sgpt::EncoderConfig small_encoder(std::size_t vocab_size, std::uint64_t seed = 7) {
  sgpt::EncoderConfig c;
  c.vocab_size = vocab_size;
  c.d_model = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.max_len = 32;
  c.init_std = 0.5;
  c.seed = seed;
  return c;
}

}  // namespace fixture
