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


#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sgpt/objectives.hpp"

namespace sgpt {
namespace {

class Objectives : public ::testing::Test {
 protected:
  void SetUp() override {
    w = fixture::world();
    params = EncoderParams::initialize(fixture::small_encoder(w.corpus.vocab.size()));
  }

  std::vector<MaskedSequence> masked_batch(std::uint64_t seed) const {
    Rng rng(seed);
    std::vector<MaskedSequence> seqs;
    for (std::size_t i = 0; i < w.data.sentences.size(); ++i)
      seqs.push_back(make_masked_sequence(w.data.sentences[i], w.data.spans[i], 0.2, rng));
    return pack_masked_sequences(seqs, 24);
  }
  std::vector<PairSequence> pair_batch(std::uint64_t seed) const {
    Rng rng(seed);
    std::vector<PairSequence> out;
    for (const auto& ps : w.data.pairs)
      for (auto& p : make_pair_sequences(w.graph, ps, {}, w.data.freq, w.data.vocab, 2, rng)) out.push_back(p);
    out.resize(std::min<std::size_t>(out.size(), 4));
    return out;
  }
  std::vector<ContrastiveSet> contrastive_batch(std::uint64_t seed) const {
    Rng rng(seed);
    std::vector<ContrastiveSet> out;
    for (NodeId a : w.data.anchors)
      if (auto c = make_contrastive_set(w.graph, a, {}, w.data.freq, w.data.vocab, 3, rng)) out.push_back(*c);
    out.resize(std::min<std::size_t>(out.size(), 3));
    return out;
  }

  fixture::World w;
  EncoderParams params;
};

TEST(ContrastiveClosedForm, EqualScoresGiveLn2) {
  EXPECT_NEAR(contrastive_loss_from_scores({0.3, 0.3}), std::log(2.0), 1e-12);
  EXPECT_NEAR(contrastive_loss_from_scores({-0.9, -0.9}), std::log(2.0), 1e-12);
}

TEST(ContrastiveClosedForm, OppositeScores) {
  EXPECT_NEAR(contrastive_loss_from_scores({1.0, -1.0}), 0.12692801104297263, 1e-12);
  EXPECT_NEAR(contrastive_loss_from_scores({1.0, -1.0}), std::log1p(std::exp(-2.0)), 1e-15);
}

TEST(ContrastiveClosedForm, ManyNegatives) {
  // k equal scores: -log(1/k).
  EXPECT_NEAR(contrastive_loss_from_scores({0.1, 0.1, 0.1, 0.1, 0.1}), std::log(5.0), 1e-12);
}

TEST(Cosine, ZeroNormGuard) {
  RowVector a = RowVector::Zero(3), b = RowVector::Ones(3), da, db;
  EXPECT_EQ(detail::cosine_with_grad(a, b, &da, &db), 0.0);
  EXPECT_TRUE(da.isZero());
  EXPECT_TRUE(db.isZero());
}

TEST(Cosine, GradientMatchesFiniteDifferences) {
  Rng rng(61);
  RowVector a(4), b(4), da, db;
  for (int i = 0; i < 4; ++i) {
    a(i) = rng.normal();
    b(i) = rng.normal();
  }
  detail::cosine_with_grad(a, b, &da, &db);
  for (int i = 0; i < 4; ++i) {
    RowVector ap = a, am = a;
    ap(i) += 1e-6;
    am(i) -= 1e-6;
    const double num = (detail::cosine_with_grad(ap, b, nullptr, nullptr) -
                        detail::cosine_with_grad(am, b, nullptr, nullptr)) / 2e-6;
    EXPECT_NEAR(da(i), num, 1e-8);
  }
}

TEST(Softplus, Stable) {
  EXPECT_EQ(softplus(1000.0), 1000.0);
  EXPECT_NEAR(softplus(-1000.0), 0.0, 1e-300);
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
  EXPECT_EQ(sigmoid(0.0), 0.5);
}

TEST(Masking, BudgetFloors) {
  EXPECT_EQ(masking_budget(10, 0.2), 2u);
  EXPECT_EQ(masking_budget(4, 0.2), 0u);
  EXPECT_EQ(masking_budget(5, 0.2), 1u);
  EXPECT_EQ(masking_budget(15, 0.2), 3u);
}

TEST_F(Objectives, MaskingOnlyTouchesSentimentTokens) {
  Rng rng(62);
  for (int rep = 0; rep < 50; ++rep) {
    for (std::size_t i = 0; i < w.data.sentences.size(); ++i) {
      const auto& s = w.data.sentences[i];
      const auto m = make_masked_sequence(s, w.data.spans[i], 0.2, rng);
      std::set<std::size_t> sentiment;
      for (const auto& t : w.data.spans[i])
        if (t.kind == TermKind::kSentiment)
          for (std::size_t p = t.first; p <= t.last; ++p) sentiment.insert(p);
      ASSERT_EQ(m.masked_count(), std::min(masking_budget(s.size(), 0.2), sentiment.size()));
      for (std::size_t p = 0; p < m.size(); ++p) {
        ASSERT_EQ(m.original_ids[p], s.tokens[p].id);
        if (m.mask[p]) {
          ASSERT_TRUE(sentiment.count(p));
          ASSERT_EQ(m.input_ids[p], special::kMask);
        } else {
          ASSERT_EQ(m.input_ids[p], m.original_ids[p]);
        }
      }
    }
  }
}

TEST(MaskingProperty, RandomSentencesRespectBudget) {
  Rng rng(63);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t len = 1 + rng.below(40);
    std::string text;
    for (std::size_t i = 0; i < len; ++i) text += "w" + std::to_string(rng.below(6)) + " ";
    auto s = tokenize(text, Vocab{});
    std::vector<TermSpan> spans;
    for (std::size_t p = 0; p < len; ++p)
      if (rng.below(3) == 0) spans.push_back({0, p, p, rng.below(2) ? TermKind::kSentiment : TermKind::kAspect, "w"});
    const double rate = rng.below(4) == 0 ? 0.2 : rng.uniform(0.01, 1.0);
    const auto m = make_masked_sequence(s, spans, rate, rng);
    ASSERT_LE(m.masked_count(), masking_budget(len, rate));
    ASSERT_LE(m.masked_count(), static_cast<std::size_t>(std::floor(rate * static_cast<double>(len) + 1e-9)));
  }
}

TEST(Masking, SubsetIsUniform) {
  // Ten tokens, three sentiment positions, budget two: each position is
  // masked with probability 2/3.
  auto s = tokenize("a b c d e f g h i j", Vocab{});
  std::vector<TermSpan> spans = {{0, 1, 1, TermKind::kSentiment, "b"},
                                 {0, 4, 5, TermKind::kSentiment, "e f"},
                                 {0, 7, 7, TermKind::kAspect, "h"}};
  Rng rng(64);
  std::vector<int> hits(10, 0);
  const int n = 30000;
  for (int t = 0; t < n; ++t) {
    const auto m = make_masked_sequence(s, spans, 0.2, rng);
    ASSERT_EQ(m.masked_count(), 2u);
    for (std::size_t p = 0; p < 10; ++p) hits[p] += m.mask[p];
  }
  for (std::size_t p : {1u, 4u, 5u}) EXPECT_NEAR(hits[p] / static_cast<double>(n), 2.0 / 3.0, 0.015);
  for (std::size_t p : {0u, 2u, 3u, 6u, 7u, 8u, 9u}) EXPECT_EQ(hits[p], 0);
}

TEST(Masking, RejectsBadRate) {
  auto s = tokenize("a b", Vocab{});
  Rng rng(1);
  EXPECT_THROW(make_masked_sequence(s, {}, 0.0, rng), InvalidArgument);
  EXPECT_THROW(make_masked_sequence(s, {}, 1.5, rng), InvalidArgument);
}

TEST(Packing, LayoutAndCapacity) {
  Rng rng(65);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<MaskedSequence> seqs;
    std::vector<TokenId> flat;
    const std::size_t max_len = 3 + rng.below(20);
    for (std::size_t k = 0, n = rng.below(8); k < n; ++k) {
      MaskedSequence m;
      for (std::size_t i = 0, len = 1 + rng.below(max_len - 2); i < len; ++i) {
        const auto id = static_cast<TokenId>(5 + rng.below(20));
        const char masked = rng.below(4) == 0;
        m.original_ids.push_back(id);
        m.input_ids.push_back(masked ? special::kMask : id);
        m.mask.push_back(masked);
        flat.push_back(id);
      }
      seqs.push_back(m);
    }
    const auto packs = pack_masked_sequences(seqs, max_len);
    std::vector<TokenId> unpacked;
    std::size_t masks_in = 0, masks_out = 0;
    for (const auto& s : seqs) masks_in += s.masked_count();
    for (const auto& p : packs) {
      ASSERT_LE(p.size(), max_len);
      ASSERT_EQ(p.input_ids.front(), special::kCls);
      ASSERT_EQ(p.input_ids.back(), special::kSep);
      masks_out += p.masked_count();
      for (std::size_t i = 1; i < p.size(); ++i)
        if (p.original_ids[i] != special::kSep) unpacked.push_back(p.original_ids[i]);
    }
    ASSERT_EQ(unpacked, flat);
    ASSERT_EQ(masks_out, masks_in);
  }
}

TEST(Packing, TooSmallRejected) { EXPECT_THROW(pack_masked_sequences({}, 2), InvalidArgument); }

TEST_F(Objectives, SwLossIsZeroWithoutMasks) {
  MaskedSequence m;
  m.input_ids = m.original_ids = {special::kCls, 5, 6, special::kSep};
  m.mask.assign(4, 0);
  Gradients g(params.config);
  const std::vector<MaskedSequence> batch = {m, m};
  EXPECT_EQ(loss_sw(params, batch, &g), 0.0);
  EXPECT_EQ(g.max_abs(), 0.0);
  EXPECT_EQ(loss_sw(params, std::span<const MaskedSequence>{}, nullptr), 0.0);
}

TEST_F(Objectives, SwLossMatchesDirectCrossEntropy) {
  auto batch = masked_batch(66);
  double expected = 0.0;
  for (const auto& seq : batch) {
    const Matrix h = encode(params, seq.input_ids);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      if (!seq.mask[t]) continue;
      const auto dist = predict_token_distribution(params, h.row(static_cast<Eigen::Index>(t)));
      expected -= std::log(dist(seq.original_ids[t]));
    }
  }
  ASSERT_GT(expected, 0.0);
  EXPECT_NEAR(loss_sw(params, batch, nullptr), expected, 1e-10);
}

TEST_F(Objectives, PairSequencesAreWellFormed) {
  Rng rng(67);
  std::size_t seen = 0;
  for (const auto& ps : w.data.pairs) {
    const auto seqs = make_pair_sequences(w.graph, ps, {}, w.data.freq, w.data.vocab, 2, rng);
    ASSERT_EQ(seqs.size() % 2, 0u);
    ASSERT_LE(seqs.size(), 4u);
    for (std::size_t k = 0; k < seqs.size(); k += 2) {
      const auto& pos = seqs[k];
      const auto& neg = seqs[k + 1];
      EXPECT_EQ(pos.label, 1);
      EXPECT_EQ(neg.label, 0);
      EXPECT_EQ(pos.aspect, neg.aspect);
      EXPECT_TRUE(w.graph.has_pair_edge(pos.aspect, pos.sentiment));
      EXPECT_FALSE(w.graph.has_pair_edge(neg.aspect, neg.sentiment));
      EXPECT_EQ(pos.ids.front(), special::kCls);
      EXPECT_EQ(pos.ids.back(), special::kSep);
      EXPECT_EQ(std::count(pos.ids.begin(), pos.ids.end(), special::kSep), 2);
      ++seen;
    }
  }
  EXPECT_GT(seen, 0u);
}

TEST_F(Objectives, PairSequenceLayout) {
  const auto color = *w.graph.find("color", TermKind::kAspect);
  const auto great = *w.graph.find("great", TermKind::kSentiment);
  SamplingParams sp;
  sp.depth = 1;
  sp.length = 2;
  auto seq = make_pair_sequence(w.graph, color, great, 1, sp, w.data.freq, w.data.vocab);
  auto sa = sample_similar_nodes(w.graph, color, 1, 2, w.data.freq).members;
  auto ss = sample_similar_nodes(w.graph, great, 1, 2, w.data.freq).members;
  std::vector<TokenId> expected = {special::kCls};
  for (auto n : sa) expected.push_back(w.corpus.vocab.id(w.graph.node(n).word));
  expected.push_back(special::kSep);
  for (auto n : ss) expected.push_back(w.corpus.vocab.id(w.graph.node(n).word));
  expected.push_back(special::kSep);
  EXPECT_EQ(seq.ids, expected);
  EXPECT_THROW(make_pair_sequence(w.graph, great, color, 1, sp, w.data.freq, w.data.vocab), InvalidArgument);
}

TEST_F(Objectives, ContrastiveSetsSeparateReachable) {
  Rng rng(68);
  std::size_t built = 0;
  for (NodeId a : w.data.anchors) {
    auto c = make_contrastive_set(w.graph, a, {}, w.data.freq, w.data.vocab, 4, rng);
    if (!c) continue;
    ++built;
    const auto reach = oracle::reachable(w.graph, a, 2);
    std::set<TokenId> reach_ids;
    for (auto n : reach) reach_ids.insert(w.corpus.vocab.id(w.graph.node(n).word));
    EXPECT_EQ(c->negative_ids.size(), 4u);
    for (auto id : c->positive_ids) EXPECT_TRUE(reach_ids.count(id));
    for (const auto& neg : c->negative_ids)
      for (auto id : neg) EXPECT_FALSE(reach_ids.count(id));
    EXPECT_EQ(std::count(c->positive_ids.begin(), c->positive_ids.end(), c->anchor_ids.front()), 0);
  }
  EXPECT_GT(built, 0u);
}

TEST_F(Objectives, PairLossIsBinaryCrossEntropy) {
  const auto batch = pair_batch(69);
  ASSERT_FALSE(batch.empty());
  double expected = 0.0;
  for (const auto& p : batch) {
    const double prob = pair_probability(params, p);
    expected -= p.label ? std::log(prob) : std::log(1.0 - prob);
  }
  EXPECT_NEAR(loss_ap(params, batch, nullptr), expected, 1e-10);
}

TEST_F(Objectives, ContrastiveLossAveragesScores) {
  const auto batch = contrastive_batch(70);
  ASSERT_FALSE(batch.empty());
  double expected = 0.0;
  for (const auto& c : batch) expected += contrastive_loss_from_scores(contrastive_scores(params, c));
  EXPECT_NEAR(loss_ns(params, batch, nullptr), expected / static_cast<double>(batch.size()), 1e-12);
}

TEST_F(Objectives, GradientsMatchFiniteDifferences) {
  const auto masked = masked_batch(71);
  const auto pairs = pair_batch(72);
  const auto contrastive = contrastive_batch(73);
  auto check = [&](auto&& loss_fn, const char* name) {
    Gradients g(params.config);
    loss_fn(&g);
    auto r = oracle::check_gradients(tensor_refs(params.weights), tensor_refs(std::as_const(g).weights),
                                     [&] { return loss_fn(nullptr); });
    EXPECT_LT(r.max_rel_error, 1e-3) << name << ": " << r.worst;
  };
  check([&](Gradients* g) { return loss_sw(params, masked, g); }, "sw");
  check([&](Gradients* g) { return loss_ap(params, pairs, g); }, "ap");
  check([&](Gradients* g) { return loss_ns(params, contrastive, g); }, "ns");
}

TEST_F(Objectives, JointLossIsAdditive) {
  const auto masked = masked_batch(74);
  const auto pairs = pair_batch(75);
  const auto contrastive = contrastive_batch(76);
  Gradients joint(params.config), sum(params.config), part(params.config);
  const auto l = joint_loss(params, masked, pairs, contrastive, &joint);
  EXPECT_EQ(l.total, l.sw + l.ap + l.ns);
  EXPECT_EQ(l.sw, loss_sw(params, masked, &part));
  sum += part;
  part.zero();
  EXPECT_EQ(l.ap, loss_ap(params, pairs, &part));
  sum += part;
  part.zero();
  EXPECT_EQ(l.ns, loss_ns(params, contrastive, &part));
  sum += part;
  auto a = tensor_refs(std::as_const(joint).weights), b = tensor_refs(std::as_const(sum).weights);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_LT((*a[i] - *b[i]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST_F(Objectives, AdamHalvesJointLossOnAFixedBatch) {
  const auto masked = masked_batch(78);
  const auto pairs = pair_batch(79);
  const auto contrastive = contrastive_batch(80);
  params = EncoderParams::initialize([&] {
    auto c = fixture::small_encoder(w.corpus.vocab.size());
    c.init_std = 0.02;
    return c;
  }());
  Adam adam({1e-2, 0.0});
  const double initial = joint_loss(params, masked, pairs, contrastive, nullptr).total;
  for (std::size_t step = 1; step <= 200; ++step) {
    Gradients g(params.config);
    joint_loss(params, masked, pairs, contrastive, &g);
    adam.step(params, g, step, 200);
  }
  const double final_loss = joint_loss(params, masked, pairs, contrastive, nullptr).total;
  EXPECT_LE(final_loss, 0.5 * initial) << initial << " -> " << final_loss;
}

TEST_F(Objectives, ExamplesSerialize) {
  const auto pairs = pair_batch(77);
  ASSERT_FALSE(pairs.empty());
  auto j = to_json(pairs[0]);
  EXPECT_EQ(j["label"], pairs[0].label);
  EXPECT_EQ(j["ids"].size(), pairs[0].ids.size());
}

}  // namespace
}  // namespace sgpt
