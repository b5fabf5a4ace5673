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

#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sgpt/semantic_graph.hpp"

namespace sgpt {
namespace {

AspectSentimentPair pair_of(const std::string& aspect, const std::string& sentiment) {
  return {{0, 0, 0, TermKind::kAspect, aspect}, {0, 1, 1, TermKind::kSentiment, sentiment}, 0};
}

struct RandomGraph {
  SemanticGraph graph;
  FrequencyTable freq;
};

RandomGraph random_graph(Rng& rng) {
  const std::size_t n = 2 + rng.below(14);
  std::vector<GraphNode> nodes;
  RandomGraph out;
  for (std::size_t i = 0; i < n; ++i) {
    nodes.push_back({"w" + std::to_string(i), rng.below(2) ? TermKind::kAspect : TermKind::kSentiment});
    out.freq.counts[nodes.back().word] = 1 + rng.below(6);
  }
  std::vector<GraphEdge> edges;
  const double density = rng.uniform(0.05, 0.5);
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v) {
      if (rng.uniform() >= density) continue;
      edges.push_back({u, v, nodes[u].kind == nodes[v].kind ? EdgeKind::kSimilarity : EdgeKind::kPair});
    }
  out.graph = SemanticGraph(std::move(nodes), std::move(edges));
  return out;
}

TEST(BuildGraph, ClustersAndPairs) {
  std::vector<SynonymCluster> clusters = {{{"color", "colour", "hue"}, TermKind::kAspect, false},
                                          {{"great", "nice"}, TermKind::kSentiment, false}};
  std::vector<AspectSentimentPair> pairs = {pair_of("color", "great"), pair_of("color", "great"),
                                            pair_of("price", "low")};
  auto g = build_graph(clusters, pairs, {1, false});
  // Aspects sort first: color, colour, hue, price; then great, low, nice.
  ASSERT_EQ(g.node_count(), 7u);
  EXPECT_EQ(g.node(0).word, "color");
  EXPECT_EQ(g.node(3).word, "price");
  EXPECT_EQ(g.node(4).word, "great");
  EXPECT_EQ(g.count_edges(EdgeKind::kSimilarity), 4u);
  EXPECT_EQ(g.count_edges(EdgeKind::kPair), 2u);
  EXPECT_TRUE(g.has_pair_edge(*g.find("color", TermKind::kAspect), *g.find("great", TermKind::kSentiment)));
  EXPECT_FALSE(g.has_pair_edge(*g.find("hue", TermKind::kAspect), *g.find("great", TermKind::kSentiment)));
}

TEST(BuildGraph, MinPairCountFilters) {
  std::vector<AspectSentimentPair> pairs = {pair_of("color", "great"), pair_of("color", "great"),
                                            pair_of("price", "low")};
  auto g = build_graph({}, pairs, {2, false});
  EXPECT_EQ(g.node_count(), 2u);
  EXPECT_EQ(g.count_edges(EdgeKind::kPair), 1u);
}

TEST(BuildGraph, LiteralEdgesJoinInflections) {
  std::vector<SynonymCluster> clusters = {{{"soft", "smooth"}, TermKind::kSentiment, false}};
  auto g = build_graph(clusters, {pair_of("fabric", "softer"), pair_of("fabric", "softness")}, {1, true});
  const auto soft = *g.find("soft", TermKind::kSentiment);
  EXPECT_TRUE(g.has_similarity_edge(soft, *g.find("softer", TermKind::kSentiment)));
  EXPECT_TRUE(g.has_similarity_edge(soft, *g.find("softness", TermKind::kSentiment)));
  auto without = build_graph(clusters, {pair_of("fabric", "softer")}, {1, false});
  EXPECT_TRUE(without.similar(*without.find("softer", TermKind::kSentiment)).empty());
}

TEST(LiteralStem, StripsOneSuffix) {
  EXPECT_EQ(literal_stem("Softness"), "soft");
  EXPECT_EQ(literal_stem("colors"), "color");
  EXPECT_EQ(literal_stem("is"), "is");
}

TEST(Graph, ConstructorEnforcesEdgeKinds) {
  std::vector<GraphNode> nodes = {{"color", TermKind::kAspect}, {"great", TermKind::kSentiment},
                                  {"hue", TermKind::kAspect}};
  EXPECT_THROW(SemanticGraph(nodes, {{0, 1, EdgeKind::kSimilarity}}), InvalidArgument);
  EXPECT_THROW(SemanticGraph(nodes, {{0, 2, EdgeKind::kPair}}), InvalidArgument);
  EXPECT_THROW(SemanticGraph(nodes, {{1, 1, EdgeKind::kPair}}), InvalidArgument);
  EXPECT_THROW(SemanticGraph(nodes, {{0, 7, EdgeKind::kSimilarity}}), InvalidArgument);
  nodes.push_back({"color", TermKind::kAspect});
  EXPECT_THROW(SemanticGraph(nodes, {}), InvalidArgument);
}

TEST(Graph, SameWordBothKindsAllowed) {
  SemanticGraph g({{"light", TermKind::kAspect}, {"light", TermKind::kSentiment}}, {{0, 1, EdgeKind::kPair}});
  EXPECT_EQ(g.find("light", TermKind::kSentiment), NodeId{1});
}

TEST(Graph, JsonRoundTrip) {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    auto rg = random_graph(rng);
    EXPECT_TRUE(SemanticGraph::from_json(nlohmann::json::parse(rg.graph.to_json().dump())) == rg.graph);
  }
}

TEST(Sampling, FrequencyOrderAndCap) {
  SemanticGraph g({{"a", TermKind::kAspect}, {"b", TermKind::kAspect}, {"c", TermKind::kAspect},
                   {"d", TermKind::kAspect}},
                  {{0, 1, EdgeKind::kSimilarity}, {1, 2, EdgeKind::kSimilarity}, {2, 3, EdgeKind::kSimilarity}});
  FrequencyTable f;
  f.counts = {{"a", 5}, {"b", 3}, {"c", 1}, {"d", 0}};
  // Depth 2 from a reaches a, b, c; the two rarest are c then b.
  EXPECT_EQ(sample_similar_nodes(g, 0, 2, 2, f).members, (std::vector<NodeId>{2, 1}));
  EXPECT_EQ(sample_similar_nodes(g, 0, 3, 10, f).members, (std::vector<NodeId>{3, 2, 1, 0}));
  // Intersection of layers {a}, {b}, {a, c}: empty.
  EXPECT_TRUE(sample_similar_nodes(g, 0, 2, 10, f, SamplingMode::kAsWritten).members.empty());
  EXPECT_THROW(sample_similar_nodes(g, 9, 1, 1, f), InvalidArgument);
  EXPECT_THROW(sample_similar_nodes(g, 0, 0, 1, f), InvalidArgument);
}

TEST(Sampling, IsolatedNodeSamplesItself) {
  SemanticGraph g({{"a", TermKind::kAspect}}, {});
  EXPECT_EQ(sample_similar_nodes(g, 0, 2, 4, FrequencyTable{}).members, (std::vector<NodeId>{0}));
}

TEST(TermFrequency, RarestWordOfPhrase) {
  FrequencyTable f;
  f.counts = {{"battery", 9}, {"life", 4}};
  EXPECT_EQ(term_frequency(f, "battery life"), 4u);
  EXPECT_EQ(term_frequency(f, "battery"), 9u);
  EXPECT_EQ(term_frequency(f, "screen"), 0u);
}

TEST(GraphProperty, BuiltGraphRespectsKinds) {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<SynonymCluster> clusters;
    for (std::size_t c = 0, n = rng.below(4); c < n; ++c) {
      SynonymCluster cl;
      cl.kind = rng.below(2) ? TermKind::kAspect : TermKind::kSentiment;
      std::set<std::string> m;
      for (std::size_t k = 0, sz = 2 + rng.below(4); k < sz; ++k) m.insert("t" + std::to_string(rng.below(12)));
      cl.members.assign(m.begin(), m.end());
      if (cl.members.size() >= 2) clusters.push_back(cl);
    }
    std::vector<AspectSentimentPair> pairs;
    for (std::size_t p = 0, n = rng.below(8); p < n; ++p)
      pairs.push_back(pair_of("t" + std::to_string(rng.below(12)), "t" + std::to_string(rng.below(12))));
    const auto g = build_graph(clusters, pairs, {1 + rng.below(2), rng.below(2) == 1});
    for (const auto& e : g.edges()) {
      ASSERT_LT(e.u, e.v);
      const bool same = g.node(e.u).kind == g.node(e.v).kind;
      ASSERT_EQ(same, e.kind == EdgeKind::kSimilarity);
    }
    for (const auto& c : clusters)
      for (std::size_t i = 0; i < c.members.size(); ++i)
        for (std::size_t j = i + 1; j < c.members.size(); ++j)
          ASSERT_TRUE(g.has_similarity_edge(*g.find(c.members[i], c.kind), *g.find(c.members[j], c.kind)));
  }
}

TEST(SamplingProperty, UnionMatchesBfsAndOrdering) {
  Rng rng(43);
  for (int trial = 0; trial < 300; ++trial) {
    auto rg = random_graph(rng);
    const NodeId h = rng.below(rg.graph.node_count());
    const std::size_t depth = 1 + rng.below(3), length = 1 + rng.below(8);
    const auto within = oracle::reachable(rg.graph, h, depth);
    const auto sample = sample_similar_nodes(rg.graph, h, depth, length, rg.freq);
    ASSERT_EQ(sample.center, h);
    ASSERT_EQ(sample.members.size(), std::min(length, within.size()));
    std::set<NodeId> uniq(sample.members.begin(), sample.members.end());
    ASSERT_EQ(uniq.size(), sample.members.size());
    auto key = [&](NodeId n) { return std::make_pair(rg.freq.count(rg.graph.node(n).word), n); };
    for (std::size_t i = 0; i < sample.members.size(); ++i) {
      ASSERT_TRUE(within.count(sample.members[i]));
      ASSERT_EQ(rg.graph.node(sample.members[i]).kind, rg.graph.node(h).kind);
      if (i) {
        ASSERT_LT(key(sample.members[i - 1]), key(sample.members[i]));
      }
    }
    // Nothing left out ranks ahead of the last kept member.
    if (!sample.members.empty())
      for (NodeId n : within)
        if (!uniq.count(n)) {
          ASSERT_LT(key(sample.members.back()), key(n));
        }
  }
}

TEST(SamplingProperty, AsWrittenIsSubsetOfUnion) {
  Rng rng(44);
  for (int trial = 0; trial < 200; ++trial) {
    auto rg = random_graph(rng);
    const NodeId h = rng.below(rg.graph.node_count());
    const std::size_t depth = 1 + rng.below(3);
    auto all = sample_similar_nodes(rg.graph, h, depth, 100, rg.freq);
    auto strict = sample_similar_nodes(rg.graph, h, depth, 100, rg.freq, SamplingMode::kAsWritten);
    std::set<NodeId> u(all.members.begin(), all.members.end());
    for (NodeId n : strict.members) ASSERT_TRUE(u.count(n));
  }
}

}  // namespace
}  // namespace sgpt
