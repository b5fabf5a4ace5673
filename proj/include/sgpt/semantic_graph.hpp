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

// Heterogeneous aspect/sentiment graph and similar-node sampling.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "sgpt/common.hpp"
#include "sgpt/corpus.hpp"
#include "sgpt/similarity.hpp"
#include "sgpt/term_extraction.hpp"

namespace sgpt {

using NodeId = std::size_t;

enum class EdgeKind : std::uint8_t { kSimilarity = 0, kPair = 1 };

inline std::string_view to_string(EdgeKind k) { return k == EdgeKind::kSimilarity ? "similarity" : "pair"; }

inline EdgeKind parse_edge_kind(std::string_view s) {
  if (s == "similarity") return EdgeKind::kSimilarity;
  if (s == "pair") return EdgeKind::kPair;
  throw InvalidArgument("unknown edge kind '" + std::string(s) + "'");
}

struct GraphNode {
  std::string word;
  TermKind kind = TermKind::kAspect;
  bool operator==(const GraphNode&) const = default;
};

/// Undirected edge stored with u < v.
struct GraphEdge {
  NodeId u = 0;
  NodeId v = 0;
  EdgeKind kind = EdgeKind::kSimilarity;
  auto operator<=>(const GraphEdge&) const = default;
};

/// Lowercase, then strip one common English suffix when at least three
/// characters remain. Two same-kind words with equal stems are "literally
/// similar".
inline std::string literal_stem(std::string_view word) {
  std::string w = to_lower_ascii(word);
  static const std::vector<std::string> suffixes = {"ness", "ing", "est", "ed", "er", "ly", "es", "s"};
  for (const auto& suf : suffixes) {
    if (w.size() >= suf.size() + 3 && w.compare(w.size() - suf.size(), suf.size(), suf) == 0) {
      return w.substr(0, w.size() - suf.size());
    }
  }
  return w;
}

class SemanticGraph {
 public:
  SemanticGraph() = default;

  /// Validates edge-kind discipline and canonical form, then indexes.
  SemanticGraph(std::vector<GraphNode> nodes, std::vector<GraphEdge> edges)
      : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    similar_.assign(nodes_.size(), {});
    paired_.assign(nodes_.size(), {});
    for (NodeId i = 0; i < nodes_.size(); ++i) {
      auto [it, inserted] = index_.emplace(std::make_pair(nodes_[i].word, nodes_[i].kind), i);
      if (!inserted) throw InvalidArgument("duplicate graph node '" + nodes_[i].word + "'");
    }
    for (const auto& e : edges_) {
      if (e.u >= e.v) throw InvalidArgument("graph edges must satisfy u < v (no self-loops)");
      if (e.v >= nodes_.size()) throw InvalidArgument("graph edge references a missing node");
      const bool same_kind = nodes_[e.u].kind == nodes_[e.v].kind;
      if (e.kind == EdgeKind::kSimilarity && !same_kind) {
        throw InvalidArgument("similarity edge between different kinds: " + nodes_[e.u].word + " / " +
                              nodes_[e.v].word);
      }
      if (e.kind == EdgeKind::kPair && same_kind) {
        throw InvalidArgument("pair edge between same-kind nodes: " + nodes_[e.u].word + " / " + nodes_[e.v].word);
      }
      auto& adj = e.kind == EdgeKind::kSimilarity ? similar_ : paired_;
      adj[e.u].push_back(e.v);
      adj[e.v].push_back(e.u);
    }
    for (auto& a : similar_) std::sort(a.begin(), a.end());
    for (auto& a : paired_) std::sort(a.begin(), a.end());
  }

  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<GraphNode>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const GraphNode& node(NodeId id) const { return nodes_.at(id); }

  std::optional<NodeId> find(const std::string& word, TermKind kind) const {
    auto it = index_.find({word, kind});
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<NodeId>& similar(NodeId id) const { return similar_.at(id); }
  const std::vector<NodeId>& paired(NodeId id) const { return paired_.at(id); }

  bool has_pair_edge(NodeId a, NodeId b) const {
    const auto& adj = paired_.at(a);
    return std::binary_search(adj.begin(), adj.end(), b);
  }
  bool has_similarity_edge(NodeId a, NodeId b) const {
    const auto& adj = similar_.at(a);
    return std::binary_search(adj.begin(), adj.end(), b);
  }

  std::size_t count_nodes(TermKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [kind](const auto& n) { return n.kind == kind; }));
  }
  std::size_t count_edges(EdgeKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(edges_.begin(), edges_.end(), [kind](const auto& e) { return e.kind == kind; }));
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["nodes"] = nlohmann::ordered_json::array();
    for (NodeId i = 0; i < nodes_.size(); ++i) {
      nlohmann::ordered_json n;
      n["id"] = i;
      n["word"] = nodes_[i].word;
      n["kind"] = std::string(to_string(nodes_[i].kind));
      j["nodes"].push_back(std::move(n));
    }
    j["edges"] = nlohmann::ordered_json::array();
    for (const auto& e : edges_) {
      nlohmann::ordered_json ej;
      ej["u"] = e.u;
      ej["v"] = e.v;
      ej["kind"] = std::string(to_string(e.kind));
      j["edges"].push_back(std::move(ej));
    }
    return j;
  }

  static SemanticGraph from_json(const nlohmann::json& j) {
    std::vector<GraphNode> nodes;
    for (const auto& n : j.at("nodes")) {
      if (n.at("id").get<std::size_t>() != nodes.size()) throw ParseError("graph node ids must be dense", 0);
      nodes.push_back({n.at("word").get<std::string>(), parse_term_kind(n.at("kind").get<std::string>())});
    }
    std::vector<GraphEdge> edges;
    for (const auto& e : j.at("edges")) {
      edges.push_back(
          {e.at("u").get<NodeId>(), e.at("v").get<NodeId>(), parse_edge_kind(e.at("kind").get<std::string>())});
    }
    return SemanticGraph(std::move(nodes), std::move(edges));
  }

  bool operator==(const SemanticGraph& o) const { return nodes_ == o.nodes_ && edges_ == o.edges_; }

 private:
  std::vector<GraphNode> nodes_;
  std::vector<GraphEdge> edges_;
  std::vector<std::vector<NodeId>> similar_;
  std::vector<std::vector<NodeId>> paired_;
  std::map<std::pair<std::string, TermKind>, NodeId> index_;
};

struct GraphBuildOptions {
  std::size_t min_pair_count = 1;
  bool literal_edges = true;
};

/// Nodes are every clustered term plus both ends of every retained pair,
/// numbered by (kind, word). Similarity edges join all members of a cluster
/// and same-kind nodes with equal literal stems; pair edges join aspect and
/// sentiment words seen paired at least `min_pair_count` times.
inline SemanticGraph build_graph(const std::vector<SynonymCluster>& clusters,
                                 const std::vector<AspectSentimentPair>& pairs,
                                 const GraphBuildOptions& opt = {}) {
  std::map<std::pair<std::string, std::string>, std::size_t> pair_counts;
  for (const auto& p : pairs) ++pair_counts[{p.aspect.text, p.sentiment.text}];

  std::set<std::pair<TermKind, std::string>> keys;
  for (const auto& c : clusters)
    for (const auto& m : c.members) keys.insert({c.kind, m});
  for (const auto& [ps, count] : pair_counts) {
    if (count < opt.min_pair_count) continue;
    keys.insert({TermKind::kAspect, ps.first});
    keys.insert({TermKind::kSentiment, ps.second});
  }

  std::vector<GraphNode> nodes;
  std::map<std::pair<TermKind, std::string>, NodeId> id_of;
  for (const auto& k : keys) {
    id_of[k] = nodes.size();
    nodes.push_back({k.second, k.first});
  }
  auto edge = [](NodeId a, NodeId b, EdgeKind kind) { return GraphEdge{std::min(a, b), std::max(a, b), kind}; };

  std::vector<GraphEdge> edges;
  for (const auto& c : clusters) {
    for (std::size_t i = 0; i < c.members.size(); ++i)
      for (std::size_t j = i + 1; j < c.members.size(); ++j) {
        const NodeId a = id_of.at({c.kind, c.members[i]}), b = id_of.at({c.kind, c.members[j]});
        if (a != b) edges.push_back(edge(a, b, EdgeKind::kSimilarity));
      }
  }
  if (opt.literal_edges) {
    std::map<std::pair<TermKind, std::string>, std::vector<NodeId>> by_stem;
    for (NodeId i = 0; i < nodes.size(); ++i) by_stem[{nodes[i].kind, literal_stem(nodes[i].word)}].push_back(i);
    for (const auto& [stem, ids] : by_stem)
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = i + 1; j < ids.size(); ++j) edges.push_back(edge(ids[i], ids[j], EdgeKind::kSimilarity));
  }
  for (const auto& [ps, count] : pair_counts) {
    if (count < opt.min_pair_count) continue;
    edges.push_back(
        edge(id_of.at({TermKind::kAspect, ps.first}), id_of.at({TermKind::kSentiment, ps.second}), EdgeKind::kPair));
  }
  return SemanticGraph(std::move(nodes), std::move(edges));
}

/// Corpus frequency of a graph term; multiword terms take their rarest word.
inline std::uint64_t term_frequency(const FrequencyTable& table, const std::string& term) {
  auto words = normalized_words(term);
  if (words.empty()) return 0;
  std::uint64_t f = std::numeric_limits<std::uint64_t>::max();
  for (const auto& w : words) f = std::min(f, table.count(w));
  return f;
}

enum class SamplingMode { kUnion, kAsWritten };

struct SampledNeighborhood {
  NodeId center = 0;
  std::vector<NodeId> members;
};

/// Similar-nodes sampling. Layer S_0 = {h}; layer S_k collects every
/// similarity neighbor of every node in S_{k-1}. Candidates are the union of
/// layers (nodes within K hops, h included) or, in `kAsWritten` mode, their
/// intersection. Candidates are ordered by ascending corpus frequency, ties
/// by node id, and the first L are kept.
inline SampledNeighborhood sample_similar_nodes(const SemanticGraph& graph, NodeId h, std::size_t max_depth,
                                                std::size_t max_length, const FrequencyTable& freq,
                                                SamplingMode mode = SamplingMode::kUnion) {
  if (h >= graph.node_count()) throw InvalidArgument("sample_similar_nodes: node not in graph");
  if (max_depth < 1 || max_length < 1) throw InvalidArgument("sample_similar_nodes: K and L must be >= 1");

  std::vector<std::set<NodeId>> layers(max_depth + 1);
  layers[0].insert(h);
  for (std::size_t k = 1; k <= max_depth; ++k)
    for (NodeId t : layers[k - 1])
      for (NodeId n : graph.similar(t)) layers[k].insert(n);

  std::set<NodeId> candidates;
  if (mode == SamplingMode::kUnion) {
    for (const auto& l : layers) candidates.insert(l.begin(), l.end());
  } else {
    candidates = layers[0];
    for (std::size_t k = 1; k <= max_depth; ++k) {
      std::set<NodeId> next;
      std::set_intersection(candidates.begin(), candidates.end(), layers[k].begin(), layers[k].end(),
                            std::inserter(next, next.end()));
      candidates = std::move(next);
    }
  }

  std::vector<std::pair<std::uint64_t, NodeId>> ranked;
  for (NodeId c : candidates) ranked.emplace_back(term_frequency(freq, graph.node(c).word), c);
  std::sort(ranked.begin(), ranked.end());
  SampledNeighborhood out{h, {}};
  for (std::size_t i = 0; i < ranked.size() && i < max_length; ++i) out.members.push_back(ranked[i].second);
  return out;
}

}  // namespace sgpt
