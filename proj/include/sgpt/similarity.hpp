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

// Synonym mining: skip-gram word vectors, cosine DBSCAN, the recycling pass
// that re-clusters oversized clusters, and manual override directives.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgpt/common.hpp"
#include "sgpt/corpus.hpp"
#include "sgpt/term_extraction.hpp"

namespace sgpt {

/// Dense row-per-vocab-id embedding matrix.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t rows, std::size_t dim) : rows_(rows), dim_(dim), data_(rows * dim, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  const std::vector<double>& data() const { return data_; }
  bool operator==(const EmbeddingTable&) const = default;

  std::string to_binary() const {
    std::string out = "SGPTEMB1";
    auto put = [&out](const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); };
    const std::uint64_t r = rows_, c = dim_;
    put(&r, 8);
    put(&c, 8);
    put(data_.data(), data_.size() * sizeof(double));
    return out;
  }

  static EmbeddingTable from_binary(std::string_view bytes) {
    if (bytes.size() < 24 || bytes.substr(0, 8) != "SGPTEMB1") throw ParseError("not an embedding file", 0);
    std::uint64_t r, c;
    std::memcpy(&r, bytes.data() + 8, 8);
    std::memcpy(&c, bytes.data() + 16, 8);
    if (bytes.size() != 24 + r * c * sizeof(double)) throw ParseError("embedding file size mismatch", 0);
    EmbeddingTable t(r, c);
    std::memcpy(t.data_.data(), bytes.data() + 24, r * c * sizeof(double));
    return t;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Cosine similarity; 0 when either vector has zero norm.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

struct SkipGramOptions {
  std::size_t dim = 32;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
};

struct SkipGramResult {
  EmbeddingTable embeddings;
  std::vector<double> epoch_losses;  // mean per-pair loss of each epoch
};

/// Skip-gram with negative sampling over the corpus sentences. Input vectors
/// are returned; negatives follow the unigram^0.75 distribution.
inline SkipGramResult train_embeddings(const Corpus& corpus, const SkipGramOptions& opt) {
  if (opt.dim < 2) throw InvalidArgument("embedding dimension must be >= 2");
  if (corpus.token_count() == 0) throw InvalidArgument("cannot train embeddings on an empty corpus");
  const std::size_t V = corpus.vocab.size();
  const std::size_t d = opt.dim;
  Rng rng(derive_seed(opt.seed, 0x5347ULL));

  EmbeddingTable in(V, d), out(V, d);
  for (std::size_t i = 0; i < V; ++i)
    for (auto& x : in.row(i)) x = rng.uniform(-0.5, 0.5) / static_cast<double>(d);

  std::vector<double> cdf(V, 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < V; ++i) {
    acc += std::pow(static_cast<double>(corpus.vocab.count(static_cast<TokenId>(i))), 0.75);
    cdf[i] = acc;
  }
  auto sample_negative = [&]() -> std::size_t {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), V - 1);
  };
  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };

  const auto sentences = corpus.sentences();
  const double total_positions = static_cast<double>(corpus.token_count() * opt.epochs);
  double processed = 0.0;
  std::vector<double> grad_in(d);
  SkipGramResult result;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    double loss = 0.0;
    std::size_t pairs = 0;
    for (const Sentence* s : sentences) {
      const auto ids = s->ids();
      for (std::size_t pos = 0; pos < ids.size(); ++pos) {
        const double lr = std::max(opt.learning_rate * (1.0 - processed / total_positions), opt.learning_rate * 1e-4);
        processed += 1.0;
        const std::size_t lo = pos >= opt.window ? pos - opt.window : 0;
        const std::size_t hi = std::min(ids.size() - 1, pos + opt.window);
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          const auto center = static_cast<std::size_t>(ids[pos]);
          const auto context = static_cast<std::size_t>(ids[c]);
          auto v = in.row(center);
          std::fill(grad_in.begin(), grad_in.end(), 0.0);
          for (std::size_t k = 0; k <= opt.negatives; ++k) {
            std::size_t target;
            double label;
            if (k == 0) {
              target = context;
              label = 1.0;
            } else {
              target = sample_negative();
              if (target == context) continue;
              label = 0.0;
            }
            auto u = out.row(target);
            const double score = sigmoid(dot(v, u));
            loss -= label > 0.0 ? std::log(std::max(score, 1e-300)) : std::log(std::max(1.0 - score, 1e-300));
            const double g = (label - score) * lr;
            for (std::size_t j = 0; j < d; ++j) {
              grad_in[j] += g * u[j];
              u[j] += g * v[j];
            }
          }
          for (std::size_t j = 0; j < d; ++j) v[j] += grad_in[j];
          ++pairs;
        }
      }
    }
    result.epoch_losses.push_back(pairs ? loss / static_cast<double>(pairs) : 0.0);
  }
  result.embeddings = std::move(in);
  return result;
}

/// Average of the word vectors of a (possibly multiword) term. Words missing
/// from the vocabulary are skipped; all-unknown terms give a zero vector.
inline std::vector<double> term_vector(const EmbeddingTable& table, const Vocab& vocab, std::string_view term) {
  std::vector<double> v(table.dim(), 0.0);
  std::size_t n = 0;
  for (const auto& w : normalized_words(term)) {
    if (!vocab.contains(w)) continue;
    auto r = table.row(static_cast<std::size_t>(vocab.id(w)));
    for (std::size_t j = 0; j < v.size(); ++j) v[j] += r[j];
    ++n;
  }
  if (n > 1)
    for (auto& x : v) x /= static_cast<double>(n);
  return v;
}

// ---------------------------------------------------------------------------
// DBSCAN

inline constexpr int kNoise = -1;

/// Cosine-distance DBSCAN. A point's neighborhood includes itself; a point is
/// core when its neighborhood holds at least `min_pts` points. Clusters are
/// the connected components of core points; a border point joins the cluster
/// of its nearest core neighbor (ties: smallest key). Labels are renumbered
/// by smallest member key, so any permutation of the input gives the same
/// partition with the same labels.
///
/// `keys` are stable identities of the points (vocab ids, say); they must be
/// distinct.
inline std::vector<int> dbscan(const std::vector<std::vector<double>>& points, const std::vector<std::size_t>& keys,
                               double eps, std::size_t min_pts) {
  if (!(eps > 0.0 && eps <= 2.0)) throw InvalidArgument("dbscan: eps must be in (0, 2]");
  if (min_pts < 2) throw InvalidArgument("dbscan: min_pts must be >= 2");
  if (keys.size() != points.size()) throw InvalidArgument("dbscan: one key per point required");
  const std::size_t n = points.size();

  std::vector<std::vector<double>> unit(points);
  for (auto& p : unit) {
    const double norm = std::sqrt(dot(p, p));
    if (norm > 0.0)
      for (auto& x : p) x /= norm;
  }
  auto distance = [&](std::size_t i, std::size_t j) { return 1.0 - dot(unit[i], unit[j]); };
  auto region = [&](std::size_t i) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j)
      if (j == i || distance(i, j) <= eps) out.push_back(j);
    return out;
  };

  std::vector<std::vector<std::size_t>> neighbors(n);
  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    neighbors[i] = region(i);
    core[i] = neighbors[i].size() >= min_pts;
  }

  std::vector<int> label(n, kNoise);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || label[i] != kNoise) continue;
    std::queue<std::size_t> frontier;
    frontier.push(i);
    label[i] = next;
    while (!frontier.empty()) {
      const std::size_t p = frontier.front();
      frontier.pop();
      for (std::size_t q : neighbors[p]) {
        if (core[q] && label[q] == kNoise) {
          label[q] = next;
          frontier.push(q);
        }
      }
    }
    ++next;
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    std::optional<std::size_t> best;
    for (std::size_t q : neighbors[i]) {
      if (!core[q]) continue;
      if (!best) {
        best = q;
        continue;
      }
      const double dq = distance(i, q), db = distance(i, *best);
      if (dq < db || (dq == db && keys[q] < keys[*best])) best = q;
    }
    if (best) label[i] = label[*best];
  }

  std::vector<std::size_t> min_key(static_cast<std::size_t>(next), std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < n; ++i)
    if (label[i] != kNoise) min_key[label[i]] = std::min(min_key[label[i]], keys[i]);
  std::vector<int> order(static_cast<std::size_t>(next));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return min_key[a] < min_key[b]; });
  std::vector<int> remap(static_cast<std::size_t>(next));
  for (std::size_t r = 0; r < order.size(); ++r) remap[order[r]] = static_cast<int>(r);
  for (auto& l : label)
    if (l != kNoise) l = remap[l];
  return label;
}

struct SynonymCluster {
  std::vector<std::string> members;  // sorted, unique
  TermKind kind = TermKind::kAspect;
  bool oversize = false;  // recycling could not bring it under max_size

  std::size_t size() const { return members.size(); }
  bool operator==(const SynonymCluster&) const = default;
};

struct ClusteringResult {
  std::vector<SynonymCluster> clusters;
  std::vector<std::string> noise;
};

/// Word -> vector lookup used by clustering; terms are looked up by text.
using VectorLookup = std::function<std::vector<double>(const std::string&)>;

inline VectorLookup make_lookup(const EmbeddingTable& table, const Vocab& vocab) {
  return [&table, &vocab](const std::string& term) { return term_vector(table, vocab, term); };
}

/// Runs DBSCAN over `words` (all of one kind) and groups them into clusters.
inline ClusteringResult cluster_terms(const std::vector<std::string>& words, TermKind kind, const VectorLookup& lookup,
                                      double eps, std::size_t min_pts) {
  std::vector<std::string> sorted(words);
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<std::vector<double>> points;
  std::vector<std::size_t> keys;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    points.push_back(lookup(sorted[i]));
    keys.push_back(i);
  }
  ClusteringResult result;
  if (sorted.empty()) return result;
  const auto labels = dbscan(points, keys, eps, min_pts);
  const int n_clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  result.clusters.resize(static_cast<std::size_t>(std::max(n_clusters, 0)));
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (labels[i] == kNoise) {
      result.noise.push_back(sorted[i]);
    } else {
      result.clusters[labels[i]].members.push_back(sorted[i]);
      result.clusters[labels[i]].kind = kind;
    }
  }
  // A core point can lose every border neighbor to a closer cluster; such
  // singletons are not synonym sets.
  std::vector<SynonymCluster> kept;
  for (auto& c : result.clusters) {
    if (c.size() >= 2) {
      kept.push_back(std::move(c));
    } else {
      result.noise.insert(result.noise.end(), c.members.begin(), c.members.end());
    }
  }
  result.clusters = std::move(kept);
  std::sort(result.noise.begin(), result.noise.end());
  return result;
}

/// Mean over clusters of the mean pairwise cosine similarity of members.
inline double mean_intra_similarity(const std::vector<SynonymCluster>& clusters, const VectorLookup& lookup) {
  if (clusters.empty()) return 0.0;
  double total = 0.0;
  for (const auto& c : clusters) {
    std::vector<std::vector<double>> vs;
    for (const auto& m : c.members) vs.push_back(lookup(m));
    double s = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < vs.size(); ++i)
      for (std::size_t j = i + 1; j < vs.size(); ++j) {
        s += cosine(vs[i], vs[j]);
        ++pairs;
      }
    total += pairs ? s / static_cast<double>(pairs) : 1.0;
  }
  return total / static_cast<double>(clusters.size());
}

struct RecycleOptions {
  std::size_t max_size = 30;
  std::vector<double> eps_grid = {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4};
  std::vector<std::size_t> min_pts_grid = {2, 3, 5};
};

namespace detail {

inline void recycle_into(const SynonymCluster& cluster, const VectorLookup& lookup, const RecycleOptions& opt,
                         std::vector<SynonymCluster>& out) {
  if (cluster.size() <= opt.max_size) {
    out.push_back(cluster);
    return;
  }
  std::optional<std::vector<SynonymCluster>> best_valid, best_split;
  double best_valid_score = -std::numeric_limits<double>::infinity();
  double best_split_score = -std::numeric_limits<double>::infinity();
  for (double eps : opt.eps_grid) {
    for (std::size_t min_pts : opt.min_pts_grid) {
      auto sub = cluster_terms(cluster.members, cluster.kind, lookup, eps, min_pts).clusters;
      if (sub.empty()) continue;
      std::size_t largest = 0;
      for (const auto& c : sub) largest = std::max(largest, c.size());
      if (largest >= cluster.size()) continue;  // no progress
      const double score = mean_intra_similarity(sub, lookup);
      if (largest <= opt.max_size) {
        if (score > best_valid_score) {
          best_valid_score = score;
          best_valid = std::move(sub);
        }
      } else if (score > best_split_score) {
        best_split_score = score;
        best_split = std::move(sub);
      }
    }
  }
  if (best_valid) {
    for (auto& c : *best_valid) out.push_back(std::move(c));
  } else if (best_split) {
    for (const auto& c : *best_split) recycle_into(c, lookup, opt, out);
  } else {
    SynonymCluster kept = cluster;
    kept.oversize = true;
    out.push_back(std::move(kept));
  }
}

}  // namespace detail

/// Re-clusters every cluster larger than `max_size` by grid search over
/// (eps, min_pts), preferring the parameterization with the highest mean
/// intra-cluster cosine similarity whose sub-clusters all fit. When no grid
/// point fits, the best shrinking split is taken and its oversized parts are
/// recycled again; a cluster no grid point can shrink is kept, flagged.
/// Points that a sub-clustering marks as noise leave the synonym set.
inline std::vector<SynonymCluster> recycle_clusters(const std::vector<SynonymCluster>& clusters,
                                                    const VectorLookup& lookup, const RecycleOptions& opt) {
  if (opt.eps_grid.empty() || opt.min_pts_grid.empty()) throw InvalidArgument("recycle: empty parameter grid");
  std::vector<SynonymCluster> out;
  for (const auto& c : clusters) detail::recycle_into(c, lookup, opt, out);
  return out;
}

// ---------------------------------------------------------------------------
// Overrides

namespace detail {

inline std::vector<std::string> directive_fields(std::string_view line, std::size_t line_no) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == ' ' || line[i] == '\t') {
      ++i;
      continue;
    }
    if (line[i] == '"') {
      auto close = line.find('"', i + 1);
      if (close == std::string_view::npos) throw ParseError("unterminated quote", line_no);
      out.emplace_back(line.substr(i + 1, close - i - 1));
      i = close + 1;
    } else {
      auto end = line.find_first_of(" \t", i);
      if (end == std::string_view::npos) end = line.size();
      out.emplace_back(line.substr(i, end - i));
      i = end;
    }
  }
  return out;
}

inline std::size_t parse_cluster_ref(const std::string& ref, std::size_t count, std::size_t line_no) {
  constexpr std::string_view prefix = "cluster_";
  if (ref.rfind(prefix, 0) != 0) throw ParseError("expected cluster_<n>, got '" + ref + "'", line_no);
  std::size_t idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stoul(ref.substr(prefix.size()), &used);
    if (used != ref.size() - prefix.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ParseError("bad cluster reference '" + ref + "'", line_no);
  }
  if (idx >= count) throw ParseError("unknown cluster '" + ref + "'", line_no);
  return idx;
}

}  // namespace detail

/// Applies line-oriented edit directives in file order:
///
///     add cluster_3 "word"
///     remove cluster_3 "word"
///     merge cluster_1 cluster_2
///
/// `cluster_<n>` names the n-th input cluster for the whole file; a merged
/// source can no longer be referenced. Blank lines and `#` comments are
/// ignored. Afterwards clusters that dropped below two members are removed.
inline std::vector<SynonymCluster> apply_overrides(const std::vector<SynonymCluster>& clusters, std::string_view text,
                                                   const std::set<std::string>& known_words) {
  std::vector<std::optional<SynonymCluster>> work(clusters.begin(), clusters.end());
  auto live = [&](std::size_t idx, std::size_t line_no, const std::string& ref) -> SynonymCluster& {
    if (!work[idx]) throw ParseError("cluster '" + ref + "' was merged away", line_no);
    return *work[idx];
  };
  std::size_t line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto f = detail::directive_fields(line, line_no);
    if (f.size() != 3) throw ParseError("directive needs exactly two arguments", line_no);
    const auto& op = f[0];
    const std::size_t idx = detail::parse_cluster_ref(f[1], work.size(), line_no);
    auto& target = live(idx, line_no, f[1]);
    if (op == "add" || op == "remove") {
      const std::string word = to_lower_ascii(f[2]);
      if (!known_words.count(word)) throw ParseError("unknown word '" + word + "'", line_no);
      auto it = std::lower_bound(target.members.begin(), target.members.end(), word);
      const bool present = it != target.members.end() && *it == word;
      if (op == "remove") {
        if (!present) throw ParseError("'" + word + "' is not in " + f[1], line_no);
        target.members.erase(it);
      } else if (!present) {
        for (std::size_t j = 0; j < work.size(); ++j) {
          if (j == idx || !work[j] || work[j]->kind != target.kind) continue;
          if (std::binary_search(work[j]->members.begin(), work[j]->members.end(), word)) {
            throw ParseError("'" + word + "' already belongs to cluster_" + std::to_string(j), line_no);
          }
        }
        target.members.insert(it, word);
      }
    } else if (op == "merge") {
      const std::size_t src = detail::parse_cluster_ref(f[2], work.size(), line_no);
      if (src == idx) throw ParseError("cannot merge a cluster with itself", line_no);
      auto& source = live(src, line_no, f[2]);
      if (source.kind != target.kind) throw ParseError("cannot merge clusters of different kinds", line_no);
      std::vector<std::string> merged;
      std::set_union(target.members.begin(), target.members.end(), source.members.begin(), source.members.end(),
                     std::back_inserter(merged));
      target.members = std::move(merged);
      target.oversize = false;
      work[src].reset();
    } else {
      throw ParseError("unknown directive '" + op + "'", line_no);
    }
  }
  std::vector<SynonymCluster> out;
  for (auto& c : work)
    if (c && c->size() >= 2) out.push_back(std::move(*c));
  return out;
}

inline nlohmann::json clusters_to_json(const std::vector<SynonymCluster>& clusters) {
  auto arr = nlohmann::json::array();
  for (const auto& c : clusters) {
    nlohmann::json j{{"kind", std::string(to_string(c.kind))}, {"members", c.members}};
    if (c.oversize) j["oversize"] = true;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline std::vector<SynonymCluster> clusters_from_json(const nlohmann::json& arr) {
  std::vector<SynonymCluster> out;
  for (const auto& j : arr) {
    SynonymCluster c;
    c.kind = parse_term_kind(j.at("kind").get<std::string>());
    c.members = j.at("members").get<std::vector<std::string>>();
    std::sort(c.members.begin(), c.members.end());
    c.oversize = j.value("oversize", false);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace sgpt
