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


// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sgpt/sgpt.hpp"

using namespace sgpt;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// 1. Finite-difference gradient checks of every pretraining loss.
Outcome gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto w = fixture::world();
  auto params = EncoderParams::initialize(fixture::small_encoder(w.corpus.vocab.size()));
  Rng rng(101);
  std::vector<MaskedSequence> seqs;
  for (std::size_t i = 0; i < w.data.sentences.size(); ++i)
    seqs.push_back(make_masked_sequence(w.data.sentences[i], w.data.spans[i], 0.2, rng));
  const auto masked = pack_masked_sequences(seqs, 24);
  std::vector<PairSequence> pairs;
  for (const auto& ps : w.data.pairs)
    for (auto& p : make_pair_sequences(w.graph, ps, {}, w.data.freq, w.data.vocab, 2, rng)) pairs.push_back(p);
  pairs.resize(std::min<std::size_t>(pairs.size(), 4));
  std::vector<ContrastiveSet> sets;
  for (NodeId a : w.data.anchors)
    if (auto c = make_contrastive_set(w.graph, a, {}, w.data.freq, w.data.vocab, 3, rng)) sets.push_back(*c);
  sets.resize(std::min<std::size_t>(sets.size(), 3));

  std::size_t masked_positions = 0;
  for (const auto& m : masked) masked_positions += m.masked_count();
  if (masked_positions == 0 || pairs.empty() || sets.empty()) return {false, "fixture produced an empty batch"};

  double worst = 0.0;
  std::string where;
  auto check = [&](const char* name, const std::function<double(Gradients*)>& loss) {
    Gradients g(params.config);
    loss(&g);
    const auto r = oracle::check_gradients(tensor_refs(params.weights), tensor_refs(std::as_const(g).weights),
                                           [&] { return loss(nullptr); });
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      where = std::string(name) + " " + r.worst;
    }
  };
  check("L_sw", [&](Gradients* g) { return loss_sw(params, masked, g); });
  check("L_ap", [&](Gradients* g) { return loss_ap(params, pairs, g); });
  check("L_ns", [&](Gradients* g) { return loss_ns(params, sets, g); });
  check("L", [&](Gradients* g) { return joint_loss(params, masked, pairs, sets, g).total; });
  const double secs = seconds_since(t0);
  return {worst < 1e-3 && secs < 120.0,
          "max rel err " + fmt("%.2e", worst) + " in " + fmt("%.1f", secs) + "s (worst: " + where + ")"};
}

// 2. Closed forms of the contrastive loss.
Outcome contrastive_closed_forms() {
  const double equal = contrastive_loss_from_scores({0.42, 0.42});
  const double opposite = contrastive_loss_from_scores({1.0, -1.0});
  const double e1 = std::abs(equal - std::log(2.0));
  const double e2 = std::abs(opposite - std::log1p(std::exp(-2.0)));
  return {e1 <= 1e-9 && e2 <= 1e-9, "|equal - ln2| " + fmt("%.1e", e1) + ", |opposite - ln(1+e^-2)| " + fmt("%.1e", e2)};
}

// 3. Masking budget and the empty-mask loss.
Outcome masking_contract() {
  const auto w = fixture::world();
  const auto params = EncoderParams::initialize(fixture::small_encoder(w.corpus.vocab.size()));
  MaskedSequence none;
  none.input_ids = none.original_ids = w.data.sentences[0].ids();
  none.mask.assign(none.input_ids.size(), 0);
  Gradients g(params.config);
  const double zero = loss_sw(params, std::vector<MaskedSequence>{none}, &g);
  if (zero != 0.0 || g.max_abs() != 0.0) return {false, "unmasked sequence gave L_sw " + fmt("%.3g", zero)};

  Rng rng(303);
  std::size_t generated = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    const std::size_t len = 1 + rng.below(60);
    std::string text;
    for (std::size_t i = 0; i < len; ++i) text += "w" + std::to_string(rng.below(7)) + " ";
    const auto s = tokenize(text, Vocab{});
    std::vector<TermSpan> spans;
    for (std::size_t p = 0; p < len; ++p)
      if (rng.below(2) == 0) spans.push_back({0, p, p, rng.below(4) ? TermKind::kSentiment : TermKind::kAspect, "w"});
    const auto m = make_masked_sequence(s, spans, 0.2, rng);
    const auto cap = static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(len) + 1e-9));
    if (m.masked_count() > cap) return {false, "length " + std::to_string(len) + " masked " + std::to_string(m.masked_count())};
    ++generated;
  }
  for (std::size_t i = 0; i < w.data.sentences.size(); ++i) {
    const auto m = make_masked_sequence(w.data.sentences[i], w.data.spans[i], 0.2, rng);
    if (m.masked_count() > w.data.sentences[i].size() / 5) return {false, "fixture sentence over budget"};
    ++generated;
  }
  return {true, "L_sw = 0 exactly with no masks; " + std::to_string(generated) + " sequences within floor(0.2 len)"};
}

// 4. Similar-node sampling against brute-force reachability, and the
// layered reading on the path a-b-c.
Outcome sampling_contract() {
  Rng rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    std::vector<GraphNode> nodes;
    FrequencyTable freq;
    for (std::size_t i = 0; i < n; ++i) {
      nodes.push_back({"n" + std::to_string(i), rng.below(2) ? TermKind::kAspect : TermKind::kSentiment});
      freq.counts[nodes.back().word] = 1 + rng.below(5);
    }
    std::vector<GraphEdge> edges;
    const double density = rng.uniform(0.05, 0.4);
    for (NodeId u = 0; u < n; ++u)
      for (NodeId v = u + 1; v < n; ++v)
        if (rng.uniform() < density)
          edges.push_back({u, v, nodes[u].kind == nodes[v].kind ? EdgeKind::kSimilarity : EdgeKind::kPair});
    const SemanticGraph g(nodes, edges);
    const NodeId h = rng.below(n);
    const std::size_t depth = 1 + rng.below(4), length = 1 + rng.below(10);
    const auto within = oracle::reachable(g, h, depth);
    std::vector<NodeId> expected(within.begin(), within.end());
    std::sort(expected.begin(), expected.end(), [&](NodeId a, NodeId b) {
      return std::make_pair(freq.count(g.node(a).word), a) < std::make_pair(freq.count(g.node(b).word), b);
    });
    if (expected.size() > length) expected.resize(length);
    if (sample_similar_nodes(g, h, depth, length, freq).members != expected)
      return {false, "graph " + std::to_string(trial) + " differs from brute force"};
  }

  const SemanticGraph path({{"a", TermKind::kAspect}, {"b", TermKind::kAspect}, {"c", TermKind::kAspect}},
                           {{0, 1, EdgeKind::kSimilarity}, {1, 2, EdgeKind::kSimilarity}});
  FrequencyTable f;
  f.counts = {{"a", 3}, {"b", 2}, {"c", 1}};
  auto u = sample_similar_nodes(path, 0, 2, 10, f, SamplingMode::kUnion).members;
  std::sort(u.begin(), u.end());
  const auto layered = sample_similar_nodes(path, 0, 2, 10, f, SamplingMode::kAsWritten).members;
  const bool ok = u == std::vector<NodeId>{0, 1, 2} && layered.empty();
  return {ok, "100 random graphs exact; path a-b-c: union {a,b,c}, layered intersection empty"};
}

// 5. Pair matching against the exhaustive minimum-distance matching.
Outcome matching_contract() {
  Rng rng(505);
  std::size_t ties = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    // Up to 6 single-token spans placed on a random sentence.
    const std::size_t len = 1 + rng.below(14);
    std::string text;
    for (std::size_t i = 0; i < len; ++i) text += "t" + std::to_string(i) + " ";
    const auto s = tokenize(text, Vocab{});
    std::vector<std::size_t> slots(len);
    for (std::size_t i = 0; i < len; ++i) slots[i] = i;
    rng.shuffle(slots);
    const std::size_t k = std::min<std::size_t>(len, rng.below(7));
    std::vector<std::size_t> chosen(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(chosen.begin(), chosen.end());
    std::vector<TermSpan> spans, aspects, sentiments;
    for (auto p : chosen) {
      const auto kind = rng.below(2) ? TermKind::kAspect : TermKind::kSentiment;
      spans.push_back({0, p, p, kind, s.tokens[p].normalized});
      (kind == TermKind::kAspect ? aspects : sentiments).push_back(spans.back());
    }
    const auto truth = oracle::best_matchings(aspects, sentiments);
    const auto pairs = match_pairs(spans);
    std::size_t gap = 0;
    std::vector<std::pair<std::size_t, std::size_t>> found;
    for (const auto& pr : pairs) {
      gap += pr.distance;
      std::size_t ai = 0, si = 0;
      while (aspects[ai].first != pr.aspect.first) ++ai;
      while (sentiments[si].first != pr.sentiment.first) ++si;
      found.emplace_back(ai, si);
    }
    std::sort(found.begin(), found.end());
    if (pairs.size() != truth.cardinality || gap != truth.total_gap || !truth.optima.count(found))
      return {false, "sentence " + std::to_string(trial) + " '" + text + "' not optimal"};
    if (truth.optima.size() > 1) ++ties;
  }
  return {true, "1000 sentences optimal (" + std::to_string(ties) + " with tied optima, each resolved to one of them)"};
}

// 6. CRF against enumeration, plus its gradient.
Outcome crf_contract() {
  Rng rng(606);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(4), l = 1 + rng.below(3);
    auto crf = CrfLayer::zeros(2, l);
    for (auto* m : crf.tensors())
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = 2.0 * rng.normal();
    Matrix e(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(l));
    for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = 2.0 * rng.normal();
    const auto truth = oracle::crf_enumerate(crf, e);
    const auto v = crf_viterbi(crf, e);
    worst = std::max({worst, std::abs(crf_log_partition(crf, e) - truth.log_partition), std::abs(v.score - truth.best_score)});
    if (v.path != truth.best_path) return {false, "Viterbi path differs on trial " + std::to_string(trial)};
  }
  double grad_worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(4), l = 1 + rng.below(3);
    auto crf = CrfLayer::zeros(2, l);
    for (auto* m : crf.tensors())
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.normal();
    Matrix e(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(l));
    for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = rng.normal();
    std::vector<std::size_t> tags(n);
    for (auto& t : tags) t = rng.below(l);
    auto grads = CrfLayer::zeros(2, l);
    Matrix de;
    crf_nll(crf, e, tags, &grads, &de);
    const auto r = oracle::check_gradients({&crf.transitions, &crf.start, &crf.end, &e},
                                           {&grads.transitions, &grads.start, &grads.end, &de},
                                           [&] { return crf_nll(crf, e, tags, nullptr, nullptr); });
    grad_worst = std::max(grad_worst, r.max_rel_error);
  }
  return {worst <= 1e-8 && grad_worst < 1e-3,
          "max |logZ/Viterbi error| " + fmt("%.1e", worst) + ", NLL grad rel err " + fmt("%.1e", grad_worst)};
}

// 7. DBSCAN against the brute-force reference.
Outcome dbscan_contract() {
  Rng rng(707);
  std::size_t clustered = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const double eps = rng.uniform(0.05, 0.5);
    const std::size_t min_pts = 2 + rng.below(4);
    std::vector<std::vector<double>> pts;
    for (bool retry = true; retry;) {
      pts.assign(30, std::vector<double>(4));
      std::vector<std::vector<double>> centers(1 + rng.below(4), std::vector<double>(4));
      for (auto& c : centers)
        for (auto& x : c) x = rng.normal();
      for (auto& p : pts) {
        const auto& c = centers[rng.below(centers.size())];
        const double spread = rng.uniform(0.05, 0.7);
        for (std::size_t j = 0; j < 4; ++j) p[j] = c[j] + spread * rng.normal();
      }
      retry = false;
      for (std::size_t i = 0; i < 30 && !retry; ++i)
        for (std::size_t j = i + 1; j < 30; ++j)
          if (std::abs(oracle::cosine_distance(pts[i], pts[j]) - eps) < 1e-9) retry = true;
    }
    std::vector<std::size_t> keys(30);
    for (std::size_t i = 0; i < 30; ++i) keys[i] = i;
    const auto labels = dbscan(pts, keys, eps, min_pts);
    if (oracle::partition_of(labels) != oracle::dbscan(pts, eps, min_pts))
      return {false, "instance " + std::to_string(trial) + " differs"};
    for (auto l : labels) clustered += l != kNoise;
  }
  return {true, "50 instances of 30 points identical (" + std::to_string(clustered) + " clustered points)"};
}

// Shared setup of the synthetic benchmark experiment.
struct BenchmarkWorld {
  Benchmark bench;
  Corpus corpus;
  Lexicon lexicon;
  MinedArtifacts mined;
  PretrainData pretrain;
  TaskData task;
  ExperimentEnv env;
};

constexpr std::size_t kFinetuneEpochs = 20;

void setup_benchmark(BenchmarkWorld& w, const BenchmarkOptions& bo) {
  w.bench = make_benchmark(bo);
  w.corpus = ingest_text(w.bench.corpus_text);
  w.lexicon = Lexicon::from_tsv(w.bench.lexicon_tsv);
  w.mined = mine(w.corpus, w.lexicon, MiningOptions{});
  w.pretrain = build_pretrain_data(w.corpus, w.lexicon, w.mined.graph);
  w.task = make_task_data(TaskKind::kSentence, w.bench.sentence_rows, w.corpus.vocab, 64);
  auto& env = w.env;
  env.pretrain_data = &w.pretrain;
  env.task_data = &w.task;
  env.splits = split_indices(w.task.examples.size(), 1);
  env.encoder.vocab_size = w.corpus.vocab.size();
  env.encoder.d_model = 32;
  env.encoder.n_heads = 4;
  env.encoder.n_layers = 2;
  env.encoder.max_len = 64;
  env.pretrain.steps = 300;
  env.pretrain.batch_size = 32;
  env.pretrain.pack_len = 32;
  env.pretrain.adam.learning_rate = 1e-3;
  env.finetune.adam.learning_rate = 3e-4;
  env.finetune.epochs = kFinetuneEpochs;
}

// 8. Pretraining helps on the imbalanced synthetic benchmark.
Outcome benchmark_contract() {
  const auto t0 = std::chrono::steady_clock::now();
  BenchmarkWorld w;
  BenchmarkOptions bo;  // 10:1 imbalance, 2858 sentences
  setup_benchmark(w, bo);
  ExperimentSpec spec;
  spec.variants = {Variant::kNone, Variant::kSwAp, Variant::kSwNs, Variant::kFull};
  spec.fractions = {0.1, 1.0};
  spec.seeds = {1, 2, 3, 4, 5};
  const auto agg = aggregate(run_experiment(w.env, spec));
  auto m = [&](const char* v, double f) { return mean_metric(agg, v, f); };
  const double gain = m("full", 0.1) - m("none", 0.1);
  const double best_ablation = std::max(m("sw+ap", 1.0), m("sw+ns", 1.0));
  const double secs = seconds_since(t0);
  std::string detail = "train " + std::to_string(w.env.splits.train.size()) + "; 10%: full " + fmt("%.4f", m("full", 0.1)) +
                       " none " + fmt("%.4f", m("none", 0.1)) + "; 100%: full " + fmt("%.4f", m("full", 1.0)) +
                       " sw+ap " + fmt("%.4f", m("sw+ap", 1.0)) + " sw+ns " + fmt("%.4f", m("sw+ns", 1.0)) + "; " +
                       fmt("%.0f", secs) + "s";
  const bool ok = w.env.splits.train.size() >= 2000 && gain >= 0.05 && m("full", 1.0) >= best_ablation && secs < 1800.0;
  return {ok, detail};
}

// 9. Bitwise determinism under a fixed seed.
Outcome determinism_contract() {
  BenchmarkOptions bo;
  bo.pretrain_reviews = 300;
  bo.task_sentences = 200;
  auto run = [&] {
    BenchmarkWorld w;
    setup_benchmark(w, bo);
    w.env.pretrain.steps = 8;
    w.env.finetune.epochs = 2;
    std::string blob = w.mined.embeddings.to_binary() + w.mined.graph.to_json().dump() +
                       clusters_to_json(w.mined.clusters).dump();
    PretrainOptions po = w.env.pretrain;
    po.seed = 5;
    auto state = Pretrainer::initial_state(w.env.encoder, po);
    Pretrainer p(w.pretrain, po);
    p.run(state, [&](const LossLogRow& r) { blob += r.csv(); });
    blob += save_training_state(state);
    const auto ft = finetune(state.params, w.task, w.env.splits, w.env.finetune);
    blob += save_encoder(ft.model.encoder) + ft.test.to_json().dump();
    ExperimentSpec spec;
    spec.variants = {Variant::kNone, Variant::kFull};
    spec.fractions = {0.5, 1.0};
    spec.seeds = {3};
    blob += to_csv(run_experiment(w.env, spec));
    return blob;
  };
  const auto a = run(), b = run();
  return {a == b, "mining, pretraining, fine-tuning and experiment outputs: " + std::to_string(a.size()) +
                      " bytes, " + (a == b ? "identical" : "different")};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, gradient_fidelity}, {2, contrastive_closed_forms}, {3, masking_contract},
      {4, sampling_contract}, {5, matching_contract},        {6, crf_contract},
      {7, dbscan_contract},   {8, benchmark_contract},       {9, determinism_contract},
  };
  int failures = 0;
  for (const auto& [id, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
