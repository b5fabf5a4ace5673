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

// Synthetic review benchmark and the experiment harness (variant ablation
// and data-scale sweep).

#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgpt/downstream.hpp"
#include "sgpt/pipeline.hpp"
#include "sgpt/pretrain.hpp"

namespace sgpt {

// ---------------------------------------------------------------------------
// Synthetic benchmark
//
// Each aspect category has a handful of synonyms and its own positive and
// negative descriptors; generic positive and negative words apply to every
// category. Within a cluster, word frequencies follow a Zipf law, so small
// training sets see only the head of each list. The unlabeled pretraining
// reviews carry polarity cue phrases; the labeled sentences do not.

struct BenchCategory {
  std::vector<std::string> aspects;
  std::vector<std::string> positive;
  std::vector<std::string> negative;
};

inline const std::vector<BenchCategory>& bench_categories() {
  static const std::vector<BenchCategory> cats = {
      {{"color", "colour", "hue", "shade"}, {"vivid", "bright", "vibrant", "rich"}, {"faded", "dull", "drab", "murky"}},
      {{"material", "fabric", "texture", "cloth"}, {"soft", "sturdy", "durable", "smooth"}, {"flimsy", "rough", "scratchy", "thin"}},
      {{"price", "cost", "pricing", "value"}, {"affordable", "reasonable", "fair", "inexpensive"}, {"overpriced", "expensive", "steep", "exorbitant"}},
      {{"size", "fit", "sizing", "dimensions"}, {"accurate", "comfortable", "roomy", "spacious"}, {"tight", "baggy", "cramped", "loose"}},
      {{"delivery", "shipping", "shipment", "courier"}, {"fast", "quick", "prompt", "speedy"}, {"slow", "late", "delayed", "sluggish"}},
      {{"battery", "charge", "runtime", "stamina"}, {"lasting", "reliable", "dependable", "strong"}, {"weak", "unreliable", "short", "draining"}},
  };
  return cats;
}

inline const std::vector<std::string>& bench_generic_positive() {
  static const std::vector<std::string> w = {"good", "great", "excellent", "nice", "awesome", "superb", "wonderful",
                                             "fantastic", "perfect", "lovely", "amazing", "outstanding", "brilliant",
                                             "terrific", "marvelous", "splendid"};
  return w;
}

inline const std::vector<std::string>& bench_generic_negative() {
  static const std::vector<std::string> w = {"bad", "poor", "terrible", "awful", "horrible", "lousy", "dreadful",
                                             "mediocre", "disappointing", "shoddy", "inferior", "atrocious", "abysmal",
                                             "pathetic", "subpar", "unacceptable"};
  return w;
}

struct BenchmarkOptions {
  std::size_t pretrain_reviews = 3000;
  std::size_t task_sentences = 2858;  // a 7:1:2 split leaves 2000 for training
  double imbalance = 10.0;            // positive : negative in labeled data
  double zipf_exponent = 1.0;
  std::uint64_t seed = 7;
};

struct Benchmark {
  std::string corpus_text;  // one review per line
  std::string lexicon_tsv;
  std::vector<nlohmann::json> sentence_rows;    // {text, label}
  std::vector<nlohmann::json> aspect_rows;      // {text, aspect, label}
  std::vector<nlohmann::json> extraction_rows;  // {tokens[], tags[]}
};

namespace detail {

inline std::size_t zipf_pick(std::size_t n, double s, Rng& rng) {
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) total += 1.0 / std::pow(static_cast<double>(r + 1), s);
  double u = rng.uniform() * total;
  for (std::size_t r = 0; r < n; ++r) {
    u -= 1.0 / std::pow(static_cast<double>(r + 1), s);
    if (u <= 0.0) return r;
  }
  return n - 1;
}

struct Clause {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  std::string aspect;
};

inline Clause make_clause(const BenchCategory& cat, bool positive, double zipf, Rng& rng) {
  const auto& aspect = cat.aspects[zipf_pick(cat.aspects.size(), zipf, rng)];
  const bool specific = rng.uniform() < 0.5;
  const auto& pool = specific ? (positive ? cat.positive : cat.negative)
                              : (positive ? bench_generic_positive() : bench_generic_negative());
  const auto& sentiment = pool[zipf_pick(pool.size(), zipf, rng)];
  Clause c;
  c.aspect = aspect;
  auto push = [&c](const std::string& t, const char* tag) {
    c.tokens.push_back(t);
    c.tags.emplace_back(tag);
  };
  switch (rng.below(3)) {
    case 0:
      push("the", "O");
      push(aspect, "B-ASP");
      push("is", "O");
      push(sentiment, "B-SENT");
      break;
    case 1:
      push(sentiment, "B-SENT");
      push(aspect, "B-ASP");
      break;
    default:
      push("the", "O");
      push(aspect, "B-ASP");
      push("looks", "O");
      push(sentiment, "B-SENT");
      break;
  }
  return c;
}

inline std::string join_tokens(const std::vector<std::string>& t) {
  std::string out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) out += ' ';
    out += t[i];
  }
  return out;
}

}  // namespace detail

inline Benchmark make_benchmark(const BenchmarkOptions& opt) {
  if (opt.imbalance < 1.0) throw InvalidArgument("benchmark: imbalance must be >= 1");
  const auto& cats = bench_categories();
  Benchmark b;

  std::string lex = "# synthetic benchmark lexicon\n";
  for (const auto& c : cats) {
    for (const auto& a : c.aspects) lex += a + "\taspect\n";
    for (const auto& s : c.positive) lex += s + "\tsentiment\n";
    for (const auto& s : c.negative) lex += s + "\tsentiment\n";
  }
  for (const auto& s : bench_generic_positive()) lex += s + "\tsentiment\n";
  for (const auto& s : bench_generic_negative()) lex += s + "\tsentiment\n";
  b.lexicon_tsv = lex;

  static const std::vector<std::string> pos_cues = {"i love it", "highly recommend", "very happy", "will buy again"};
  static const std::vector<std::string> neg_cues = {"very disappointed", "want a refund", "do not buy",
                                                    "sending it back"};
  Rng rng(derive_seed(opt.seed, 0x50524554ULL));
  for (std::size_t r = 0; r < opt.pretrain_reviews; ++r) {
    const bool positive = rng.uniform() < 0.5;
    std::vector<std::string> parts;
    const auto& cues = positive ? pos_cues : neg_cues;
    parts.push_back(cues[rng.below(cues.size())]);
    const std::size_t clauses = 1 + rng.below(2);
    for (std::size_t k = 0; k < clauses; ++k) {
      parts.push_back(detail::join_tokens(detail::make_clause(cats[rng.below(cats.size())], positive, opt.zipf_exponent, rng).tokens));
    }
    if (rng.uniform() < 0.5) std::swap(parts.front(), parts.back());
    std::string line;
    for (std::size_t k = 0; k < parts.size(); ++k) line += (k ? " , " : "") + parts[k];
    b.corpus_text += line + " .\n";
  }

  const double p_pos = opt.imbalance / (opt.imbalance + 1.0);
  Rng trng(derive_seed(opt.seed, 0x5441534bULL));
  for (std::size_t r = 0; r < opt.task_sentences; ++r) {
    // Sentence level: every clause shares the label polarity.
    const bool positive = trng.uniform() < p_pos;
    std::vector<std::string> tokens, tags;
    const std::size_t clauses = 1 + trng.below(2);
    for (std::size_t k = 0; k < clauses; ++k) {
      auto c = detail::make_clause(cats[trng.below(cats.size())], positive, opt.zipf_exponent, trng);
      if (k) {
        tokens.emplace_back(",");
        tags.emplace_back("O");
      }
      tokens.insert(tokens.end(), c.tokens.begin(), c.tokens.end());
      tags.insert(tags.end(), c.tags.begin(), c.tags.end());
    }
    tokens.emplace_back(".");
    tags.emplace_back("O");
    b.sentence_rows.push_back({{"text", detail::join_tokens(tokens)}, {"label", positive ? "pos" : "neg"}});
    b.extraction_rows.push_back({{"tokens", tokens}, {"tags", tags}});

    // Aspect level: two clauses on different categories with independent
    // polarities; the target clause follows the imbalance.
    const std::size_t ci = trng.below(cats.size());
    std::size_t cj = trng.below(cats.size() - 1);
    if (cj >= ci) ++cj;
    const bool target_pos = trng.uniform() < p_pos;
    const bool other_pos = trng.uniform() < 0.5;
    auto target = detail::make_clause(cats[ci], target_pos, opt.zipf_exponent, trng);
    auto other = detail::make_clause(cats[cj], other_pos, opt.zipf_exponent, trng);
    const bool target_first = trng.uniform() < 0.5;
    const auto& first = target_first ? target : other;
    const auto& second = target_first ? other : target;
    const std::string text = detail::join_tokens(first.tokens) + " , " + detail::join_tokens(second.tokens) + " .";
    b.aspect_rows.push_back({{"text", text}, {"aspect", target.aspect}, {"label", target_pos ? "pos" : "neg"}});
  }
  return b;
}

inline std::string to_jsonl(const std::vector<nlohmann::json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentSpec {
  std::vector<Variant> variants;
  TaskKind task = TaskKind::kSentence;
  std::vector<double> fractions{1.0};
  std::vector<std::uint64_t> seeds{1};

  void validate() const {
    if (variants.empty()) throw InvalidArgument("experiment: no variants");
    if (seeds.empty()) throw InvalidArgument("experiment: at least one seed required");
    for (double f : fractions)
      if (!(f > 0.0 && f <= 1.0)) throw InvalidArgument("experiment: fractions must be in (0, 1]");
    if (fractions.empty()) throw InvalidArgument("experiment: no fractions");
  }
};

/// Everything a cell needs besides its (variant, fraction, seed).
struct ExperimentEnv {
  const PretrainData* pretrain_data = nullptr;
  const TaskData* task_data = nullptr;
  Splits splits;
  EncoderConfig encoder;
  PretrainOptions pretrain;  // objectives are set per variant
  FinetuneOptions finetune;
  std::uint64_t subset_seed = 1;  // fixes the nested fraction subsets
};

struct ExperimentRow {
  std::string variant;
  std::string task;
  double fraction = 1.0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

inline constexpr std::string_view kExperimentCsvHeader = "variant,task,fraction,seed,metric,value";

inline std::string format_fraction(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", f);
  return buf;
}

inline std::string to_csv(const std::vector<ExperimentRow>& rows) {
  std::string out = std::string(kExperimentCsvHeader) + "\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out += r.variant + "," + r.task + "," + format_fraction(r.fraction) + "," + std::to_string(r.seed) + "," +
           r.metric + "," + buf + "\n";
  }
  return out;
}

inline std::vector<ExperimentRow> parse_experiment_csv(std::string_view text) {
  auto lines = split_lines(text);
  if (lines.empty() || lines[0] != kExperimentCsvHeader) throw ParseError("experiment CSV: bad header", 1);
  std::vector<ExperimentRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto f = split(lines[i], ',');
    if (f.size() != 6) throw ParseError("experiment CSV: expected 6 fields", i + 1);
    try {
      rows.push_back({f[0], f[1], std::stod(f[2]), std::stoull(f[3]), f[4], std::stod(f[5])});
    } catch (const std::exception&) {
      throw ParseError("experiment CSV: bad number", i + 1);
    }
  }
  return rows;
}

/// Nested training subset: the first ceil(f * n) entries of one fixed
/// permutation, returned in the original split order. Fraction 1 returns
/// the split unchanged.
inline std::vector<std::size_t> fraction_subset(const std::vector<std::size_t>& train, double fraction,
                                                std::uint64_t seed) {
  std::vector<std::size_t> perm(train.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(derive_seed(seed, 0x46524143ULL));
  rng.shuffle(perm);
  const auto k = std::min(train.size(), static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(train.size()) - 1e-9)));
  std::vector<char> keep(train.size(), 0);
  for (std::size_t i = 0; i < k; ++i) keep[perm[i]] = 1;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (keep[i]) out.push_back(train[i]);
  return out;
}

/// Encoder for one (variant, seed): random init for `none`, otherwise that
/// init continued-pretrained with the variant's objectives.
inline EncoderParams pretrained_encoder(const ExperimentEnv& env, Variant v, std::uint64_t seed) {
  EncoderConfig cfg = env.encoder;
  cfg.seed = seed;
  PretrainOptions po = env.pretrain;
  po.objectives = objectives_of(v);
  po.seed = seed;
  auto state = Pretrainer::initial_state(cfg, po);
  if (v == Variant::kNone) return state.params;
  Pretrainer trainer(*env.pretrain_data, po);
  trainer.run(state);
  return state.params;
}

using ExperimentLog = std::function<void(const std::string&)>;

/// Every (variant, seed) is pretrained once and fine-tuned on each fraction.
inline std::vector<ExperimentRow> run_experiment(const ExperimentEnv& env, const ExperimentSpec& spec,
                                                 const ExperimentLog& log = {}) {
  spec.validate();
  std::vector<ExperimentRow> rows;
  const std::string task(to_string(spec.task));
  for (Variant v : spec.variants) {
    for (std::uint64_t seed : spec.seeds) {
      const auto encoder = pretrained_encoder(env, v, seed);
      for (double f : spec.fractions) {
        Splits s = env.splits;
        s.train = fraction_subset(env.splits.train, f, env.subset_seed);
        FinetuneOptions fo = env.finetune;
        fo.seed = seed;
        const auto res = finetune(encoder, *env.task_data, s, fo);
        rows.push_back({std::string(to_string(v)), task, f, seed, "macro_f1", res.test.macro_f1});
        rows.push_back({std::string(to_string(v)), task, f, seed, "accuracy", res.test.accuracy});
        if (log) {
          char buf[160];
          std::snprintf(buf, sizeof buf, "%-8s %-10s fraction=%-4s seed=%llu macro_f1=%.4f", std::string(to_string(v)).c_str(),
                        task.c_str(), format_fraction(f).c_str(), static_cast<unsigned long long>(seed), res.test.macro_f1);
          log(buf);
        }
      }
    }
  }
  return rows;
}

/// Data-scale sweep: the same harness over fractions 0.1, 0.2, ..., 1.0.
inline std::vector<ExperimentRow> run_data_scale(const ExperimentEnv& env, ExperimentSpec spec,
                                                 const ExperimentLog& log = {}) {
  spec.fractions.clear();
  for (int i = 1; i <= 10; ++i) spec.fractions.push_back(i / 10.0);
  return run_experiment(env, spec, log);
}

struct AggregateRow {
  std::string variant, task, metric;
  double fraction = 1.0;
  double mean = 0.0;
  double stdev = 0.0;
  std::size_t n = 0;
};

/// Mean and sample standard deviation across seeds, in first-seen order.
inline std::vector<AggregateRow> aggregate(const std::vector<ExperimentRow>& rows) {
  std::vector<AggregateRow> out;
  std::vector<std::vector<double>> values;
  for (const auto& r : rows) {
    std::size_t k = 0;
    for (; k < out.size(); ++k)
      if (out[k].variant == r.variant && out[k].task == r.task && out[k].metric == r.metric &&
          out[k].fraction == r.fraction)
        break;
    if (k == out.size()) {
      out.push_back({r.variant, r.task, r.metric, r.fraction, 0.0, 0.0, 0});
      values.emplace_back();
    }
    values[k].push_back(r.value);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].mean = mean_of(values[k]);
    out[k].stdev = stdev_of(values[k]);
    out[k].n = values[k].size();
  }
  return out;
}

inline double mean_metric(const std::vector<AggregateRow>& agg, std::string_view variant, double fraction,
                          std::string_view metric = "macro_f1") {
  for (const auto& a : agg)
    if (a.variant == variant && a.metric == metric && std::abs(a.fraction - fraction) < 1e-12) return a.mean;
  throw InvalidArgument("no aggregate for variant '" + std::string(variant) + "'");
}

/// gnuplot-friendly table: one row per fraction, one mean/stdev column pair
/// per variant.
inline std::string curve_table(const std::vector<AggregateRow>& agg, std::string_view metric = "macro_f1") {
  std::vector<std::string> variants;
  std::vector<double> fractions;
  for (const auto& a : agg) {
    if (a.metric != metric) continue;
    if (std::find(variants.begin(), variants.end(), a.variant) == variants.end()) variants.push_back(a.variant);
    if (std::find(fractions.begin(), fractions.end(), a.fraction) == fractions.end()) fractions.push_back(a.fraction);
  }
  std::sort(fractions.begin(), fractions.end());
  std::string out = "# fraction";
  for (const auto& v : variants) out += " " + v + "_mean " + v + "_stdev";
  out += "\n";
  char buf[64];
  for (double f : fractions) {
    out += format_fraction(f);
    for (const auto& v : variants) {
      bool found = false;
      for (const auto& a : agg) {
        if (a.metric == metric && a.variant == v && a.fraction == f) {
          std::snprintf(buf, sizeof buf, " %.6f %.6f", a.mean, a.stdev);
          out += buf;
          found = true;
        }
      }
      if (!found) out += " nan nan";
    }
    out += "\n";
  }
  return out;
}

}  // namespace sgpt
