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


// sgpt: mine | pretrain | finetune | eval | experiment
//
// Settings come from an optional key=value file (--config), then --set
// overrides, then the dedicated flags; later sources win. Every command
// writes run_config.txt next to its outputs.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sgpt/sgpt.hpp"

namespace fs = std::filesystem;
using namespace sgpt;

namespace {

constexpr int kOk = 0, kRuntimeFailure = 1, kUsageError = 2;

struct Flags {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::string> corpus, lexicon, overrides, output_dir, checkpoint, task_data, predictions, task, variant;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::size_t stop_after = static_cast<std::size_t>(-1);
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_file, "key=value settings file");
  cmd->add_option("--set", f.sets, "override one setting, key=value (repeatable)");
  cmd->add_option("--output-dir", f.output_dir, "directory for every output");
  cmd->add_option("--seed", f.seed, "global seed");
}

PipelineConfig resolve(const Flags& f) {
  PipelineConfig cfg;
  if (!f.config_file.empty()) {
    if (!fs::exists(f.config_file)) throw ConfigError("config file not found: " + f.config_file);
    apply_config_text(cfg, read_file(f.config_file));
  }
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(std::string(trim(kv.substr(0, eq))), std::string(trim(kv.substr(eq + 1))));
  }
  auto put = [&](const char* key, const std::optional<std::string>& v) {
    if (v) cfg.set(key, *v);
  };
  put("corpus", f.corpus);
  put("lexicon", f.lexicon);
  put("overrides", f.overrides);
  put("output_dir", f.output_dir);
  put("checkpoint", f.checkpoint);
  put("task_data", f.task_data);
  put("predictions", f.predictions);
  put("task", f.task);
  put("variant", f.variant);
  if (f.seed) cfg.seed = *f.seed;
  if (f.steps) cfg.steps = *f.steps;
  try {
    validate(cfg);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

void require_file(const std::string& key, const std::string& path) {
  if (path.empty()) throw ConfigError("config: '" + key + "' is required");
  if (!fs::is_regular_file(path)) throw ConfigError("config: " + key + " file not found: " + path);
}

std::string output_path(const PipelineConfig& cfg, const std::string& name) {
  return (fs::path(cfg.output_dir) / name).string();
}

void write_snapshot(const PipelineConfig& cfg) { write_file_atomic(output_path(cfg, "run_config.txt"), cfg.snapshot()); }

std::string json_lines(const std::vector<nlohmann::ordered_json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

nlohmann::ordered_json span_json(const TermSpan& s) {
  return {{"first", s.first}, {"last", s.last}, {"kind", std::string(to_string(s.kind))}, {"text", s.text}};
}

// ---------------------------------------------------------------------------

int cmd_mine(const PipelineConfig& cfg) {
  require_file("corpus", cfg.corpus);
  require_file("lexicon", cfg.lexicon);
  if (!cfg.overrides.empty()) require_file("overrides", cfg.overrides);

  // Everything is computed before the first write.
  const auto corpus = ingest(cfg.corpus);
  const auto lexicon = Lexicon::from_tsv(read_file(cfg.lexicon));
  auto opt = mining_options(cfg);
  if (!cfg.overrides.empty()) opt.overrides = read_file(cfg.overrides);
  const auto m = mine(corpus, lexicon, opt);

  std::vector<nlohmann::ordered_json> tagged, pairs;
  std::size_t ref = 0;
  for (const auto& doc : corpus.documents) {
    for (const auto& s : doc.sentences) {
      nlohmann::ordered_json row;
      row["line"] = doc.line;
      row["text"] = s.text;
      row["terms"] = nlohmann::ordered_json::array();
      for (const auto& t : m.spans[ref]) row["terms"].push_back(span_json(t));
      tagged.push_back(std::move(row));
      ++ref;
    }
  }
  for (const auto& p : m.pairs) {
    pairs.push_back({{"sentence", p.aspect.sentence_ref},
                     {"aspect", span_json(p.aspect)},
                     {"sentiment", span_json(p.sentiment)},
                     {"distance", p.distance}});
  }

  fs::create_directories(cfg.output_dir);
  write_file_atomic(output_path(cfg, "tagged.jsonl"), json_lines(tagged));
  write_file_atomic(output_path(cfg, "pairs.jsonl"), json_lines(pairs));
  nlohmann::ordered_json clusters;
  clusters["clusters"] = clusters_to_json(m.clusters);
  clusters["noise"] = m.noise;
  write_file_atomic(output_path(cfg, "clusters.json"), clusters.dump(2) + "\n");
  write_file_atomic(output_path(cfg, "embeddings.bin"), m.embeddings.to_binary());
  write_file_atomic(output_path(cfg, "vocab.tsv"), corpus.vocab.to_tsv());
  write_file_atomic(output_path(cfg, "graph.json"), m.graph.to_json().dump(2) + "\n");
  write_snapshot(cfg);

  std::printf("sentences %zu tokens %zu pairs %zu clusters %zu\n", corpus.sentence_count(), corpus.token_count(),
              m.pairs.size(), m.clusters.size());
  std::printf("nodes aspect=%zu sentiment=%zu\n", m.graph.count_nodes(TermKind::kAspect),
              m.graph.count_nodes(TermKind::kSentiment));
  std::printf("edges similarity=%zu pair=%zu\n", m.graph.count_edges(EdgeKind::kSimilarity),
              m.graph.count_edges(EdgeKind::kPair));
  return kOk;
}

struct PretrainInputs {
  Corpus corpus;
  PretrainData data;
};

PretrainInputs load_pretrain_inputs(const PipelineConfig& cfg) {
  require_file("corpus", cfg.corpus);
  require_file("lexicon", cfg.lexicon);
  const auto graph_path = output_path(cfg, "graph.json");
  if (!fs::is_regular_file(graph_path)) throw ConfigError("no graph at " + graph_path + " (run 'sgpt mine' first)");
  PretrainInputs in;
  in.corpus = ingest(cfg.corpus);
  const auto lexicon = Lexicon::from_tsv(read_file(cfg.lexicon));
  const auto graph = SemanticGraph::from_json(nlohmann::json::parse(read_file(graph_path)));
  in.data = build_pretrain_data(in.corpus, lexicon, graph);
  return in;
}

int cmd_pretrain(const PipelineConfig& cfg, std::size_t stop_after) {
  const auto in = load_pretrain_inputs(cfg);
  const auto enc = encoder_config(cfg, in.corpus.vocab.size());
  const auto opt = pretrain_options(cfg);
  const auto state_path = output_path(cfg, "pretrain_state.bin");
  const auto log_path = output_path(cfg, "loss_log.csv");

  TrainingState state = Pretrainer::initial_state(enc, opt);
  std::string log = std::string(kLossLogHeader) + "\n";
  if (cfg.resume && fs::is_regular_file(state_path)) {
    state = load_training_state(read_file(state_path));
    if (!(state.params.config == enc)) throw ConfigError("resume: saved encoder shape differs from the configuration");
    // Keep the logged rows up to the saved step.
    if (fs::is_regular_file(log_path)) {
      const auto lines = split_lines(read_file(log_path));
      for (std::size_t i = 1; i < lines.size() && i <= state.step; ++i) log += lines[i] + "\n";
    }
    std::printf("resuming at step %zu\n", state.step);
  }

  fs::create_directories(cfg.output_dir);
  write_snapshot(cfg);
  Pretrainer trainer(in.data, opt);
  double first = -1.0, last = -1.0;
  trainer.run(state, [&](const LossLogRow& r) {
    log += r.csv() + "\n";
    if (first < 0) first = r.loss.total;
    last = r.loss.total;
    if (cfg.checkpoint_every > 0 && r.step % cfg.checkpoint_every == 0 && r.step < opt.steps) {
      write_file_atomic(log_path, log);
      write_file_atomic(state_path, save_training_state(state));
    }
  }, stop_after);
  write_file_atomic(log_path, log);
  write_file_atomic(state_path, save_training_state(state));
  if (state.step < opt.steps) {
    std::printf("stopped at step %zu of %zu\n", state.step, opt.steps);
    return kOk;
  }
  write_file_atomic(output_path(cfg, "encoder.bin"), save_encoder(state.params));
  if (first >= 0) std::printf("steps %zu first L %.6f last L %.6f\n", state.step, first, last);
  return kOk;
}

EncoderParams load_or_init_encoder(const PipelineConfig& cfg, std::size_t vocab_size) {
  if (cfg.checkpoint.empty()) return EncoderParams::initialize(encoder_config(cfg, vocab_size));
  require_file("checkpoint", cfg.checkpoint);
  auto params = load_encoder(read_file(cfg.checkpoint));
  if (params.config.vocab_size != vocab_size) throw ConfigError("checkpoint vocabulary does not match the corpus");
  return params;
}

nlohmann::ordered_json prediction_row(const TaskModel& m, const TaskExample& ex) {
  if (m.kind == TaskKind::kExtraction) {
    std::vector<std::string> tags;
    for (auto t : tag_sequence(m.encoder, m.crf, ex.ids)) tags.emplace_back(bio::kNames[t]);
    return {{"tags", tags}};
  }
  const RowVector p = classify(m.encoder, m.cls, ex.ids);
  Eigen::Index arg = 0;
  for (Eigen::Index c = 1; c < p.size(); ++c)
    if (p(c) > p(arg)) arg = c;
  return {{"label", m.labels[static_cast<std::size_t>(arg)]}};
}

int cmd_finetune(const PipelineConfig& cfg) {
  require_file("corpus", cfg.corpus);
  require_file("task_data", cfg.task_data);
  const auto kind = parse_task(cfg.task);
  const auto corpus = ingest(cfg.corpus);
  const auto rows = parse_jsonl(read_file(cfg.task_data));
  const auto data = make_task_data(kind, rows, corpus.vocab, cfg.max_len);
  const auto encoder = load_or_init_encoder(cfg, corpus.vocab.size());
  const auto splits = split_indices(data.examples.size(), cfg.seed);
  const auto res = finetune(encoder, data, splits, finetune_options(cfg));

  nlohmann::ordered_json report;
  report["best_epoch"] = res.best_epoch;
  report["valid_loss"] = res.valid_loss;
  report["valid_macro_f1"] = res.valid_macro_f1;
  report["test"] = res.test.to_json();
  std::vector<nlohmann::ordered_json> gold, pred;
  for (std::size_t i : splits.test) {
    gold.push_back(rows[i]);
    pred.push_back(prediction_row(res.model, data.examples[i]));
  }
  fs::create_directories(cfg.output_dir);
  write_file_atomic(output_path(cfg, "finetune_report.json"), report.dump(2) + "\n");
  write_file_atomic(output_path(cfg, "test_gold.jsonl"), json_lines(gold));
  write_file_atomic(output_path(cfg, "test_predictions.jsonl"), json_lines(pred));
  write_snapshot(cfg);
  std::printf("best epoch %zu test macro_f1 %.4f accuracy %.4f\n", res.best_epoch, res.test.macro_f1, res.test.accuracy);
  return kOk;
}

int cmd_eval(const PipelineConfig& cfg) {
  require_file("task_data", cfg.task_data);
  require_file("predictions", cfg.predictions);
  const auto kind = parse_task(cfg.task);
  const auto gold = parse_jsonl(read_file(cfg.task_data));
  const auto pred = parse_jsonl(read_file(cfg.predictions));
  if (gold.size() != pred.size()) {
    throw ParseError("predictions have " + std::to_string(pred.size()) + " rows, gold has " + std::to_string(gold.size()),
                     std::min(gold.size(), pred.size()) + 1);
  }
  MetricsReport report;
  try {
    if (kind == TaskKind::kExtraction) {
      std::vector<std::vector<std::size_t>> g, p;
      auto tags = [](const nlohmann::json& row) {
        std::vector<std::size_t> out;
        for (const auto& t : row.at("tags")) out.push_back(parse_bio_tag(t.get<std::string>()));
        return out;
      };
      for (std::size_t i = 0; i < gold.size(); ++i) {
        g.push_back(tags(gold[i]));
        p.push_back(tags(pred[i]));
      }
      report = extraction_report(g, p);
    } else {
      std::vector<std::string> g, p;
      auto label = [](const nlohmann::json& row) {
        const auto& l = row.at("label");
        return l.is_string() ? l.get<std::string>() : l.dump();
      };
      for (std::size_t i = 0; i < gold.size(); ++i) {
        g.push_back(label(gold[i]));
        p.push_back(label(pred[i]));
      }
      report = classification_report(g, p, std::string(to_string(kind)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("eval: bad row: ") + e.what(), 0);
  }
  fs::create_directories(cfg.output_dir);
  write_file_atomic(output_path(cfg, "eval_report.json"), report.to_json().dump(2) + "\n");
  write_snapshot(cfg);
  std::printf("macro_f1 %.6f accuracy %.6f\n", report.macro_f1, report.accuracy);
  return kOk;
}

int cmd_experiment(const PipelineConfig& cfg, bool data_scale) {
  ExperimentSpec spec;
  try {
    for (const auto& v : parse_string_list(cfg.variants)) spec.variants.push_back(parse_variant(v));
    spec.task = parse_task(cfg.task);
    spec.fractions = parse_double_list("fractions", cfg.fractions);
    spec.seeds = parse_uint_list("seeds", cfg.seeds);
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  // Without explicit inputs the synthetic benchmark is generated.
  std::string corpus_text, lexicon_text;
  std::vector<nlohmann::json> rows;
  if (cfg.corpus.empty()) {
    BenchmarkOptions bo;
    bo.task_sentences = (cfg.bench_train_sentences * 10 + 6) / 7;
    bo.imbalance = cfg.bench_imbalance;
    bo.seed = cfg.seed;
    auto bench = make_benchmark(bo);
    corpus_text = bench.corpus_text;
    lexicon_text = bench.lexicon_tsv;
    rows = spec.task == TaskKind::kSentence ? bench.sentence_rows
           : spec.task == TaskKind::kAspect ? bench.aspect_rows
                                            : bench.extraction_rows;
  } else {
    require_file("corpus", cfg.corpus);
    require_file("lexicon", cfg.lexicon);
    require_file("task_data", cfg.task_data);
    corpus_text = read_file(cfg.corpus);
    lexicon_text = read_file(cfg.lexicon);
    rows = parse_jsonl(read_file(cfg.task_data));
  }
  const auto corpus = ingest_text(corpus_text);
  const auto lexicon = Lexicon::from_tsv(lexicon_text);
  const auto mined = mine(corpus, lexicon, mining_options(cfg));
  const auto pdata = build_pretrain_data(corpus, lexicon, mined.graph);
  const auto task = make_task_data(spec.task, rows, corpus.vocab, cfg.max_len);

  ExperimentEnv env;
  env.pretrain_data = &pdata;
  env.task_data = &task;
  env.splits = split_indices(task.examples.size(), cfg.seed);
  env.encoder = encoder_config(cfg, corpus.vocab.size());
  env.pretrain = pretrain_options(cfg);
  env.finetune = finetune_options(cfg);
  env.subset_seed = cfg.seed;
  auto log = [](const std::string& line) { std::printf("%s\n", line.c_str()); std::fflush(stdout); };
  const auto results = data_scale ? run_data_scale(env, spec, log) : run_experiment(env, spec, log);

  const auto agg = aggregate(results);
  fs::create_directories(cfg.output_dir);
  write_file_atomic(output_path(cfg, "experiment.csv"), to_csv(results));
  write_file_atomic(output_path(cfg, "curve_macro_f1.dat"), curve_table(agg, "macro_f1"));
  write_file_atomic(output_path(cfg, "curve_accuracy.dat"), curve_table(agg, "accuracy"));
  write_snapshot(cfg);
  for (const auto& a : agg)
    if (a.metric == "macro_f1")
      std::printf("%-8s fraction=%-4s macro_f1 %.4f +- %.4f (n=%zu)\n", a.variant.c_str(),
                  format_fraction(a.fraction).c_str(), a.mean, a.stdev, a.n);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sentiment-aware graph pretraining toolkit"};
  app.require_subcommand(1);
  Flags f;

  auto* mine_cmd = app.add_subcommand("mine", "tag terms, match pairs, cluster synonyms and build the graph");
  add_common(mine_cmd, f);
  mine_cmd->add_option("--corpus", f.corpus, "review text, one review per line");
  mine_cmd->add_option("--lexicon", f.lexicon, "term lexicon TSV (phrase<TAB>aspect|sentiment)");
  mine_cmd->add_option("--overrides", f.overrides, "cluster override directives");

  auto* pre_cmd = app.add_subcommand("pretrain", "continued pretraining on the mined graph");
  add_common(pre_cmd, f);
  pre_cmd->add_option("--corpus", f.corpus);
  pre_cmd->add_option("--lexicon", f.lexicon);
  pre_cmd->add_option("--variant", f.variant, "none, sw_only, sw+ap, sw+ns or full");
  pre_cmd->add_option("--steps", f.steps);
  pre_cmd->add_option("--stop-after", f.stop_after, "simulate an interruption after this many steps");

  auto* ft_cmd = app.add_subcommand("finetune", "fine-tune on a labeled JSONL task file");
  add_common(ft_cmd, f);
  ft_cmd->add_option("--corpus", f.corpus, "corpus that defines the vocabulary");
  ft_cmd->add_option("--checkpoint", f.checkpoint, "encoder checkpoint (fresh encoder if omitted)");
  ft_cmd->add_option("--task-data", f.task_data);
  ft_cmd->add_option("--task", f.task, "sentence, aspect or extraction");

  auto* eval_cmd = app.add_subcommand("eval", "score a predictions file against gold");
  add_common(eval_cmd, f);
  eval_cmd->add_option("--task-data", f.task_data, "gold JSONL");
  eval_cmd->add_option("--predictions", f.predictions, "predicted JSONL, row-aligned with gold");
  eval_cmd->add_option("--task", f.task);

  bool data_scale = false;
  auto* exp_cmd = app.add_subcommand("experiment", "variant x fraction x seed grid");
  add_common(exp_cmd, f);
  exp_cmd->add_option("--corpus", f.corpus, "omit to use the synthetic benchmark");
  exp_cmd->add_option("--lexicon", f.lexicon);
  exp_cmd->add_option("--task-data", f.task_data);
  exp_cmd->add_option("--task", f.task);
  exp_cmd->add_flag("--data-scale", data_scale, "fractions 0.1, 0.2, ..., 1.0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    const auto cfg = resolve(f);
    if (*mine_cmd) return cmd_mine(cfg);
    if (*pre_cmd) return cmd_pretrain(cfg, f.stop_after);
    if (*ft_cmd) return cmd_finetune(cfg);
    if (*eval_cmd) return cmd_eval(cfg);
    if (*exp_cmd) return cmd_experiment(cfg, data_scale);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeFailure;
  }
  return kUsageError;
}
