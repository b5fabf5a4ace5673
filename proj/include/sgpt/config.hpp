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

// Pipeline configuration: a flat set of typed key=value settings.

#pragma once

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sgpt/common.hpp"

namespace sgpt {

/// Thrown for malformed or out-of-range settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct PipelineConfig {
  // Paths.
  std::string corpus, lexicon, overrides, output_dir = "out", checkpoint, task_data, predictions;
  std::string task = "sentence";

  // Mining.
  std::size_t emb_dim = 32, emb_window = 5, emb_negatives = 5, emb_epochs = 5;
  double emb_lr = 0.025;
  double dbscan_eps = 0.3;
  std::size_t dbscan_min_pts = 2;
  std::size_t recycle_max_size = 30;
  std::size_t min_pair_count = 1;
  bool literal_edges = true;

  // Encoder.
  std::size_t d_model = 64, n_layers = 2, n_heads = 4, max_len = 128, ffn_dim = 0;
  double init_std = 0.02;

  // Pretraining.
  std::string variant = "full";
  std::size_t steps = 1000, batch_size = 32;
  double lr = 1e-5, warmup_ratio = 0.1;
  double masking_rate = 0.2;
  std::size_t n_pairs_max = 2, sample_depth = 2, sample_length = 4, negatives = 4, pack_len = 128;
  std::string sampling_mode = "union";
  std::size_t checkpoint_every = 100;
  bool resume = false;

  // Fine-tuning.
  std::size_t ft_epochs = 10, ft_batch_size = 32;
  double ft_lr = 1e-5, ft_warmup_ratio = 0.1;
  bool freeze_encoder = false;

  // Experiments.
  std::string variants = "none,sw+ap,sw+ns,full";
  std::string fractions = "0.1,1.0";
  std::string seeds = "1,2,3,4,5";
  std::size_t bench_train_sentences = 2000;
  double bench_imbalance = 10.0;

  std::uint64_t seed = 1;

  /// Sets one key from its textual value.
  void set(const std::string& key, const std::string& value);
  /// Every key with its current value, one `key=value` per line, sorted.
  std::string snapshot() const;
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* b = v.data();
  const char* e = v.data() + v.size();
  std::from_chars_result r;
  if constexpr (std::is_floating_point_v<T>) {
    r = std::from_chars(b, e, out);
  } else {
    if (!v.empty() && v[0] == '-') throw ConfigError("config: '" + key + "' must be non-negative");
    r = std::from_chars(b, e, out);
  }
  if (r.ec != std::errc() || r.ptr != e) throw ConfigError("config: bad value '" + v + "' for '" + key + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ConfigError("config: bad boolean '" + v + "' for '" + key + "'");
}

inline std::string format_double(double d) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

struct Field {
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename M>
Field make_field(M PipelineConfig::*member) {
  using T = std::remove_cvref_t<decltype(std::declval<PipelineConfig>().*member)>;
  Field f;
  f.set = [member](PipelineConfig& c, const std::string& k, const std::string& v) {
    if constexpr (std::is_same_v<T, std::string>) c.*member = v;
    else if constexpr (std::is_same_v<T, bool>) c.*member = parse_bool(k, v);
    else c.*member = parse_number<T>(k, v);
  };
  f.get = [member](const PipelineConfig& c) -> std::string {
    if constexpr (std::is_same_v<T, std::string>) return c.*member;
    else if constexpr (std::is_same_v<T, bool>) return c.*member ? "1" : "0";
    else if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
    else return std::to_string(c.*member);
  };
  return f;
}

inline const std::map<std::string, Field>& config_fields() {
  using C = PipelineConfig;
  static const std::map<std::string, Field> fields = {
      {"corpus", make_field(&C::corpus)},
      {"lexicon", make_field(&C::lexicon)},
      {"overrides", make_field(&C::overrides)},
      {"output_dir", make_field(&C::output_dir)},
      {"checkpoint", make_field(&C::checkpoint)},
      {"task_data", make_field(&C::task_data)},
      {"predictions", make_field(&C::predictions)},
      {"task", make_field(&C::task)},
      {"emb_dim", make_field(&C::emb_dim)},
      {"emb_window", make_field(&C::emb_window)},
      {"emb_negatives", make_field(&C::emb_negatives)},
      {"emb_epochs", make_field(&C::emb_epochs)},
      {"emb_lr", make_field(&C::emb_lr)},
      {"dbscan_eps", make_field(&C::dbscan_eps)},
      {"dbscan_min_pts", make_field(&C::dbscan_min_pts)},
      {"recycle_max_size", make_field(&C::recycle_max_size)},
      {"min_pair_count", make_field(&C::min_pair_count)},
      {"literal_edges", make_field(&C::literal_edges)},
      {"d_model", make_field(&C::d_model)},
      {"n_layers", make_field(&C::n_layers)},
      {"n_heads", make_field(&C::n_heads)},
      {"max_len", make_field(&C::max_len)},
      {"ffn_dim", make_field(&C::ffn_dim)},
      {"init_std", make_field(&C::init_std)},
      {"variant", make_field(&C::variant)},
      {"steps", make_field(&C::steps)},
      {"batch_size", make_field(&C::batch_size)},
      {"lr", make_field(&C::lr)},
      {"warmup_ratio", make_field(&C::warmup_ratio)},
      {"masking_rate", make_field(&C::masking_rate)},
      {"n_pairs_max", make_field(&C::n_pairs_max)},
      {"sample_depth", make_field(&C::sample_depth)},
      {"sample_length", make_field(&C::sample_length)},
      {"negatives", make_field(&C::negatives)},
      {"pack_len", make_field(&C::pack_len)},
      {"sampling_mode", make_field(&C::sampling_mode)},
      {"checkpoint_every", make_field(&C::checkpoint_every)},
      {"resume", make_field(&C::resume)},
      {"ft_epochs", make_field(&C::ft_epochs)},
      {"ft_batch_size", make_field(&C::ft_batch_size)},
      {"ft_lr", make_field(&C::ft_lr)},
      {"ft_warmup_ratio", make_field(&C::ft_warmup_ratio)},
      {"freeze_encoder", make_field(&C::freeze_encoder)},
      {"variants", make_field(&C::variants)},
      {"fractions", make_field(&C::fractions)},
      {"seeds", make_field(&C::seeds)},
      {"bench_train_sentences", make_field(&C::bench_train_sentences)},
      {"bench_imbalance", make_field(&C::bench_imbalance)},
      {"seed", make_field(&C::seed)},
  };
  return fields;
}

}  // namespace detail

inline void PipelineConfig::set(const std::string& key, const std::string& value) {
  const auto& fields = detail::config_fields();
  auto it = fields.find(key);
  if (it == fields.end()) throw ConfigError("config: unknown key '" + key + "'");
  it->second.set(*this, key, value);
}

inline std::string PipelineConfig::snapshot() const {
  std::string out;
  for (const auto& [k, f] : detail::config_fields()) out += k + "=" + f.get(*this) + "\n";
  return out;
}

/// Applies `key=value` lines in order; `#` starts a comment line.
inline void apply_config_text(PipelineConfig& cfg, std::string_view text) {
  std::size_t line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    try {
      cfg.set(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline std::vector<double> parse_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& part : split(v, ',')) out.push_back(detail::parse_number<double>(key, std::string(trim(part))));
  return out;
}

inline std::vector<std::uint64_t> parse_uint_list(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  for (const auto& part : split(v, ',')) out.push_back(detail::parse_number<std::uint64_t>(key, std::string(trim(part))));
  return out;
}

inline std::vector<std::string> parse_string_list(const std::string& v) {
  std::vector<std::string> out;
  for (const auto& part : split(v, ','))
    if (!trim(part).empty()) out.emplace_back(trim(part));
  return out;
}

}  // namespace sgpt
