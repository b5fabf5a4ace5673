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

// Binary checkpoints.
//
//   magic[8] "SGPTCKPT" | u32 version | u32 reserved
//   u64 vocab_size, d_model, n_layers, n_heads, max_len, ffn_dim, seed
//   f64 init_std
//   u64 value_count | f64 values[value_count]    (tensors in visiting order)
//   u64 fnv1a(all preceding bytes)
//
// Training state files ("SGPTSTAT") embed an encoder checkpoint followed by
// the Adam step counter and both moment buffers, checksummed the same way.

#pragma once

#include <cstring>
#include <string>
#include <string_view>

#include "sgpt/encoder.hpp"
#include "sgpt/optimizer.hpp"

namespace sgpt {

namespace detail {

class ByteWriter {
 public:
  template <typename T>
  void put(const T& v) {
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_bytes(std::string_view s) { buf_.append(s); }
  void put_tensors(const std::vector<const Matrix*>& ts) {
    std::uint64_t n = 0;
    for (auto* t : ts) n += static_cast<std::uint64_t>(t->size());
    put(n);
    for (auto* t : ts) buf_.append(reinterpret_cast<const char*>(t->data()), t->size() * sizeof(double));
  }
  std::string finish() {
    const std::uint64_t h = fnv1a(buf_.data(), buf_.size());
    put(h);
    return std::move(buf_);
  }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes, std::string_view what) : bytes_(bytes), what_(what) {
    if (bytes.size() < 8) fail("truncated");
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
    if (stored != fnv1a(bytes.data(), bytes.size() - 8)) fail("checksum mismatch");
    end_ = bytes.size() - 8;
  }
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > end_) fail("truncated");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view get_bytes(std::size_t n) {
    if (pos_ + n > end_) fail("truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void get_tensors(const std::vector<Matrix*>& ts) {
    const auto n = get<std::uint64_t>();
    std::uint64_t expect = 0;
    for (auto* t : ts) expect += static_cast<std::uint64_t>(t->size());
    if (n != expect) fail("tensor size mismatch");
    for (auto* t : ts) {
      const std::size_t bytes = static_cast<std::size_t>(t->size()) * sizeof(double);
      auto s = get_bytes(bytes);
      std::memcpy(t->data(), s.data(), bytes);
    }
  }
  bool at_end() const { return pos_ == end_; }
  [[noreturn]] void fail(const std::string& why) const { throw ParseError(std::string(what_) + ": " + why, 0); }

 private:
  std::string_view bytes_;
  std::string_view what_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

inline void write_encoder_body(ByteWriter& w, const EncoderParams& p) {
  w.put_bytes("SGPTCKPT");
  w.put(std::uint32_t{1});
  w.put(std::uint32_t{0});
  const auto& c = p.config;
  for (std::uint64_t v : {c.vocab_size, c.d_model, c.n_layers, c.n_heads, c.max_len, c.ffn_dim}) w.put(v);
  w.put(static_cast<std::uint64_t>(c.seed));
  w.put(c.init_std);
  w.put_tensors(tensor_refs(p.weights));
}

inline EncoderParams read_encoder_body(ByteReader& r) {
  if (r.get_bytes(8) != "SGPTCKPT") r.fail("bad magic");
  if (r.get<std::uint32_t>() != 1) r.fail("unsupported version");
  r.get<std::uint32_t>();
  EncoderConfig c;
  c.vocab_size = r.get<std::uint64_t>();
  c.d_model = r.get<std::uint64_t>();
  c.n_layers = r.get<std::uint64_t>();
  c.n_heads = r.get<std::uint64_t>();
  c.max_len = r.get<std::uint64_t>();
  c.ffn_dim = r.get<std::uint64_t>();
  c.seed = r.get<std::uint64_t>();
  c.init_std = r.get<double>();
  c.validate();
  EncoderParams p{c, Weights::zeros(c)};
  r.get_tensors(tensor_refs(p.weights));
  return p;
}

}  // namespace detail

inline std::string save_encoder(const EncoderParams& params) {
  detail::ByteWriter w;
  detail::write_encoder_body(w, params);
  return w.finish();
}

inline EncoderParams load_encoder(std::string_view bytes) {
  detail::ByteReader r(bytes, "encoder checkpoint");
  auto p = detail::read_encoder_body(r);
  if (!r.at_end()) r.fail("trailing bytes");
  return p;
}

struct TrainingState {
  EncoderParams params;
  Adam optimizer;
  std::size_t step = 0;  // optimizer steps completed
};

inline std::string save_training_state(const TrainingState& s) {
  detail::ByteWriter w;
  w.put_bytes("SGPTSTAT");
  w.put(static_cast<std::uint64_t>(s.step));
  detail::write_encoder_body(w, s.params);
  const auto& opt = s.optimizer.options();
  for (double v : {opt.learning_rate, opt.warmup_ratio, opt.beta1, opt.beta2, opt.epsilon, opt.weight_decay}) w.put(v);
  w.put(static_cast<std::uint64_t>(s.optimizer.steps_taken()));
  const auto& m = s.optimizer.first_moments();
  const auto& v = s.optimizer.second_moments();
  w.put(static_cast<std::uint64_t>(m.size()));
  if (!m.empty()) {
    std::vector<const Matrix*> refs;
    for (const auto& x : m) refs.push_back(&x);
    for (const auto& x : v) refs.push_back(&x);
    w.put_tensors(refs);
  }
  return w.finish();
}

inline TrainingState load_training_state(std::string_view bytes) {
  detail::ByteReader r(bytes, "training state");
  if (r.get_bytes(8) != "SGPTSTAT") r.fail("bad magic");
  TrainingState s{EncoderParams{}, Adam{}, 0};
  s.step = r.get<std::uint64_t>();
  s.params = detail::read_encoder_body(r);
  AdamOptions opt;
  opt.learning_rate = r.get<double>();
  opt.warmup_ratio = r.get<double>();
  opt.beta1 = r.get<double>();
  opt.beta2 = r.get<double>();
  opt.epsilon = r.get<double>();
  opt.weight_decay = r.get<double>();
  s.optimizer = Adam(opt);
  s.optimizer.step_count() = r.get<std::uint64_t>();
  const auto count = r.get<std::uint64_t>();
  if (count != 0) {
    auto shapes = tensor_refs(s.params.weights);
    if (count != shapes.size()) r.fail("optimizer tensor count mismatch");
    auto& m = s.optimizer.first_moments();
    auto& v = s.optimizer.second_moments();
    for (auto* t : shapes) {
      m.push_back(Matrix::Zero(t->rows(), t->cols()));
      v.push_back(Matrix::Zero(t->rows(), t->cols()));
    }
    std::vector<Matrix*> refs;
    for (auto& x : m) refs.push_back(&x);
    for (auto& x : v) refs.push_back(&x);
    r.get_tensors(refs);
  }
  if (!r.at_end()) r.fail("trailing bytes");
  return s;
}

}  // namespace sgpt
