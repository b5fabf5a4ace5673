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

#pragma once

#include <cmath>
#include <vector>

#include "sgpt/encoder.hpp"

namespace sgpt {

struct AdamOptions {
  double learning_rate = 1e-5;
  double warmup_ratio = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

/// Linear warmup over warmup_ratio * total_steps, constant afterwards.
/// `step` is 1-based.
inline double scheduled_learning_rate(double lr, double warmup_ratio, std::size_t step, std::size_t total_steps) {
  const double warmup = warmup_ratio * static_cast<double>(total_steps);
  const double s = static_cast<double>(step);
  if (warmup > 0.0 && s < warmup) return lr * s / warmup;
  return lr;
}

/// Adam over an ordered list of tensors. Moment buffers are created on the
/// first step and keyed by position, so callers must pass tensors in a stable
/// order.
class Adam {
 public:
  explicit Adam(AdamOptions opt = {}) : opt_(opt) {}

  const AdamOptions& options() const { return opt_; }
  std::size_t steps_taken() const { return t_; }

  void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads, double lr) {
    if (params.size() != grads.size()) throw InvalidArgument("adam: params/grads count mismatch");
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(Matrix::Zero(p->rows(), p->cols()));
        v_.push_back(Matrix::Zero(p->rows(), p->cols()));
      }
    }
    if (m_.size() != params.size()) throw InvalidArgument("adam: tensor list changed between steps");
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = *params[i];
      const auto& g = *grads[i];
      m_[i] = opt_.beta1 * m_[i] + (1.0 - opt_.beta1) * g;
      v_[i] = opt_.beta2 * v_[i] + (1.0 - opt_.beta2) * g.cwiseProduct(g);
      p.array() -= lr * ((m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + opt_.epsilon));
      if (opt_.weight_decay != 0.0) p *= (1.0 - lr * opt_.weight_decay);
    }
  }

  /// Encoder convenience: one scheduled step over every encoder tensor.
  void step(EncoderParams& params, const Gradients& grads, std::size_t step_number, std::size_t total_steps) {
    const double lr = scheduled_learning_rate(opt_.learning_rate, opt_.warmup_ratio, step_number, total_steps);
    auto p = tensor_refs(params.weights);
    auto g = tensor_refs(grads.weights);
    step(p, g, lr);
  }

  // Flat state access for checkpointing.
  std::size_t& step_count() { return t_; }
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  AdamOptions opt_;
  std::size_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace sgpt
