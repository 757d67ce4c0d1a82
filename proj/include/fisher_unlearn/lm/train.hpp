/*
 * Copyright 2026 The fisher-unlearn Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FISHER_UNLEARN_LM_TRAIN_HPP_
#define FISHER_UNLEARN_LM_TRAIN_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "fisher_unlearn/error.hpp"
#include "fisher_unlearn/lm/corpus.hpp"
#include "fisher_unlearn/lm/model.hpp"
#include "fisher_unlearn/numerics.hpp"

namespace fisher_unlearn::lm {

struct TrainOptions {
  std::size_t epochs = 5;
  double lr = 0.5;
  std::size_t batch_size = 8;  // samples per minibatch
};

/// Clipped, noised SGD. Accounting of (epsilon, delta) is out of scope; the
/// noise multiplier is the privacy knob.
struct DpConfig {
  double clip_norm = 1.0;
  double noise_multiplier = 0.0;
  std::size_t lot_size = 8;

  void validate() const {
    if (!(clip_norm > 0.0) || !(noise_multiplier >= 0.0) || lot_size == 0) {
      fail(ErrorCode::kBadConfig, "dp config requires C > 0, z >= 0, lot >= 1");
    }
  }
};

namespace detail {
inline void require_finite(const ParamVector& p, const char* where) {
  if (!p.finite()) fail(ErrorCode::kNonFinite, std::string("non-finite parameters after ") + where);
}
}  // namespace detail

/// One plain SGD step on the given minibatch: theta <- theta - lr * grad.
inline void sgd_step(ParamVector& params, const Batch& batch, double lr) {
  const GradSample g = backward(params, batch);
  numerics::axpy(-lr, g.values, params.values());
}

/// Minibatch SGD over whole samples. Each epoch visits the samples in a fresh
/// rng-drawn permutation; the last minibatch of an epoch may be short.
template <class S>
ParamVector sgd_train(const ParamVector& params, const std::vector<S>& samples,
                      const TrainOptions& opts, numerics::Rng& rng) {
  if (samples.empty()) fail(ErrorCode::kEmptyCorpus, "sgd_train on an empty sample set");
  if (!(opts.lr > 0.0) || opts.batch_size == 0) {
    fail(ErrorCode::kBadConfig, "sgd_train requires lr > 0 and batch_size >= 1");
  }
  const ModelDims dims = ModelDims::of(*params.layout());
  ParamVector out = params;
  std::vector<std::size_t> order(samples.size());
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t stop = std::min(order.size(), start + opts.batch_size);
      Batch batch;
      batch.context_len = dims.context;
      for (std::size_t k = start; k < stop; ++k)
        append_examples(batch, tokens_of(samples[order[k]]), dims.pad_id());
      if (batch.empty()) continue;
      sgd_step(out, batch, opts.lr);
      detail::require_finite(out, "sgd step");
    }
  }
  return out;
}

/// One DP-SGD step over a lot of samples. Each sample's mean-loss gradient is
/// clipped to L2 norm C, the clipped gradients are averaged, and N(0,
/// (z*C/|lot|)^2) noise is added per coordinate before the descent step.
template <class S>
ParamVector dp_sgd_step(const ParamVector& params, const std::vector<S>& lot,
                        const DpConfig& dp, double lr, numerics::Rng& rng) {
  if (lot.empty()) fail(ErrorCode::kEmptyCorpus, "dp_sgd_step on an empty lot");
  dp.validate();
  const ModelDims dims = ModelDims::of(*params.layout());
  const double inv_lot = 1.0 / static_cast<double>(lot.size());
  std::vector<double> sum(params.size(), 0.0);
  for (const auto& sample : lot) {
    Batch b;
    b.context_len = dims.context;
    append_examples(b, tokens_of(sample), dims.pad_id());
    if (b.empty()) continue;
    const GradSample g = backward(params, b);
    const double norm = numerics::l2_norm(g.values);
    const double scale = norm > dp.clip_norm ? dp.clip_norm / norm : 1.0;
    numerics::axpy(scale, g.values, sum);
  }
  for (double& s : sum) s *= inv_lot;
  if (dp.noise_multiplier > 0.0) {
    const double stddev = dp.noise_multiplier * dp.clip_norm * inv_lot;
    const auto noise = numerics::gaussian_sample(rng, sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += stddev * noise[i];
  }
  ParamVector out = params;
  numerics::axpy(-lr, sum, out.values());
  detail::require_finite(out, "dp-sgd step");
  return out;
}

/// DP-SGD epochs: lots are consecutive lot_size runs of a per-epoch shuffle
/// (sampling without replacement).
template <class S>
ParamVector dp_sgd_train(const ParamVector& params, const std::vector<S>& samples,
                         const DpConfig& dp, const TrainOptions& opts, numerics::Rng& rng) {
  if (samples.empty()) fail(ErrorCode::kEmptyCorpus, "dp_sgd_train on an empty sample set");
  dp.validate();
  ParamVector out = params;
  std::vector<std::size_t> order(samples.size());
  std::vector<S> lot;
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += dp.lot_size) {
      lot.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + dp.lot_size); ++k)
        lot.push_back(samples[order[k]]);
      out = dp_sgd_step(out, lot, dp, opts.lr, rng);
    }
  }
  return out;
}

}  // namespace fisher_unlearn::lm

#endif  // FISHER_UNLEARN_LM_TRAIN_HPP_
