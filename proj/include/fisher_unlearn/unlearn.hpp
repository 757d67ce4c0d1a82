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

// Unlearning operators and the forget-cache cycle driver.

#ifndef FISHER_UNLEARN_UNLEARN_HPP_
#define FISHER_UNLEARN_UNLEARN_HPP_

#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fisher_unlearn/error.hpp"
#include "fisher_unlearn/fisher.hpp"
#include "fisher_unlearn/lm/corpus.hpp"
#include "fisher_unlearn/lm/model.hpp"
#include "fisher_unlearn/lm/train.hpp"
#include "fisher_unlearn/metrics.hpp"
#include "fisher_unlearn/numerics.hpp"

namespace fisher_unlearn::unlearn {

using fisher::BlockDiagInverseFisher;
using fisher::FisherConfig;
using lm::Batch;
using lm::ParamVector;
using lm::Sample;
using metrics::CycleReport;
using metrics::PhaseTimings;

enum class MethodId { kRetrain, kFinetune, kGradientAscent, kFisherRemoval, kFisherForgetting };

inline constexpr std::array<MethodId, 5> kAllMethods = {
    MethodId::kRetrain, MethodId::kFinetune, MethodId::kGradientAscent,
    MethodId::kFisherRemoval, MethodId::kFisherForgetting};

constexpr std::string_view method_name(MethodId m) {
  switch (m) {
    case MethodId::kRetrain: return "retrain";
    case MethodId::kFinetune: return "finetune";
    case MethodId::kGradientAscent: return "gradient_ascent";
    case MethodId::kFisherRemoval: return "fisher_removal";
    case MethodId::kFisherForgetting: return "fisher_forgetting";
  }
  return "unknown";
}

inline MethodId parse_method(std::string_view name) {
  for (MethodId m : kAllMethods)
    if (method_name(m) == name) return m;
  fail(ErrorCode::kBadConfig, "unknown method: " + std::string(name));
}

struct UnlearnConfig {
  double ascent_lr = 5e-5;
  double gamma = 2.5e-4;
  double mu = 1e-3;
  double sigma = 1e-3;
  FisherConfig fisher;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(ascent_lr >= 0.0) || !(gamma >= 0.0) || !(mu >= 0.0) || !(sigma >= 0.0)) {
      fail(ErrorCode::kBadConfig, "unlearning coefficients must be non-negative");
    }
    fisher.validate();
  }

  /// (mu * sigma^2)^(1/4), the per-coordinate noise scale before curvature.
  double noise_scale() const { return std::pow(mu * sigma * sigma, 0.25); }
};

/// Maps the current parameters to an inverse-curvature estimate.
using CurvatureFn = std::function<BlockDiagInverseFisher(const ParamVector&)>;

/// Curvature that ignores the parameters: blocks of I / lambda.
inline CurvatureFn identity_curvature(const FisherConfig& cfg) {
  return [cfg](const ParamVector& p) { return fisher::init_inverse_fisher(p.layout(), cfg); };
}

/// Empirical-Fisher curvature from a seeded, cycling stream over d_plus.
inline CurvatureFn fisher_curvature(const std::vector<Sample>& d_plus, std::size_t batch_size,
                                    const FisherConfig& cfg, std::uint64_t stream_seed) {
  if (d_plus.empty()) fail(ErrorCode::kEmptyRetainSet, "no retained samples for curvature");
  auto stream = std::make_shared<fisher::BatchStream>(d_plus, batch_size, stream_seed);
  return [stream, cfg](const ParamVector& p) {
    return fisher::estimate_inverse_fisher(p, *stream, cfg);
  };
}

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline void require_forget(const std::vector<Batch>& d_minus) {
  if (d_minus.empty()) fail(ErrorCode::kEmptyForgetSet, "no forget batches");
}

}  // namespace detail

/// Forget samples split into minibatches of `batch_size` samples, arrival order.
inline std::vector<Batch> forget_batches(const std::vector<Sample>& d_minus,
                                         std::size_t batch_size, const lm::ModelDims& dims) {
  if (batch_size == 0) fail(ErrorCode::kBadConfig, "batch_size must be >= 1");
  std::vector<Batch> out;
  for (std::size_t start = 0; start < d_minus.size(); start += batch_size) {
    Batch b;
    b.context_len = dims.context;
    for (std::size_t k = start; k < std::min(d_minus.size(), start + batch_size); ++k)
      lm::append_examples(b, d_minus[k].tokens, dims.pad_id());
    if (!b.empty()) out.push_back(std::move(b));
  }
  return out;
}

/// theta <- theta + l * grad L(B) for each forget batch, gradient taken at
/// the current theta.
inline ParamVector gradient_ascent(const ParamVector& params, const std::vector<Batch>& d_minus,
                                   double l, PhaseTimings* timings = nullptr) {
  detail::require_forget(d_minus);
  ParamVector theta = params;
  PhaseTimings local;
  detail::Stopwatch sw;
  for (const Batch& b : d_minus) {
    const lm::GradSample g = lm::backward(theta, b);
    local.gradient_s += sw.lap();
    numerics::axpy(l, g.values, theta.values());
    lm::detail::require_finite(theta, "gradient ascent");
    local.update_s += sw.lap();
  }
  if (timings) *timings = local;
  return theta;
}

/// Per forget batch: curvature re-estimated at the current theta, then
/// theta <- theta + gamma * H^{-1} grad L(B).
inline ParamVector fisher_removal(const ParamVector& params, const std::vector<Batch>& d_minus,
                                  const CurvatureFn& curvature, double gamma,
                                  PhaseTimings* timings = nullptr) {
  detail::require_forget(d_minus);
  ParamVector theta = params;
  PhaseTimings local;
  detail::Stopwatch sw;
  for (const Batch& b : d_minus) {
    const lm::GradSample g = lm::backward(theta, b);
    local.gradient_s += sw.lap();
    const BlockDiagInverseFisher h_inv = curvature(theta);
    local.fisher_s += sw.lap();
    const std::vector<double> step = fisher::apply_inverse(h_inv, g);
    numerics::axpy(gamma, step, theta.values());
    lm::detail::require_finite(theta, "fisher removal");
    local.update_s += sw.lap();
  }
  if (timings) *timings = local;
  return theta;
}

inline ParamVector fisher_removal(const ParamVector& params, const std::vector<Batch>& d_minus,
                                  const std::vector<Sample>& d_plus, std::size_t batch_size,
                                  const UnlearnConfig& cfg, PhaseTimings* timings = nullptr) {
  detail::require_forget(d_minus);
  cfg.validate();
  return fisher_removal(params, d_minus, fisher_curvature(d_plus, batch_size, cfg.fisher, cfg.seed),
                        cfg.gamma, timings);
}

/// Per forget batch: theta <- theta + (mu sigma^2)^(1/4) diag(H^{-1})^(1/4) * M
/// with M ~ N(0, I). The forget-batch gradient is gathered (and timed) but
/// does not enter the update.
inline ParamVector fisher_forgetting(const ParamVector& params, const std::vector<Batch>& d_minus,
                                     const CurvatureFn& curvature, const UnlearnConfig& cfg,
                                     numerics::Rng& rng, PhaseTimings* timings = nullptr) {
  detail::require_forget(d_minus);
  ParamVector theta = params;
  const double scale = cfg.noise_scale();
  PhaseTimings local;
  detail::Stopwatch sw;
  for (const Batch& b : d_minus) {
    [[maybe_unused]] const lm::GradSample g = lm::backward(theta, b);
    local.gradient_s += sw.lap();
    const BlockDiagInverseFisher h_inv = curvature(theta);
    local.fisher_s += sw.lap();
    const std::vector<double> root = fisher::diag_inverse_quarter_root(h_inv, cfg.fisher.eigen_clamp);
    const std::vector<double> noise = numerics::gaussian_sample(rng, theta.size());
    auto v = theta.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += scale * root[i] * noise[i];
    lm::detail::require_finite(theta, "fisher forgetting");
    local.update_s += sw.lap();
  }
  if (timings) *timings = local;
  return theta;
}

inline ParamVector fisher_forgetting(const ParamVector& params, const std::vector<Batch>& d_minus,
                                     const std::vector<Sample>& d_plus, std::size_t batch_size,
                                     const UnlearnConfig& cfg, numerics::Rng& rng,
                                     PhaseTimings* timings = nullptr) {
  detail::require_forget(d_minus);
  cfg.validate();
  return fisher_forgetting(params, d_minus,
                           fisher_curvature(d_plus, batch_size, cfg.fisher, cfg.seed), cfg, rng,
                           timings);
}

/// Samples of `train` whose ids are not in `forgotten`, order preserved.
inline std::vector<Sample> retain_set(const std::vector<Sample>& train,
                                      const std::set<std::size_t>& forgotten) {
  std::vector<Sample> out;
  out.reserve(train.size());
  for (const auto& s : train)
    if (!forgotten.contains(s.id)) out.push_back(s);
  return out;
}

/// Fresh initialization from `model.seed`, then SGD on `samples`. The base
/// model and every retrained model come from this one routine.
inline ParamVector train_from_scratch(const std::vector<Sample>& samples,
                                      const lm::ModelConfig& model,
                                      const lm::TrainOptions& opts) {
  numerics::Rng rng(model.seed);
  const ParamVector init = lm::init_params(model, rng);
  return lm::sgd_train(init, samples, opts, rng);
}

inline ParamVector retrain(const std::vector<Sample>& d_plus, const lm::ModelConfig& model,
                           const lm::TrainOptions& opts, PhaseTimings* timings = nullptr) {
  if (d_plus.empty()) fail(ErrorCode::kAllDataForgotten, "every training sample was forgotten");
  detail::Stopwatch sw;
  ParamVector out = train_from_scratch(d_plus, model, opts);
  if (timings) *timings = PhaseTimings{0.0, 0.0, sw.lap(), 0.0};
  return out;
}

/// Continue training on d_plus for opts.epochs (one by default).
inline ParamVector finetune(const ParamVector& params, const std::vector<Sample>& d_plus,
                            const lm::TrainOptions& opts, numerics::Rng& rng,
                            PhaseTimings* timings = nullptr) {
  if (d_plus.empty()) fail(ErrorCode::kAllDataForgotten, "every training sample was forgotten");
  detail::Stopwatch sw;
  ParamVector out = (opts.lr == 0.0 || opts.epochs == 0) ? params
                                                          : lm::sgd_train(params, d_plus, opts, rng);
  if (timings) *timings = PhaseTimings{0.0, 0.0, sw.lap(), 0.0};
  return out;
}

// ---------------------------------------------------------------------------
// Forget cache and cycles
// ---------------------------------------------------------------------------

/// FIFO of pending forget requests. Draining hands every queued sample to
/// the operator and leaves the cache empty.
class ForgetCache {
 public:
  explicit ForgetCache(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) fail(ErrorCode::kBadConfig, "cache capacity must be >= 1");
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return queue_.size(); }
  bool empty() const noexcept { return queue_.empty(); }
  bool full() const noexcept { return queue_.size() >= capacity_; }

  bool push(Sample s) {
    if (full()) return false;
    queue_.push_back(std::move(s));
    return true;
  }

  /// Pushes from stream[cursor...] until full or exhausted; advances cursor.
  std::size_t refill(const std::vector<Sample>& stream, std::size_t& cursor) {
    std::size_t added = 0;
    while (!full() && cursor < stream.size()) {
      push(stream[cursor++]);
      ++added;
    }
    return added;
  }

  std::vector<Sample> drain() {
    std::vector<Sample> out(std::make_move_iterator(queue_.begin()),
                            std::make_move_iterator(queue_.end()));
    queue_.clear();
    return out;
  }

 private:
  std::size_t capacity_;
  std::deque<Sample> queue_;
};

struct CycleSettings {
  lm::ModelConfig model;           // model.seed drives retraining
  lm::TrainOptions train;          // batch size and lr shared by all methods
  std::size_t retrain_epochs = 5;
  std::size_t finetune_epochs = 1;
  UnlearnConfig unlearn;           // unlearn.seed drives streams and noise
};

struct CycleInputs {
  const ParamVector& theta0;                // model before any unlearning
  const std::vector<Sample>& train;         // full training set D
  const std::vector<Sample>& forget_stream; // forget requests in arrival order
  const Batch& test;                        // accuracy split
  const metrics::ReferenceSet& refset;
};

/// Observer called after each cycle with its report and the parameters.
using CycleObserver = std::function<void(const CycleReport&, const ParamVector&)>;

/// Applies one method per cycle to the cache contents, shrinking D+ by every
/// drained sample. Accuracy and exposure deltas are relative to theta0.
inline std::vector<CycleReport> run_unlearning_cycles(const CycleInputs& in, ForgetCache& cache,
                                                      MethodId method, std::size_t cycles,
                                                      const CycleSettings& cfg,
                                                      ParamVector* final_params = nullptr,
                                                      const CycleObserver& observer = {}) {
  cfg.unlearn.validate();
  std::vector<CycleReport> reports;
  ParamVector theta = in.theta0;
  if (cycles == 0) {
    if (final_params) *final_params = theta;
    return reports;
  }
  const lm::ModelDims dims = lm::ModelDims::of(*theta.layout());
  const double acc0 = lm::next_token_accuracy(in.theta0, in.test);
  const metrics::ExposureScorer scorer0(in.theta0, in.refset);
  numerics::Rng master(cfg.unlearn.seed);
  std::set<std::size_t> forgotten;
  std::size_t cursor = 0;
  for (std::size_t c = 1; c <= cycles; ++c) {
    // Same draws for every method so that all methods see identical D+ streams.
    const std::uint64_t stream_seed = master.next_u64();
    numerics::Rng noise = master.fork();
    numerics::Rng train_rng = master.fork();

    cache.refill(in.forget_stream, cursor);
    if (cache.empty()) fail(ErrorCode::kEmptyForgetSet, "forget stream exhausted");
    const std::vector<Sample> d_minus = cache.drain();
    for (const auto& s : d_minus) forgotten.insert(s.id);
    const std::vector<Sample> d_plus = retain_set(in.train, forgotten);
    const std::vector<Batch> batches = forget_batches(d_minus, cfg.train.batch_size, dims);

    CycleReport rep;
    rep.method = std::string(method_name(method));
    rep.seed = cfg.unlearn.seed;
    rep.cycle = c;
    rep.t = d_minus.size();
    rep.r = d_plus.size();
    rep.forget_batches = batches.size();
    rep.cumulative = forgotten.size();

    UnlearnConfig ucfg = cfg.unlearn;
    ucfg.seed = stream_seed;
    lm::TrainOptions opts = cfg.train;
    switch (method) {
      case MethodId::kRetrain:
        opts.epochs = cfg.retrain_epochs;
        theta = retrain(d_plus, cfg.model, opts, &rep.timings);
        break;
      case MethodId::kFinetune:
        opts.epochs = cfg.finetune_epochs;
        theta = finetune(theta, d_plus, opts, train_rng, &rep.timings);
        break;
      case MethodId::kGradientAscent:
        theta = gradient_ascent(theta, batches, ucfg.ascent_lr, &rep.timings);
        break;
      case MethodId::kFisherRemoval:
        theta = fisher_removal(theta, batches, d_plus, cfg.train.batch_size, ucfg, &rep.timings);
        break;
      case MethodId::kFisherForgetting:
        theta = fisher_forgetting(theta, batches, d_plus, cfg.train.batch_size, ucfg, noise,
                                  &rep.timings);
        break;
    }

    detail::Stopwatch sw;
    rep.acc_before = acc0;
    rep.acc_after = lm::next_token_accuracy(theta, in.test);
    rep.delta_acc = 100.0 * (rep.acc_after - acc0);
    const metrics::ExposureScorer scorer(theta, in.refset);
    rep.delta_exp = metrics::mean_exposure(scorer, d_minus) - metrics::mean_exposure(scorer0, d_minus);
    rep.timings.eval_s = sw.lap();
    if (observer) observer(rep, theta);
    reports.push_back(rep);
  }
  if (final_params) *final_params = theta;
  return reports;
}

}  // namespace fisher_unlearn::unlearn

#endif  // FISHER_UNLEARN_UNLEARN_HPP_
