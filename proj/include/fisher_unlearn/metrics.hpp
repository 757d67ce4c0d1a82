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

// Efficacy, fidelity and efficiency measurements.

#ifndef FISHER_UNLEARN_METRICS_HPP_
#define FISHER_UNLEARN_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fisher_unlearn/error.hpp"
#include "fisher_unlearn/lm/corpus.hpp"
#include "fisher_unlearn/lm/model.hpp"
#include "fisher_unlearn/lm/tokenizer.hpp"
#include "fisher_unlearn/numerics.hpp"

namespace fisher_unlearn::metrics {

using lm::ParamVector;
using lm::Sequence;
using lm::TokenId;

// ---------------------------------------------------------------------------
// Exposure
// ---------------------------------------------------------------------------

/// Fixed-length candidate sequences standing in for the full sequence space.
struct ReferenceSet {
  std::vector<Sequence> sequences;
  std::size_t length = 0;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return sequences.size(); }

  /// `count` windows of `length` tokens at uniformly drawn offsets of
  /// `source` (a held-out split).
  static ReferenceSet sample(std::span<const TokenId> source, std::size_t count,
                             std::size_t length, std::uint64_t seed) {
    if (length == 0 || count == 0) fail(ErrorCode::kInvalidArgument, "empty reference set");
    if (source.size() < length) {
      fail(ErrorCode::kInsufficientData, "reference source shorter than one window");
    }
    ReferenceSet r;
    r.length = length;
    r.seed = seed;
    numerics::Rng rng(seed);
    const std::size_t span = source.size() - length + 1;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t start = rng.uniform_index(span);
      r.sequences.emplace_back(source.begin() + static_cast<std::ptrdiff_t>(start),
                               source.begin() + static_cast<std::ptrdiff_t>(start + length));
    }
    return r;
  }
};

inline double exposure_from_rank(std::size_t rank, std::size_t refset_size) {
  return std::log2(static_cast<double>(refset_size) + 1.0) - std::log2(static_cast<double>(rank));
}

/// Scores candidates against one (params, refset) pair. Reference
/// likelihoods are computed once and kept sorted.
class ExposureScorer {
 public:
  ExposureScorer(const ParamVector& params, const ReferenceSet& refset)
      : params_(params), length_(refset.length) {
    if (refset.size() == 0) fail(ErrorCode::kInvalidArgument, "empty reference set");
    sorted_.reserve(refset.size());
    for (const auto& s : refset.sequences) {
      if (s.size() != length_) fail(ErrorCode::kLengthMismatch, "ragged reference set");
      sorted_.push_back(lm::sequence_log_likelihood(params, s));
    }
    std::sort(sorted_.begin(), sorted_.end());
  }

  std::size_t refset_size() const noexcept { return sorted_.size(); }
  std::span<const double> reference_log_likelihoods() const noexcept { return sorted_; }

  /// 1 + number of references with strictly higher likelihood.
  std::size_t rank_of(double log_likelihood) const {
    const auto above = std::upper_bound(sorted_.begin(), sorted_.end(), log_likelihood);
    return 1 + static_cast<std::size_t>(sorted_.end() - above);
  }

  double exposure_of(double log_likelihood) const {
    return exposure_from_rank(rank_of(log_likelihood), sorted_.size());
  }

  double log_likelihood(std::span<const TokenId> s) const {
    if (s.size() != length_) {
      fail(ErrorCode::kLengthMismatch, "candidate length " + std::to_string(s.size()) +
                                           " differs from reference length " +
                                           std::to_string(length_));
    }
    return lm::sequence_log_likelihood(params_, s);
  }

  double exposure(std::span<const TokenId> s) const { return exposure_of(log_likelihood(s)); }

  /// Median exposure of the reference members themselves, each ranked
  /// against the full set.
  double median_reference_exposure() const {
    std::vector<double> e;
    e.reserve(sorted_.size());
    for (double ll : sorted_) e.push_back(exposure_of(ll));
    return median(e);
  }

  static double median(std::vector<double> v) {
    if (v.empty()) fail(ErrorCode::kInvalidArgument, "median of nothing");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  }

 private:
  const ParamVector& params_;
  std::size_t length_;
  std::vector<double> sorted_;
};

inline double exposure(const ParamVector& params, std::span<const TokenId> s,
                       const ReferenceSet& refset) {
  return ExposureScorer(params, refset).exposure(s);
}

struct ExposureEntry {
  std::size_t id = 0;
  double log_likelihood = 0.0;
  std::size_t rank = 0;
  double exposure = 0.0;
};

struct ExposureReport {
  std::vector<ExposureEntry> entries;
  double mean = 0.0;
  double median = 0.0;
};

template <class S>
ExposureReport exposure_report(const ExposureScorer& scorer, const std::vector<S>& samples) {
  ExposureReport r;
  std::vector<double> values;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ExposureEntry e;
    if constexpr (requires { samples[i].id; }) e.id = samples[i].id; else e.id = i;
    e.log_likelihood = scorer.log_likelihood(lm::tokens_of(samples[i]));
    e.rank = scorer.rank_of(e.log_likelihood);
    e.exposure = exposure_from_rank(e.rank, scorer.refset_size());
    values.push_back(e.exposure);
    r.entries.push_back(e);
  }
  if (!values.empty()) {
    double sum = 0.0;
    for (double v : values) sum += v;
    r.mean = sum / static_cast<double>(values.size());
    r.median = ExposureScorer::median(values);
  }
  return r;
}

template <class S>
double mean_exposure(const ExposureScorer& scorer, const std::vector<S>& samples) {
  if (samples.empty()) fail(ErrorCode::kEmptyForgetSet, "mean exposure over nothing");
  return exposure_report(scorer, samples).mean;
}

/// Mean over d_minus of exposure under theta_prime minus exposure under theta.
template <class S>
double delta_exposure(const ParamVector& theta, const ParamVector& theta_prime,
                      const std::vector<S>& d_minus, const ReferenceSet& refset) {
  if (d_minus.empty()) fail(ErrorCode::kEmptyForgetSet, "delta exposure over an empty set");
  if (!lm::same_layout(theta.layout(), theta_prime.layout())) {
    fail(ErrorCode::kLayoutMismatch, "delta exposure across different layouts");
  }
  const ExposureScorer before(theta, refset);
  const ExposureScorer after(theta_prime, refset);
  return mean_exposure(after, d_minus) - mean_exposure(before, d_minus);
}

// ---------------------------------------------------------------------------
// Accuracy and weight distributions
// ---------------------------------------------------------------------------

/// Accuracy change in percentage points.
inline double delta_accuracy(const ParamVector& theta, const ParamVector& theta_prime,
                             const lm::Batch& test_split) {
  return 100.0 * (lm::next_token_accuracy(theta_prime, test_split) -
                  lm::next_token_accuracy(theta, test_split));
}

/// KL(unlearned || retrained) between histograms of one layer's weights over
/// their joint [min, max] range.
inline double weight_distribution_kl(const ParamVector& theta_prime,
                                     const ParamVector& theta_retrain, std::string_view layer,
                                     std::size_t bins, double smoothing = 1e-9) {
  const auto a = theta_prime.layer(layer);
  const auto b = theta_retrain.layer(layer);
  if (a.size() != b.size()) fail(ErrorCode::kShapeMismatch, "layer sizes differ");
  if (a.empty()) return 0.0;
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  double lo = std::min(*amin, *bmin);
  double hi = std::max(*amax, *bmax);
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const auto ha = numerics::histogram(a, bins, lo, hi);
  const auto hb = numerics::histogram(b, bins, lo, hi);
  return numerics::kl_divergence(ha.counts, hb.counts, smoothing);
}

// ---------------------------------------------------------------------------
// Cycle records and the runtime ledger
// ---------------------------------------------------------------------------

/// Wall-clock seconds per phase of one unlearning cycle.
struct PhaseTimings {
  double gradient_s = 0.0;  // forget-set gradient gathering
  double fisher_s = 0.0;    // inverse-Fisher estimation
  double update_s = 0.0;    // parameter update (and retrain/finetune epochs)
  double eval_s = 0.0;      // accuracy and exposure evaluation

  double unlearn_s() const noexcept { return gradient_s + fisher_s + update_s; }
};

struct CycleReport {
  std::string method;
  std::uint64_t seed = 0;
  std::size_t cycle = 0;           // 1-based
  std::size_t t = 0;               // samples drained this cycle
  std::size_t r = 0;               // retained samples after the drain
  std::size_t forget_batches = 0;
  std::size_t cumulative = 0;      // samples forgotten so far
  double acc_before = 0.0;         // accuracy of the original model, [0, 1]
  double acc_after = 0.0;
  double delta_acc = 0.0;          // percentage points vs the original model
  double delta_exp = 0.0;          // mean over this cycle's forget set
  PhaseTimings timings;
};

struct LinearFit {
  double intercept = 0.0;
  double slope_t = 0.0;
  double slope_r = 0.0;
  bool uses_t = false;
  bool uses_r = false;
  std::size_t n = 0;

  double predict(double t, double r) const { return intercept + slope_t * t + slope_r * r; }
};

/// Ordinary least squares of seconds = a + b_t * t + b_r * r. A predictor
/// that never varies is dropped from the design.
inline LinearFit fit_time(std::span<const CycleReport> rows,
                          const std::function<double(const CycleReport&)>& seconds) {
  LinearFit fit;
  fit.n = rows.size();
  auto varies = [&](auto get) {
    for (const auto& row : rows)
      if (get(row) != get(rows.front())) return true;
    return false;
  };
  if (!rows.empty()) {
    fit.uses_t = varies([](const CycleReport& c) { return c.t; });
    fit.uses_r = varies([](const CycleReport& c) { return c.r; });
  }
  const std::size_t k = 1 + (fit.uses_t ? 1 : 0) + (fit.uses_r ? 1 : 0);
  if (rows.size() < k + 1) {
    fail(ErrorCode::kInsufficientData, "runtime fit needs more observations than predictors");
  }
  numerics::DenseMatrix xtx(k, k);
  std::vector<double> xty(k, 0.0);
  for (const auto& row : rows) {
    std::vector<double> x{1.0};
    if (fit.uses_t) x.push_back(static_cast<double>(row.t));
    if (fit.uses_r) x.push_back(static_cast<double>(row.r));
    const double y = seconds(row);
    for (std::size_t i = 0; i < k; ++i) {
      xty[i] += x[i] * y;
      for (std::size_t j = 0; j < k; ++j) xtx(i, j) += x[i] * x[j];
    }
  }
  const auto beta = numerics::matvec(numerics::dense_inverse(xtx), xty);
  std::size_t i = 0;
  fit.intercept = beta[i++];
  if (fit.uses_t) fit.slope_t = beta[i++];
  if (fit.uses_r) fit.slope_r = beta[i++];
  return fit;
}

struct MethodComplexity {
  LinearFit fit;
  double mean_seconds = 0.0;
  double growth_t = 0.0;  // fitted change across the observed t range / mean time
  double growth_r = 0.0;  // same for r
};

struct ComplexitySummary {
  std::map<std::string, MethodComplexity> methods;
  double fisher_cost_ratio = 0.0;  // measured / (batches * (m + 1) * ascent seconds per batch)
  bool retrain_grows_with_r = false;
  bool ascent_grows_with_t = false;
  bool ascent_flat_in_r = false;
  bool fisher_matches_cost_model = false;
};

inline constexpr double kGrowthThreshold = 0.25;
inline constexpr double kCostModelBand = 3.0;

/// Fits per-method runtime models and checks the expected orderings: retrain
/// cost is linear in r, ascent is linear in t and flat in r, and a Fisher
/// cycle costs about (m + 1) ascent batch-passes per forget batch.
inline ComplexitySummary runtime_ledger(const std::vector<CycleReport>& reports,
                                        std::size_t fisher_m) {
  std::map<std::string, std::vector<CycleReport>> by_method;
  for (const auto& r : reports) by_method[r.method].push_back(r);
  if (by_method.empty()) fail(ErrorCode::kInsufficientData, "no reports");
  ComplexitySummary s;
  auto op_seconds = [](const CycleReport& c) { return c.timings.unlearn_s(); };
  for (const auto& [name, rows] : by_method) {
    MethodComplexity mc;
    mc.fit = fit_time(rows, op_seconds);
    double sum = 0.0;
    double tmin = rows.front().t, tmax = tmin, rmin = rows.front().r, rmax = rmin;
    for (const auto& c : rows) {
      sum += op_seconds(c);
      tmin = std::min<double>(tmin, c.t);
      tmax = std::max<double>(tmax, c.t);
      rmin = std::min<double>(rmin, c.r);
      rmax = std::max<double>(rmax, c.r);
    }
    mc.mean_seconds = sum / static_cast<double>(rows.size());
    if (mc.mean_seconds > 0.0) {
      mc.growth_t = mc.fit.slope_t * (tmax - tmin) / mc.mean_seconds;
      mc.growth_r = mc.fit.slope_r * (rmax - rmin) / mc.mean_seconds;
    }
    s.methods[name] = mc;
  }
  if (auto it = s.methods.find("retrain"); it != s.methods.end()) {
    s.retrain_grows_with_r = it->second.growth_r >= kGrowthThreshold;
  }
  const auto ascent = by_method.find("gradient_ascent");
  if (ascent != by_method.end()) {
    const auto& mc = s.methods.at("gradient_ascent");
    s.ascent_grows_with_t = mc.growth_t >= kGrowthThreshold;
    s.ascent_flat_in_r = std::abs(mc.growth_r) <= kGrowthThreshold;
    double per_batch = 0.0;
    for (const auto& c : ascent->second)
      per_batch += op_seconds(c) / static_cast<double>(std::max<std::size_t>(1, c.forget_batches));
    per_batch /= static_cast<double>(ascent->second.size());
    double ratio_sum = 0.0;
    std::size_t ratio_n = 0;
    for (const char* name : {"fisher_removal", "fisher_forgetting"}) {
      const auto f = by_method.find(name);
      if (f == by_method.end()) continue;
      for (const auto& c : f->second) {
        const double model = static_cast<double>(c.forget_batches) *
                             static_cast<double>(fisher_m + 1) * per_batch;
        if (model > 0.0) {
          ratio_sum += op_seconds(c) / model;
          ++ratio_n;
        }
      }
    }
    if (ratio_n > 0) {
      s.fisher_cost_ratio = ratio_sum / static_cast<double>(ratio_n);
      s.fisher_matches_cost_model = s.fisher_cost_ratio >= 1.0 / kCostModelBand &&
                                    s.fisher_cost_ratio <= kCostModelBand;
    }
  }
  return s;
}

}  // namespace fisher_unlearn::metrics

#endif  // FISHER_UNLEARN_METRICS_HPP_
