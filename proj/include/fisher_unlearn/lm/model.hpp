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

// A Bengio-style n-gram MLP language model over a flat parameter vector:
//
//   x      = concat(embed[c_0], ..., embed[c_{n-1}])      (n * E)
//   h      = tanh(hidden.weight * x + hidden.bias)          (H)
//   logits = output.weight * h + output.bias                (V)
//
// The last vocabulary id is reserved for left padding and is never a target.

#ifndef FISHER_UNLEARN_LM_MODEL_HPP_
#define FISHER_UNLEARN_LM_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fisher_unlearn/error.hpp"
#include "fisher_unlearn/lm/tokenizer.hpp"
#include "fisher_unlearn/numerics.hpp"

namespace fisher_unlearn::lm {

// ---------------------------------------------------------------------------
// Layout
// ---------------------------------------------------------------------------

struct LayerEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;

  std::size_t size() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
  }
  bool operator==(const LayerEntry&) const = default;
};

/// Ordered, contiguous, non-overlapping layer table for a flat vector.
class LayerLayout {
 public:
  LayerLayout() = default;
  explicit LayerLayout(std::vector<LayerEntry> entries) : entries_(std::move(entries)) {
    std::size_t expected = 0;
    for (const auto& e : entries_) {
      if (e.offset != expected) {
        fail(ErrorCode::kLayoutMismatch, "layer '" + e.name + "' is not contiguous");
      }
      expected += e.size();
    }
    total_ = expected;
  }

  /// Builds offsets from (name, shape) pairs in order.
  static LayerLayout from_shapes(
      const std::vector<std::pair<std::string, std::vector<std::size_t>>>& shapes) {
    std::vector<LayerEntry> entries;
    std::size_t offset = 0;
    for (const auto& [name, shape] : shapes) {
      entries.push_back({name, shape, offset});
      offset += entries.back().size();
    }
    return LayerLayout(std::move(entries));
  }

  const std::vector<LayerEntry>& entries() const noexcept { return entries_; }
  std::size_t total() const noexcept { return total_; }

  const LayerEntry* find(std::string_view name) const {
    for (const auto& e : entries_)
      if (e.name == name) return &e;
    return nullptr;
  }

  const LayerEntry& at(std::string_view name) const {
    const LayerEntry* e = find(name);
    if (e == nullptr) fail(ErrorCode::kUnknownLayer, std::string(name));
    return *e;
  }

  std::uint64_t hash() const {
    numerics::Fnv1a h;
    for (const auto& e : entries_) {
      h.text(e.name);
      h.value(e.shape.size());
      for (std::size_t d : e.shape) h.value(static_cast<std::uint64_t>(d));
      h.value(static_cast<std::uint64_t>(e.offset));
    }
    return h.digest();
  }

  bool operator==(const LayerLayout& other) const { return entries_ == other.entries_; }

 private:
  std::vector<LayerEntry> entries_;
  std::size_t total_ = 0;
};

using LayoutPtr = std::shared_ptr<const LayerLayout>;

inline bool same_layout(const LayoutPtr& a, const LayoutPtr& b) {
  return a == b || (a && b && *a == *b);
}

// ---------------------------------------------------------------------------
// ParamVector / GradSample
// ---------------------------------------------------------------------------

class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(LayoutPtr layout)
      : layout_(std::move(layout)), values_(layout_->total(), 0.0) {}
  ParamVector(LayoutPtr layout, std::vector<double> values)
      : layout_(std::move(layout)), values_(std::move(values)) {
    if (values_.size() != layout_->total()) {
      fail(ErrorCode::kLayoutMismatch, "parameter count does not match layout");
    }
  }

  const LayoutPtr& layout() const noexcept { return layout_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  std::span<double> layer(std::string_view name) {
    const auto& e = layout_->at(name);
    return {values_.data() + e.offset, e.size()};
  }
  std::span<const double> layer(std::string_view name) const {
    const auto& e = layout_->at(name);
    return {values_.data() + e.offset, e.size()};
  }

  bool finite() const { return numerics::all_finite(values_); }

  bool operator==(const ParamVector& other) const {
    return same_layout(layout_, other.layout_) && values_ == other.values_;
  }

 private:
  LayoutPtr layout_;
  std::vector<double> values_;
};

/// Gradient of a mean loss, aligned with the layout of the parameters it was
/// computed against. batch_size counts scored positions.
struct GradSample {
  LayoutPtr layout;
  std::vector<double> values;
  std::size_t batch_size = 0;
};

// ---------------------------------------------------------------------------
// Model configuration
// ---------------------------------------------------------------------------

struct ModelConfig {
  std::size_t vocab_size = tokenizer::kVocabSize;
  std::size_t context_len = 8;
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 64;
  std::uint64_t seed = 0;

  void validate() const {
    if (vocab_size < 2 || context_len == 0 || embed_dim == 0 || hidden_dim == 0) {
      fail(ErrorCode::kBadConfig, "model dimensions must be >= 1 (vocab >= 2)");
    }
  }

  TokenId pad_id() const { return static_cast<TokenId>(vocab_size - 1); }

  std::size_t parameter_count() const {
    return vocab_size * embed_dim + hidden_dim * context_len * embed_dim + hidden_dim +
           vocab_size * hidden_dim + vocab_size;
  }

  bool operator==(const ModelConfig&) const = default;
};

namespace layer_names {
inline constexpr std::string_view kEmbed = "embed";
inline constexpr std::string_view kHiddenWeight = "hidden.weight";
inline constexpr std::string_view kHiddenBias = "hidden.bias";
inline constexpr std::string_view kOutputWeight = "output.weight";
inline constexpr std::string_view kOutputBias = "output.bias";
}  // namespace layer_names

inline LayoutPtr make_layout(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t V = cfg.vocab_size, C = cfg.context_len, E = cfg.embed_dim,
                    H = cfg.hidden_dim;
  using namespace layer_names;
  return std::make_shared<const LayerLayout>(LayerLayout::from_shapes({
      {std::string(kEmbed), {V, E}},
      {std::string(kHiddenWeight), {H, C * E}},
      {std::string(kHiddenBias), {H}},
      {std::string(kOutputWeight), {V, H}},
      {std::string(kOutputBias), {V}},
  }));
}

/// Embeddings ~ N(0, 1), hidden weights ~ N(0, 1/fan_in) scaled for tanh,
/// output weights ~ N(0, 0.1^2 / H), biases zero.
inline ParamVector init_params(const ModelConfig& cfg, numerics::Rng& rng) {
  ParamVector p(make_layout(cfg));
  using namespace layer_names;
  auto fill = [&](std::string_view name, double stddev) {
    auto dst = p.layer(name);
    const auto draws = numerics::gaussian_sample(rng, dst.size());
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = stddev * draws[i];
  };
  fill(kEmbed, 1.0);
  fill(kHiddenWeight, (5.0 / 3.0) / std::sqrt(static_cast<double>(cfg.context_len * cfg.embed_dim)));
  fill(kOutputWeight, 0.1 / std::sqrt(static_cast<double>(cfg.hidden_dim)));
  return p;
}

inline ParamVector init_params(const ModelConfig& cfg) {
  numerics::Rng rng(cfg.seed);
  return init_params(cfg, rng);
}

/// Shape information recovered from a layout produced by make_layout().
struct ModelDims {
  std::size_t vocab = 0, context = 0, embed = 0, hidden = 0;

  static ModelDims of(const LayerLayout& layout) {
    using namespace layer_names;
    const auto& embed = layout.at(kEmbed);
    const auto& hw = layout.at(kHiddenWeight);
    const auto& ow = layout.at(kOutputWeight);
    ModelDims d;
    d.vocab = embed.shape.at(0);
    d.embed = embed.shape.at(1);
    d.hidden = hw.shape.at(0);
    if (d.embed == 0 || hw.shape.at(1) % d.embed != 0 || ow.shape.at(0) != d.vocab ||
        ow.shape.at(1) != d.hidden || layout.at(kHiddenBias).size() != d.hidden ||
        layout.at(kOutputBias).size() != d.vocab) {
      fail(ErrorCode::kLayoutMismatch, "layout is not an n-gram MLP layout");
    }
    d.context = hw.shape.at(1) / d.embed;
    return d;
  }

  TokenId pad_id() const { return static_cast<TokenId>(vocab - 1); }
};

// ---------------------------------------------------------------------------
// Batches
// ---------------------------------------------------------------------------

/// (context window, target) examples stored flat: contexts holds size() *
/// context_len ids.
struct Batch {
  std::size_t context_len = 0;
  std::vector<TokenId> contexts;
  std::vector<TokenId> targets;

  std::size_t size() const noexcept { return targets.size(); }
  bool empty() const noexcept { return targets.empty(); }

  std::span<const TokenId> context(std::size_t i) const {
    return {contexts.data() + i * context_len, context_len};
  }

  void add(std::span<const TokenId> context, TokenId target) {
    contexts.insert(contexts.end(), context.begin(), context.end());
    targets.push_back(target);
  }

  void append(const Batch& other) {
    contexts.insert(contexts.end(), other.contexts.begin(), other.contexts.end());
    targets.insert(targets.end(), other.targets.begin(), other.targets.end());
  }
};

/// One example per position of `seq`: the target is seq[t] and the context
/// is the preceding context_len tokens, left-padded. Padding targets are
/// skipped.
inline void append_examples(Batch& batch, std::span<const TokenId> seq, TokenId pad) {
  const std::size_t n = batch.context_len;
  std::vector<TokenId> window(n, pad);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq[t] != pad) batch.add(window, seq[t]);
    if (n > 0) {
      std::rotate(window.begin(), window.begin() + 1, window.end());
      window.back() = seq[t];
    }
  }
}

inline const Sequence& tokens_of(const Sequence& s) { return s; }

template <class Range>
Batch make_batch(const Range& sequences, std::size_t context_len, TokenId pad) {
  Batch b;
  b.context_len = context_len;
  for (const auto& s : sequences) append_examples(b, tokens_of(s), pad);
  return b;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

struct LossResult {
  double loss = 0.0;                // mean cross-entropy (nats)
  std::vector<double> log_probs;    // log p(target) per example
};

namespace detail {

struct Views {
  ModelDims dims;
  std::span<const double> embed, w1, b1, w2, b2;

  explicit Views(const ParamVector& p) : dims(ModelDims::of(*p.layout())) {
    using namespace layer_names;
    embed = p.layer(kEmbed);
    w1 = p.layer(kHiddenWeight);
    b1 = p.layer(kHiddenBias);
    w2 = p.layer(kOutputWeight);
    b2 = p.layer(kOutputBias);
  }
};

inline void check_batch(const ModelDims& d, const Batch& batch) {
  if (batch.context_len != d.context ||
      batch.contexts.size() != batch.targets.size() * batch.context_len) {
    fail(ErrorCode::kShapeMismatch, "context window length " +
                                        std::to_string(batch.context_len) +
                                        " != model context " + std::to_string(d.context));
  }
  for (TokenId t : batch.targets)
    if (t >= d.vocab) fail(ErrorCode::kShapeMismatch, "target id out of vocabulary");
  for (TokenId t : batch.contexts)
    if (t >= d.vocab) fail(ErrorCode::kShapeMismatch, "context id out of vocabulary");
}

/// Activations of one example; scratch buffers are reused across calls.
struct Activations {
  std::vector<double> x, h, logits;
  double log_norm = 0.0;  // log-sum-exp of logits

  explicit Activations(const ModelDims& d)
      : x(d.context * d.embed), h(d.hidden), logits(d.vocab) {}
};

inline void forward_one(const Views& v, std::span<const TokenId> context, Activations& a) {
  const auto& d = v.dims;
  const std::size_t in = d.context * d.embed;
  for (std::size_t k = 0; k < d.context; ++k) {
    const double* row = v.embed.data() + static_cast<std::size_t>(context[k]) * d.embed;
    std::copy(row, row + d.embed, a.x.begin() + static_cast<std::ptrdiff_t>(k * d.embed));
  }
  for (std::size_t j = 0; j < d.hidden; ++j) {
    const double* w = v.w1.data() + j * in;
    double s = v.b1[j];
    for (std::size_t k = 0; k < in; ++k) s += w[k] * a.x[k];
    a.h[j] = std::tanh(s);
  }
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t o = 0; o < d.vocab; ++o) {
    const double* w = v.w2.data() + o * d.hidden;
    double s = v.b2[o];
    for (std::size_t j = 0; j < d.hidden; ++j) s += w[j] * a.h[j];
    a.logits[o] = s;
    max_logit = std::max(max_logit, s);
  }
  double z = 0.0;
  for (double l : a.logits) z += std::exp(l - max_logit);
  a.log_norm = max_logit + std::log(z);
}

}  // namespace detail

inline LossResult forward_loss(const ParamVector& params, const Batch& batch) {
  const detail::Views v(params);
  detail::check_batch(v.dims, batch);
  LossResult r;
  r.log_probs.resize(batch.size());
  detail::Activations a(v.dims);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    detail::forward_one(v, batch.context(i), a);
    r.log_probs[i] = a.logits[batch.targets[i]] - a.log_norm;
    total += r.log_probs[i];
  }
  r.loss = batch.empty() ? 0.0 : -total / static_cast<double>(batch.size());
  return r;
}

/// Exact reverse-mode gradient of forward_loss(params, batch).loss.
inline GradSample backward(const ParamVector& params, const Batch& batch) {
  const detail::Views v(params);
  detail::check_batch(v.dims, batch);
  const auto& d = v.dims;
  const auto& layout = *params.layout();
  using namespace layer_names;

  GradSample g{params.layout(), std::vector<double>(params.size(), 0.0), batch.size()};
  if (batch.empty()) return g;
  double* g_embed = g.values.data() + layout.at(kEmbed).offset;
  double* g_w1 = g.values.data() + layout.at(kHiddenWeight).offset;
  double* g_b1 = g.values.data() + layout.at(kHiddenBias).offset;
  double* g_w2 = g.values.data() + layout.at(kOutputWeight).offset;
  double* g_b2 = g.values.data() + layout.at(kOutputBias).offset;

  const std::size_t in = d.context * d.embed;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  detail::Activations a(d);
  std::vector<double> d_logits(d.vocab), d_h(d.hidden), d_pre(d.hidden), d_x(in);

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto context = batch.context(i);
    detail::forward_one(v, context, a);
    for (std::size_t o = 0; o < d.vocab; ++o)
      d_logits[o] = std::exp(a.logits[o] - a.log_norm) * inv_n;
    d_logits[batch.targets[i]] -= inv_n;

    std::fill(d_h.begin(), d_h.end(), 0.0);
    for (std::size_t o = 0; o < d.vocab; ++o) {
      const double dl = d_logits[o];
      g_b2[o] += dl;
      double* gw = g_w2 + o * d.hidden;
      const double* w = v.w2.data() + o * d.hidden;
      for (std::size_t j = 0; j < d.hidden; ++j) {
        gw[j] += dl * a.h[j];
        d_h[j] += dl * w[j];
      }
    }
    for (std::size_t j = 0; j < d.hidden; ++j) d_pre[j] = d_h[j] * (1.0 - a.h[j] * a.h[j]);

    std::fill(d_x.begin(), d_x.end(), 0.0);
    for (std::size_t j = 0; j < d.hidden; ++j) {
      const double dp = d_pre[j];
      g_b1[j] += dp;
      double* gw = g_w1 + j * in;
      const double* w = v.w1.data() + j * in;
      for (std::size_t k = 0; k < in; ++k) {
        gw[k] += dp * a.x[k];
        d_x[k] += dp * w[k];
      }
    }
    for (std::size_t k = 0; k < d.context; ++k) {
      double* ge = g_embed + static_cast<std::size_t>(context[k]) * d.embed;
      for (std::size_t e = 0; e < d.embed; ++e) ge[e] += d_x[k * d.embed + e];
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

/// Index of the largest value; ties go to the lowest index.
inline std::size_t argmax_lowest(std::span<const double> xs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] > xs[best]) best = i;
  return best;
}

/// Fraction of examples whose argmax logit equals the target.
inline double next_token_accuracy(const ParamVector& params, const Batch& split) {
  if (split.empty()) fail(ErrorCode::kEmptySplit, "accuracy over an empty split");
  const detail::Views v(params);
  detail::check_batch(v.dims, split);
  detail::Activations a(v.dims);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    detail::forward_one(v, split.context(i), a);
    if (argmax_lowest(a.logits) == split.targets[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(split.size());
}

/// Mean per-token log-probability of seq under the model, each token scored
/// against its left-padded context window.
inline double sequence_log_likelihood(const ParamVector& params, std::span<const TokenId> seq) {
  const detail::Views v(params);
  if (seq.size() <= v.dims.context) {
    fail(ErrorCode::kTooShort, "sequence of length " + std::to_string(seq.size()) +
                                   " is not longer than the context window");
  }
  Batch b;
  b.context_len = v.dims.context;
  append_examples(b, seq, v.dims.pad_id());
  if (b.empty()) fail(ErrorCode::kTooShort, "sequence has no scorable tokens");
  return -forward_loss(params, b).loss;
}

/// Next-token distribution (log-probabilities) after `context`.
inline std::vector<double> next_token_log_probs(const ParamVector& params,
                                                std::span<const TokenId> context) {
  const detail::Views v(params);
  if (context.size() != v.dims.context) fail(ErrorCode::kShapeMismatch, "context length");
  detail::Activations a(v.dims);
  detail::forward_one(v, context, a);
  std::vector<double> out(a.logits.size());
  for (std::size_t o = 0; o < out.size(); ++o) out[o] = a.logits[o] - a.log_norm;
  return out;
}

}  // namespace fisher_unlearn::lm

#endif  // FISHER_UNLEARN_LM_MODEL_HPP_
