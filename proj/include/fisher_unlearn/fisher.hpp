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

// Block-diagonal inverse empirical Fisher.
//
// Starting from F_0^{-1} = I / lambda, every gradient g_i (i = 1..m) applies
// the exact Sherman-Morrison downdate
//
//   F_i^{-1} = F_{i-1}^{-1} - (F_{i-1}^{-1} g)(F_{i-1}^{-1} g)^T / (m + g^T F_{i-1}^{-1} g)
//
// so that after m steps F_m^{-1} = (lambda I + (1/m) sum_i g_i g_i^T)^{-1}.
// The recursion is applied independently inside width-B diagonal blocks that
// tile each layer; blocks never straddle a layer boundary.

#ifndef FISHER_UNLEARN_FISHER_HPP_
#define FISHER_UNLEARN_FISHER_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fisher_unlearn/error.hpp"
#include "fisher_unlearn/io.hpp"
#include "fisher_unlearn/lm/corpus.hpp"
#include "fisher_unlearn/lm/model.hpp"
#include "fisher_unlearn/numerics.hpp"

namespace fisher_unlearn::fisher {

using lm::Batch;
using lm::GradSample;
using lm::LayoutPtr;
using lm::ParamVector;
using numerics::DenseMatrix;

struct FisherConfig {
  double lambda = 1.0;
  std::size_t m = 1024;
  std::size_t block_width = 48;
  double eigen_clamp = 1e-10;

  void validate() const {
    if (!(lambda > 0.0) || m == 0 || block_width == 0 || !(eigen_clamp > 0.0)) {
      fail(ErrorCode::kBadConfig, "fisher config requires lambda > 0, m >= 1, B >= 1, clamp > 0");
    }
  }
};

/// One symmetric diagonal block covering [offset, offset + width) of the flat
/// parameter vector.
struct Block {
  std::size_t offset = 0;
  DenseMatrix inverse;

  std::size_t width() const noexcept { return inverse.rows(); }
};

struct LayerBlocks {
  std::string layer;
  std::vector<Block> blocks;
};

class BlockDiagInverseFisher {
 public:
  BlockDiagInverseFisher() = default;
  BlockDiagInverseFisher(LayoutPtr layout, std::vector<LayerBlocks> layers,
                         std::size_t recursions = 0)
      : layout_(std::move(layout)), layers_(std::move(layers)), recursions_(recursions) {}

  const LayoutPtr& layout() const noexcept { return layout_; }
  const std::vector<LayerBlocks>& layers() const noexcept { return layers_; }
  std::vector<LayerBlocks>& layers() noexcept { return layers_; }
  std::size_t recursions() const noexcept { return recursions_; }
  std::size_t dimension() const noexcept { return layout_ ? layout_->total() : 0; }

  std::size_t block_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.blocks.size();
    return n;
  }

  /// Rank-one downdate of every block with its slice of `grad`.
  void update(std::span<const double> grad, std::size_t m, std::size_t threads = 1) {
    if (grad.size() != dimension()) fail(ErrorCode::kLayoutMismatch, "gradient length");
    if (recursions_ >= m) {
      fail(ErrorCode::kRecursionBudgetExceeded,
           "recursion " + std::to_string(recursions_ + 1) + " exceeds budget m = " +
               std::to_string(m));
    }
    std::vector<Block*> all;
    all.reserve(block_count());
    for (auto& l : layers_)
      for (auto& b : l.blocks) all.push_back(&b);
    const double md = static_cast<double>(m);
    auto run = [&](std::size_t lo, std::size_t hi) {
      std::vector<double> fg;
      for (std::size_t k = lo; k < hi; ++k) downdate(*all[k], grad, md, fg);
    };
    threads = std::max<std::size_t>(1, std::min(threads, all.size()));
    if (threads == 1) {
      run(0, all.size());
    } else {
      std::vector<std::thread> pool;
      const std::size_t chunk = (all.size() + threads - 1) / threads;
      for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t lo = t * chunk, hi = std::min(all.size(), lo + chunk);
        if (lo < hi) pool.emplace_back(run, lo, hi);
      }
      for (auto& th : pool) th.join();
    }
    ++recursions_;
  }

  bool operator==(const BlockDiagInverseFisher& other) const {
    if (recursions_ != other.recursions_ || layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& a = layers_[i];
      const auto& b = other.layers_[i];
      if (a.layer != b.layer || a.blocks.size() != b.blocks.size()) return false;
      for (std::size_t k = 0; k < a.blocks.size(); ++k)
        if (a.blocks[k].offset != b.blocks[k].offset ||
            !(a.blocks[k].inverse == b.blocks[k].inverse))
          return false;
    }
    return true;
  }

 private:
  // Pure per-block arithmetic: no state shared between blocks, so any block
  // order or partition across threads gives bit-identical results.
  static void downdate(Block& block, std::span<const double> grad, double m,
                       std::vector<double>& fg) {
    DenseMatrix& f = block.inverse;
    const std::size_t w = f.rows();
    const auto g = grad.subspan(block.offset, w);
    fg.assign(w, 0.0);
    bool nonzero = false;
    for (std::size_t i = 0; i < w; ++i) {
      fg[i] = numerics::dot(f.row(i), g);
      nonzero = nonzero || fg[i] != 0.0;
    }
    if (nonzero) {
      const double denom = m + numerics::dot(g, fg);
      for (std::size_t i = 0; i < w; ++i) {
        auto row = f.row(i);
        const double fi = fg[i];
        for (std::size_t j = 0; j < w; ++j) row[j] -= (fi * fg[j]) / denom;
      }
    }
    for (std::size_t i = 0; i < w; ++i)
      for (std::size_t j = i + 1; j < w; ++j) {
        const double avg = 0.5 * (f(i, j) + f(j, i));
        f(i, j) = avg;
        f(j, i) = avg;
      }
  }

  LayoutPtr layout_;
  std::vector<LayerBlocks> layers_;
  std::size_t recursions_ = 0;
};

/// Every block starts as I / lambda; blocks of width B tile each layer, the
/// last block of a layer holding the remainder.
inline BlockDiagInverseFisher init_inverse_fisher(const LayoutPtr& layout,
                                                  const FisherConfig& cfg) {
  cfg.validate();
  std::vector<LayerBlocks> layers;
  for (const auto& entry : layout->entries()) {
    LayerBlocks lb{entry.name, {}};
    for (std::size_t start = 0; start < entry.size(); start += cfg.block_width) {
      const std::size_t width = std::min(cfg.block_width, entry.size() - start);
      lb.blocks.push_back({entry.offset + start, DenseMatrix::identity(width, 1.0 / cfg.lambda)});
    }
    layers.push_back(std::move(lb));
  }
  return BlockDiagInverseFisher(layout, std::move(layers));
}

/// Value-returning form of BlockDiagInverseFisher::update.
inline BlockDiagInverseFisher wsm_update(BlockDiagInverseFisher f, const GradSample& grad,
                                         std::size_t m) {
  if (!lm::same_layout(f.layout(), grad.layout)) {
    fail(ErrorCode::kLayoutMismatch, "gradient layout differs from the Fisher layout");
  }
  f.update(grad.values, m);
  return f;
}

/// Seeded, endlessly cycling minibatch stream over a sample set. Every pass
/// is a fresh permutation drawn from the stream's own generator.
class BatchStream {
 public:
  template <class S>
  BatchStream(const std::vector<S>& samples, std::size_t batch_size, std::uint64_t seed)
      : batch_size_(batch_size), rng_(seed) {
    if (batch_size_ == 0) fail(ErrorCode::kBadConfig, "batch_size must be >= 1");
    sequences_.reserve(samples.size());
    for (const auto& s : samples) sequences_.push_back(lm::tokens_of(s));
  }

  bool empty() const noexcept { return sequences_.empty(); }
  std::size_t batches_per_pass() const {
    return (sequences_.size() + batch_size_ - 1) / batch_size_;
  }

  Batch next(std::size_t context_len, lm::TokenId pad) {
    if (empty()) fail(ErrorCode::kEmptyStream, "batch stream has no samples");
    if (cursor_ >= order_.size()) {
      order_.resize(sequences_.size());
      for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
      rng_.shuffle(order_);
      cursor_ = 0;
    }
    Batch b;
    b.context_len = context_len;
    const std::size_t stop = std::min(order_.size(), cursor_ + batch_size_);
    for (; cursor_ < stop; ++cursor_) lm::append_examples(b, sequences_[order_[cursor_]], pad);
    return b;
  }

 private:
  std::vector<lm::Sequence> sequences_;
  std::size_t batch_size_;
  numerics::Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

/// init_inverse_fisher followed by exactly cfg.m recursions, one per
/// minibatch gradient of the stream, all taken at the fixed `params`.
inline BlockDiagInverseFisher estimate_inverse_fisher(const ParamVector& params,
                                                      BatchStream& stream,
                                                      const FisherConfig& cfg) {
  if (stream.empty()) fail(ErrorCode::kEmptyStream, "no retained batches for Fisher estimation");
  const auto dims = lm::ModelDims::of(*params.layout());
  BlockDiagInverseFisher f = init_inverse_fisher(params.layout(), cfg);
  for (std::size_t j = 0; j < cfg.m; ++j) {
    const GradSample g = lm::backward(params, stream.next(dims.context, dims.pad_id()));
    f.update(g.values, cfg.m);
  }
  return f;
}

/// Block-wise F^{-1} v, concatenated in layout order.
inline std::vector<double> apply_inverse(const BlockDiagInverseFisher& f,
                                         std::span<const double> v) {
  if (v.size() != f.dimension()) fail(ErrorCode::kLayoutMismatch, "vector length");
  std::vector<double> out(v.size(), 0.0);
  for (const auto& layer : f.layers())
    for (const auto& b : layer.blocks) {
      const auto slice = v.subspan(b.offset, b.width());
      for (std::size_t i = 0; i < b.width(); ++i)
        out[b.offset + i] = numerics::dot(b.inverse.row(i), slice);
    }
  return out;
}

inline std::vector<double> apply_inverse(const BlockDiagInverseFisher& f, const GradSample& v) {
  if (!lm::same_layout(f.layout(), v.layout)) {
    fail(ErrorCode::kLayoutMismatch, "vector layout differs from the Fisher layout");
  }
  return apply_inverse(f, std::span<const double>(v.values));
}

/// Per coordinate: max(diag(F^{-1})_i, clamp)^(1/4). This is the elementwise
/// reading of H^{-1/4} used by the Fisher Forgetting noise term.
inline std::vector<double> diag_inverse_quarter_root(const BlockDiagInverseFisher& f,
                                                     double eigen_clamp = 1e-10) {
  std::vector<double> out(f.dimension(), 0.0);
  for (const auto& layer : f.layers())
    for (const auto& b : layer.blocks)
      for (std::size_t i = 0; i < b.width(); ++i)
        out[b.offset + i] = std::pow(std::max(b.inverse(i, i), eigen_clamp), 0.25);
  return out;
}

// Offline inspection dump: manifest listing block widths per layer plus the
// blocks' row-major values concatenated in layout order.

inline void save_fisher_dump(const std::filesystem::path& path, const BlockDiagInverseFisher& f) {
  io::Manifest m;
  m.set("format", std::string("fisher-unlearn-inverse-fisher"));
  m.set("format_version", 1);
  m.set("layout_hash", numerics::hex64(f.layout()->hash()));
  m.set("dimension", f.dimension());
  m.set("recursions", f.recursions());
  m.set("layer_count", f.layers().size());
  std::vector<double> payload;
  for (std::size_t i = 0; i < f.layers().size(); ++i) {
    const auto& l = f.layers()[i];
    std::string widths;
    for (const auto& b : l.blocks) {
      if (!widths.empty()) widths += ",";
      widths += std::to_string(b.width());
      payload.insert(payload.end(), b.inverse.data().begin(), b.inverse.data().end());
    }
    m.set("layer." + std::to_string(i), l.layer + " " + widths);
  }
  m.set("payload", io::payload_path(path).filename().string());
  io::write_text(path, m.to_string());
  io::write_f64_le(io::payload_path(path), payload);
}

inline BlockDiagInverseFisher load_fisher_dump(const std::filesystem::path& path,
                                               const LayoutPtr& layout) {
  const io::Manifest m = io::Manifest::parse(io::read_text(path));
  if (m.get("format") != "fisher-unlearn-inverse-fisher") {
    fail(ErrorCode::kIoError, "not an inverse-Fisher dump: " + path.string());
  }
  if (m.get("layout_hash") != numerics::hex64(layout->hash())) {
    fail(ErrorCode::kLayoutMismatch, "dump layout hash does not match");
  }
  const std::vector<double> payload = io::read_f64_le(path.parent_path() / m.get("payload"));
  std::size_t cursor = 0;
  std::vector<LayerBlocks> layers;
  const std::size_t n_layers = m.get_u64("layer_count");
  for (std::size_t i = 0; i < n_layers; ++i) {
    const std::string spec = m.get("layer." + std::to_string(i));
    const auto space = spec.rfind(' ');
    LayerBlocks lb{spec.substr(0, space), {}};
    std::size_t offset = layout->at(lb.layer).offset;
    std::string widths = spec.substr(space + 1);
    std::size_t pos = 0;
    while (pos < widths.size()) {
      const auto comma = widths.find(',', pos);
      const std::size_t w = std::stoull(widths.substr(pos, comma - pos));
      if (cursor + w * w > payload.size()) fail(ErrorCode::kIoError, "dump payload truncated");
      std::vector<double> values(payload.begin() + static_cast<std::ptrdiff_t>(cursor),
                                 payload.begin() + static_cast<std::ptrdiff_t>(cursor + w * w));
      lb.blocks.push_back({offset, DenseMatrix(w, w, std::move(values))});
      cursor += w * w;
      offset += w;
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    layers.push_back(std::move(lb));
  }
  if (cursor != payload.size()) fail(ErrorCode::kIoError, "dump payload has trailing data");
  return BlockDiagInverseFisher(layout, std::move(layers), m.get_u64("recursions"));
}

}  // namespace fisher_unlearn::fisher

#endif  // FISHER_UNLEARN_FISHER_HPP_
