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

// Extraction-style memorization test: a sample counts as memorized when a
// continuation decoded from its prefix reproduces the following tokens.

#ifndef FISHER_UNLEARN_HARNESS_MEMORIZATION_HPP_
#define FISHER_UNLEARN_HARNESS_MEMORIZATION_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "fisher_unlearn/error.hpp"
#include "fisher_unlearn/harness/config.hpp"
#include "fisher_unlearn/lm/model.hpp"
#include "fisher_unlearn/numerics.hpp"

namespace fisher_unlearn::harness {

/// Decodes `length` tokens after `prefix`. With top_k == 0 decoding is
/// greedy (lowest id wins ties); otherwise each token is drawn from the
/// renormalized k most likely tokens.
inline lm::Sequence decode(const lm::ParamVector& params, std::span<const lm::TokenId> prefix,
                           std::size_t length, std::size_t top_k, numerics::Rng& rng) {
  const auto dims = lm::ModelDims::of(*params.layout());
  lm::Sequence history(dims.context, dims.pad_id());
  history.insert(history.end(), prefix.begin(), prefix.end());
  lm::Sequence out;
  std::vector<std::size_t> order(dims.vocab);
  for (std::size_t step = 0; step < length; ++step) {
    const std::span<const lm::TokenId> ctx(history.data() + history.size() - dims.context,
                                           dims.context);
    const std::vector<double> lp = lm::next_token_log_probs(params, ctx);
    lm::TokenId next;
    if (top_k == 0) {
      next = static_cast<lm::TokenId>(lm::argmax_lowest(lp));
    } else {
      std::iota(order.begin(), order.end(), std::size_t{0});
      const std::size_t k = std::min(top_k, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                        [&](std::size_t a, std::size_t b) {
                          return lp[a] > lp[b] || (lp[a] == lp[b] && a < b);
                        });
      double total = 0.0;
      for (std::size_t i = 0; i < k; ++i) total += std::exp(lp[order[i]]);
      double u = rng.uniform() * total;
      next = static_cast<lm::TokenId>(order[k - 1]);
      for (std::size_t i = 0; i < k; ++i) {
        u -= std::exp(lp[order[i]]);
        if (u <= 0.0) {
          next = static_cast<lm::TokenId>(order[i]);
          break;
        }
      }
    }
    out.push_back(next);
    history.push_back(next);
  }
  return out;
}

/// True when any of `spec.tries` decodes from the first `spec.prefix` tokens
/// reproduces the next `spec.continuation` tokens exactly. The first try is
/// greedy; the rest sample from the top k.
inline bool is_memorized(const lm::ParamVector& params, std::span<const lm::TokenId> seq,
                         const MemorizationSpec& spec, numerics::Rng& rng) {
  if (seq.size() < spec.prefix + spec.continuation) {
    fail(ErrorCode::kTooShort, "sequence shorter than prefix + continuation");
  }
  const auto prefix = seq.first(spec.prefix);
  const auto target = seq.subspan(spec.prefix, spec.continuation);
  for (std::size_t t = 0; t < spec.tries; ++t) {
    const lm::Sequence got = decode(params, prefix, spec.continuation, t == 0 ? 0 : spec.top_k, rng);
    if (std::equal(got.begin(), got.end(), target.begin(), target.end())) return true;
  }
  return false;
}

template <class S>
std::size_t count_memorized(const lm::ParamVector& params, const std::vector<S>& samples,
                            const MemorizationSpec& spec, std::uint64_t seed) {
  numerics::Rng rng(seed);
  std::size_t n = 0;
  for (const auto& s : samples)
    if (is_memorized(params, lm::tokens_of(s), spec, rng)) ++n;
  return n;
}

}  // namespace fisher_unlearn::harness

#endif  // FISHER_UNLEARN_HARNESS_MEMORIZATION_HPP_
