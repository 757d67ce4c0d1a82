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

#ifndef FISHER_UNLEARN_LM_CORPUS_HPP_
#define FISHER_UNLEARN_LM_CORPUS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fisher_unlearn/error.hpp"
#include "fisher_unlearn/lm/tokenizer.hpp"
#include "fisher_unlearn/numerics.hpp"

namespace fisher_unlearn::lm {

enum class Split { kTrain, kVal, kTest };

/// Token stream with contiguous train | val | test splits and a provenance
/// tag per position: 0 for regular text, k >= 1 for injected canary k.
struct Corpus {
  std::vector<TokenId> tokens;
  std::vector<std::int32_t> tags;
  std::size_t train_end = 0;
  std::size_t val_end = 0;

  std::span<const TokenId> split(Split s) const {
    switch (s) {
      case Split::kTrain: return {tokens.data(), train_end};
      case Split::kVal: return {tokens.data() + train_end, val_end - train_end};
      case Split::kTest: return {tokens.data() + val_end, tokens.size() - val_end};
    }
    return {};
  }
  std::size_t split_begin(Split s) const {
    return s == Split::kTrain ? 0 : s == Split::kVal ? train_end : val_end;
  }

  void validate(std::size_t vocab_size) const {
    if (tags.size() != tokens.size() || train_end > val_end || val_end > tokens.size()) {
      fail(ErrorCode::kInvalidArgument, "corpus splits or tags are inconsistent");
    }
    for (TokenId t : tokens)
      if (t >= vocab_size) fail(ErrorCode::kShapeMismatch, "token id outside vocabulary");
  }

  std::uint64_t hash() const {
    numerics::Fnv1a h;
    h.bytes(tokens.data(), tokens.size() * sizeof(TokenId));
    h.bytes(tags.data(), tags.size() * sizeof(std::int32_t));
    h.value(static_cast<std::uint64_t>(train_end));
    h.value(static_cast<std::uint64_t>(val_end));
    return h.digest();
  }
};

/// A training document: a fixed-length slice of one split. Each sample is
/// scored independently (its first positions see padding, not the previous
/// sample), so removing a sample removes every example it contributes.
struct Sample {
  std::size_t id = 0;        // chunk index within its split
  Sequence tokens;
  std::int32_t canary = 0;   // canary id when every position carries it
};

inline const Sequence& tokens_of(const Sample& s) { return s.tokens; }

/// Non-overlapping sample_len chunks of a split; a short tail is dropped.
inline std::vector<Sample> chunk_samples(const Corpus& corpus, Split split,
                                         std::size_t sample_len) {
  if (sample_len == 0) fail(ErrorCode::kInvalidArgument, "sample_len must be >= 1");
  const auto tokens = corpus.split(split);
  const std::size_t base = corpus.split_begin(split);
  std::vector<Sample> out;
  for (std::size_t start = 0; start + sample_len <= tokens.size(); start += sample_len) {
    Sample s;
    s.id = out.size();
    s.tokens.assign(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                    tokens.begin() + static_cast<std::ptrdiff_t>(start + sample_len));
    const std::int32_t first = corpus.tags[base + start];
    bool uniform = true;
    for (std::size_t k = 1; k < sample_len; ++k)
      uniform = uniform && corpus.tags[base + start + k] == first;
    s.canary = uniform ? first : 0;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace fisher_unlearn::lm

#endif  // FISHER_UNLEARN_LM_CORPUS_HPP_
