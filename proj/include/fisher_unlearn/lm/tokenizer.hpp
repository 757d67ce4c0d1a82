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

#ifndef FISHER_UNLEARN_LM_TOKENIZER_HPP_
#define FISHER_UNLEARN_LM_TOKENIZER_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fisher_unlearn::lm {

using TokenId = std::uint16_t;
using Sequence = std::vector<TokenId>;

/// Byte-fold character tokenizer with a fixed 64-symbol vocabulary.
///
///   id 0        space (tab and carriage return fold here)
///   ids 1..26   a..z (upper case folds to lower case)
///   ids 27..36  0..9
///   ids 37..61  . , ; : ! ? ' " - ( ) \n & * / [ ] _ # $ % + = @ |
///   id 62       every other byte, including all bytes >= 0x80
///   id 63       reserved padding; never produced by tokenize()
///
/// Additional folds: { < -> (, } > -> ), ` -> '.
namespace tokenizer {

inline constexpr std::size_t kVocabSize = 64;
inline constexpr TokenId kOtherId = 62;
inline constexpr TokenId kPadId = 63;

inline constexpr std::string_view kSymbols =
    " abcdefghijklmnopqrstuvwxyz0123456789.,;:!?'\"-()\n&*/[]_#$%+=@|~";
static_assert(kSymbols.size() == kVocabSize - 1);

namespace detail {
constexpr std::array<TokenId, 256> make_fold_table() {
  std::array<TokenId, 256> table{};
  for (auto& id : table) id = kOtherId;
  for (std::size_t id = 0; id < kOtherId; ++id) {
    table[static_cast<unsigned char>(kSymbols[id])] = static_cast<TokenId>(id);
  }
  for (int c = 'A'; c <= 'Z'; ++c) table[c] = table[c - 'A' + 'a'];
  table['\t'] = table[' '];
  table['\r'] = table[' '];
  table['{'] = table['('];
  table['<'] = table['('];
  table['}'] = table[')'];
  table['>'] = table[')'];
  table['`'] = table['\''];
  return table;
}
}  // namespace detail

inline constexpr std::array<TokenId, 256> kFoldTable = detail::make_fold_table();

inline TokenId token_of(unsigned char byte) { return kFoldTable[byte]; }

/// Canonical character of a token; padding has none and maps to '\0'.
inline char char_of(TokenId id) {
  return id < kSymbols.size() ? kSymbols[id] : '\0';
}

inline Sequence tokenize(std::string_view text) {
  Sequence out;
  out.reserve(text.size());
  for (char c : text) out.push_back(token_of(static_cast<unsigned char>(c)));
  return out;
}

inline std::string detokenize(const Sequence& ids) {
  std::string out;
  out.reserve(ids.size());
  for (TokenId id : ids)
    if (id != kPadId) out.push_back(char_of(id));
  return out;
}

/// The text tokenize/detokenize round-trips to.
inline std::string fold(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) out.push_back(char_of(token_of(static_cast<unsigned char>(c))));
  return out;
}

}  // namespace tokenizer
}  // namespace fisher_unlearn::lm

#endif  // FISHER_UNLEARN_LM_TOKENIZER_HPP_
