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

// Corpus ingestion, canary injection and the per-seed experiment testbed.

#ifndef FISHER_UNLEARN_HARNESS_TESTBED_HPP_
#define FISHER_UNLEARN_HARNESS_TESTBED_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fisher_unlearn/error.hpp"
#include "fisher_unlearn/harness/config.hpp"
#include "fisher_unlearn/io.hpp"
#include "fisher_unlearn/lm/corpus.hpp"
#include "fisher_unlearn/lm/model.hpp"
#include "fisher_unlearn/lm/tokenizer.hpp"
#include "fisher_unlearn/metrics.hpp"
#include "fisher_unlearn/numerics.hpp"
#include "fisher_unlearn/unlearn.hpp"

namespace fisher_unlearn::harness {

using lm::Corpus;
using lm::Sample;

struct LoadedCorpus {
  Corpus corpus;
  std::vector<std::string> secrets;  // secrets[k - 1] belongs to canary tag k
};

/// Renders canary k: the template with its secret, right-padded with spaces
/// to exactly `length` characters.
inline std::string render_canary(const CanarySpec& spec, const std::string& secret,
                                 std::size_t length) {
  std::string text = spec.text_template;
  text.replace(text.find("{}"), 2, secret);
  if (text.size() > length) {
    fail(ErrorCode::kBadConfig, "canary text is longer than one sample: \"" + text + "\"");
  }
  text.resize(length, ' ');
  return text;
}

/// Tokenizes `text`, splits it contiguously by the fractions and inserts
/// canary documents into the train split at rng-drawn sample boundaries.
/// Each canary occupies one whole sample and carries its tag at every
/// position; natural text is shifted, never overwritten.
inline LoadedCorpus build_corpus(const std::string& text, const CorpusSpec& spec,
                                 const std::optional<CanarySpec>& canaries, std::uint64_t seed) {
  const double fracs[] = {spec.train_frac, spec.val_frac, spec.test_frac};
  double sum = 0.0;
  for (double f : fracs) {
    if (!(f >= 0.0) || !std::isfinite(f)) fail(ErrorCode::kBadFractions, "negative split fraction");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    fail(ErrorCode::kBadFractions, "split fractions sum to " + std::to_string(sum));
  }
  if (spec.sample_len == 0) fail(ErrorCode::kBadConfig, "sample_len must be >= 1");
  const std::string body = spec.max_bytes > 0 && text.size() > spec.max_bytes
                               ? text.substr(0, spec.max_bytes)
                               : text;
  const lm::Sequence tokens = lm::tokenizer::tokenize(body);
  const auto n = tokens.size();
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.train_frac));
  const auto n_val = std::min(
      n - n_train, static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.val_frac)));

  LoadedCorpus out;
  numerics::Rng rng(seed);
  std::vector<std::vector<std::size_t>> inserts;  // per train slot, canary tags to insert
  const std::size_t slots = n_train / spec.sample_len;
  inserts.resize(slots + 1);
  if (canaries && canaries->enabled && canaries->occurrences() > 0) {
    std::set<std::string> seen;
    while (out.secrets.size() < canaries->count) {
      std::string s;
      for (std::size_t i = 0; i < canaries->secret_len; ++i)
        s.push_back(static_cast<char>('0' + rng.uniform_index(10)));
      if (seen.insert(s).second) out.secrets.push_back(s);
    }
    for (std::size_t k = 1; k <= canaries->count; ++k)
      for (std::size_t r = 0; r < canaries->reps; ++r)
        inserts[rng.uniform_index(slots + 1)].push_back(k);
  }

  Corpus& c = out.corpus;
  auto push_natural = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      c.tokens.push_back(tokens[i]);
      c.tags.push_back(0);
    }
  };
  for (std::size_t slot = 0; slot <= slots; ++slot) {
    for (std::size_t tag : inserts[slot]) {
      const lm::Sequence canary = lm::tokenizer::tokenize(
          render_canary(*canaries, out.secrets[tag - 1], spec.sample_len));
      for (auto t : canary) {
        c.tokens.push_back(t);
        c.tags.push_back(static_cast<std::int32_t>(tag));
      }
    }
    const std::size_t begin = slot * spec.sample_len;
    const std::size_t end = slot == slots ? n_train : begin + spec.sample_len;
    push_natural(begin, end);
  }
  c.train_end = c.tokens.size();
  push_natural(n_train, n_train + n_val);
  c.val_end = c.tokens.size();
  push_natural(n_train + n_val, n);
  c.validate(lm::tokenizer::kVocabSize);
  return out;
}

inline LoadedCorpus load_corpus(const std::filesystem::path& path, const CorpusSpec& spec,
                                const std::optional<CanarySpec>& canaries, std::uint64_t seed) {
  return build_corpus(io::read_text(path), spec, canaries, seed);
}

/// Everything one seed of an experiment needs besides the trained model.
struct Testbed {
  std::uint64_t seed = 0;
  LoadedCorpus data;
  std::vector<Sample> train;          // D
  std::vector<Sample> canary_samples; // every canary occurrence in D, train order
  std::vector<Sample> forget_stream;  // canary occurrences, then shuffled regular samples
  lm::Batch test;
  metrics::ReferenceSet refset;
  lm::ModelConfig model;
  unlearn::CycleSettings settings;

  /// One sample per distinct canary (its first occurrence).
  std::vector<Sample> distinct_canaries() const {
    std::vector<Sample> out;
    std::set<std::int32_t> seen;
    for (const auto& s : canary_samples)
      if (seen.insert(s.canary).second) out.push_back(s);
    return out;
  }
};

inline Testbed make_testbed(const ExperimentConfig& cfg, std::uint64_t seed) {
  Testbed tb;
  tb.seed = seed;
  tb.data = load_corpus(cfg.corpus.path, cfg.corpus,
                        cfg.canary.enabled ? std::optional<CanarySpec>(cfg.canary) : std::nullopt,
                        derive_seed(seed, "corpus"));
  const Corpus& c = tb.data.corpus;
  tb.train = lm::chunk_samples(c, lm::Split::kTrain, cfg.corpus.sample_len);
  if (tb.train.empty()) fail(ErrorCode::kEmptyCorpus, "train split holds no whole sample");
  std::vector<Sample> regular;
  for (const auto& s : tb.train) (s.canary != 0 ? tb.canary_samples : regular).push_back(s);
  numerics::Rng order(derive_seed(seed, "forget-order"));
  order.shuffle(regular);
  tb.forget_stream = tb.canary_samples;
  tb.forget_stream.insert(tb.forget_stream.end(), regular.begin(), regular.end());

  tb.model = cfg.model;
  tb.model.seed = derive_seed(seed, "model");
  const auto test_samples = lm::chunk_samples(c, lm::Split::kTest, cfg.corpus.sample_len);
  if (test_samples.empty()) fail(ErrorCode::kEmptySplit, "test split holds no whole sample");
  tb.test = lm::make_batch(test_samples, tb.model.context_len, tb.model.pad_id());
  tb.refset = metrics::ReferenceSet::sample(c.split(lm::Split::kVal), cfg.refset_size,
                                            cfg.corpus.sample_len, derive_seed(seed, "refset"));

  tb.settings.model = tb.model;
  tb.settings.train = cfg.train.options(cfg.train.epochs);
  tb.settings.retrain_epochs = cfg.train.retrain_epochs;
  tb.settings.finetune_epochs = cfg.train.finetune_epochs;
  tb.settings.unlearn = cfg.unlearn;
  tb.settings.unlearn.seed = derive_seed(seed, "unlearn");
  return tb;
}

/// The original model: fresh init plus cfg.train.epochs of SGD on D.
inline lm::ParamVector train_base(const Testbed& tb, std::size_t epochs) {
  lm::TrainOptions opts = tb.settings.train;
  opts.epochs = epochs;
  return unlearn::train_from_scratch(tb.train, tb.model, opts);
}

}  // namespace fisher_unlearn::harness

#endif  // FISHER_UNLEARN_HARNESS_TESTBED_HPP_
