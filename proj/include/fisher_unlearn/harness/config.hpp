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

// Experiment configuration: JSON schema, defaults and the config hash.
//
// Every section and key is optional in a config file; absent keys keep their
// defaults, and CLI flags are applied on top (flag > file > default).
//
//   {
//     "scenario": "cycles" | "extended" | "memorization" | "dp_tradeoff" | "onion",
//     "seeds": [1, 2, 3], "cycles": 2, "cache_size": 32,
//     "refset_size": 1000, "bins": 1024, "threshold": 6.0,
//     "methods": ["retrain", "finetune", "gradient_ascent", "fisher_removal",
//                 "fisher_forgetting"],
//     "output_dir": "out",
//     "corpus": {"path", "max_bytes", "train_frac", "val_frac", "test_frac", "sample_len"},
//     "canary": {"enabled", "template", "count", "secret_len", "reps"},
//     "model": {"vocab_size", "context_len", "embed_dim", "hidden_dim"},
//     "train": {"epochs", "lr", "batch_size", "retrain_epochs", "finetune_epochs"},
//     "unlearn": {"ascent_lr", "gamma", "mu", "sigma",
//                 "fisher": {"lambda", "m", "block_width", "eigen_clamp"}},
//     "dp": {"clip_norm", "noise_multiplier", "lot_size"},
//     "grids": {"noise", "ascent_lr", "gamma", "mu"},
//     "memorization": {"prefix", "continuation", "tries", "top_k", "epochs",
//                      "regular_samples"}
//   }

#ifndef FISHER_UNLEARN_HARNESS_CONFIG_HPP_
#define FISHER_UNLEARN_HARNESS_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fisher_unlearn/error.hpp"
#include "fisher_unlearn/io.hpp"
#include "fisher_unlearn/lm/model.hpp"
#include "fisher_unlearn/lm/train.hpp"
#include "fisher_unlearn/numerics.hpp"
#include "fisher_unlearn/unlearn.hpp"

namespace fisher_unlearn::harness {

using Json = nlohmann::json;

inline constexpr std::string_view kScenarios[] = {"cycles", "extended", "memorization",
                                                  "dp_tradeoff", "onion"};

struct CorpusSpec {
  std::string path = "data/desk_corpus.txt";
  std::size_t max_bytes = 0;  // 0 keeps the whole file
  double train_frac = 0.8;
  double val_frac = 0.1;
  double test_frac = 0.1;
  std::size_t sample_len = 32;
};

/// Secret-bearing canary documents. "{}" in the template marks the secret.
struct CanarySpec {
  bool enabled = true;
  std::string text_template = "the secret code is {}.";
  std::size_t count = 4;
  std::size_t secret_len = 12;
  std::size_t reps = 8;

  std::size_t occurrences() const { return enabled ? count * reps : 0; }
};

struct TrainSpec {
  std::size_t epochs = 5;
  double lr = 0.5;
  std::size_t batch_size = 8;
  std::size_t retrain_epochs = 5;
  std::size_t finetune_epochs = 1;

  lm::TrainOptions options(std::size_t n_epochs) const { return {n_epochs, lr, batch_size}; }
};

struct Grids {
  std::vector<double> noise{0.0, 0.5, 1.0, 2.0};
  std::vector<double> ascent_lr{0.0};
  std::vector<double> gamma{0.0};
  std::vector<double> mu{0.0};
};

struct MemorizationSpec {
  std::size_t prefix = 10;
  std::size_t continuation = 20;
  std::size_t tries = 10;
  std::size_t top_k = 3;
  std::size_t epochs = 10;
  std::size_t regular_samples = 64;
};

struct ExperimentConfig {
  std::string scenario = "cycles";
  std::vector<std::uint64_t> seeds{1};
  std::size_t cycles = 2;
  std::size_t cache_size = 32;
  std::size_t refset_size = 1000;
  std::size_t bins = 1024;
  double threshold = 6.0;
  std::vector<std::string> methods{"retrain", "finetune", "gradient_ascent", "fisher_removal",
                                   "fisher_forgetting"};
  std::string output_dir = "out";
  CorpusSpec corpus;
  CanarySpec canary;
  lm::ModelConfig model;
  TrainSpec train;
  unlearn::UnlearnConfig unlearn;
  lm::DpConfig dp;
  Grids grids;
  MemorizationSpec memorization;

  void validate() const {
    bool known = false;
    for (auto s : kScenarios) known = known || s == scenario;
    if (!known) fail(ErrorCode::kBadConfig, "unknown scenario: " + scenario);
    if (seeds.empty()) fail(ErrorCode::kBadConfig, "seeds must be non-empty");
    if (cache_size == 0 || refset_size == 0 || bins == 0) {
      fail(ErrorCode::kBadConfig, "cache_size, refset_size and bins must be >= 1");
    }
    if (methods.empty()) fail(ErrorCode::kBadConfig, "methods must be non-empty");
    for (const auto& m : methods) unlearn::parse_method(m);
    if (corpus.sample_len <= model.context_len) {
      fail(ErrorCode::kBadConfig, "sample_len must exceed the model context length");
    }
    if (train.batch_size == 0 || !(train.lr > 0.0)) {
      fail(ErrorCode::kBadConfig, "train requires batch_size >= 1 and lr > 0");
    }
    if (canary.enabled && (canary.count == 0 || canary.reps == 0 || canary.secret_len == 0 ||
                           canary.text_template.find("{}") == std::string::npos)) {
      fail(ErrorCode::kBadConfig, "canary spec needs count, reps, secret_len >= 1 and a {} slot");
    }
    if (memorization.prefix + memorization.continuation > corpus.sample_len ||
        memorization.tries == 0 || memorization.top_k == 0) {
      fail(ErrorCode::kBadConfig, "memorization prefix + continuation must fit in a sample");
    }
    if (scenario == "dp_tradeoff" && grids.noise.empty()) {
      fail(ErrorCode::kBadConfig, "dp_tradeoff needs a non-empty noise grid");
    }
    model.validate();
    unlearn.validate();
    dp.validate();
  }
};

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const Json::exception& e) {
    fail(ErrorCode::kBadConfig, std::string("config key '") + key + "': " + e.what());
  }
}

inline void require_object(const Json& j, const char* what) {
  if (!j.is_object()) fail(ErrorCode::kBadConfig, std::string(what) + " must be a JSON object");
}

}  // namespace detail

inline Json to_json(const ExperimentConfig& c) {
  const auto& f = c.unlearn.fisher;
  return Json{
      {"scenario", c.scenario},
      {"seeds", c.seeds},
      {"cycles", c.cycles},
      {"cache_size", c.cache_size},
      {"refset_size", c.refset_size},
      {"bins", c.bins},
      {"threshold", c.threshold},
      {"methods", c.methods},
      {"output_dir", c.output_dir},
      {"corpus",
       {{"path", c.corpus.path},
        {"max_bytes", c.corpus.max_bytes},
        {"train_frac", c.corpus.train_frac},
        {"val_frac", c.corpus.val_frac},
        {"test_frac", c.corpus.test_frac},
        {"sample_len", c.corpus.sample_len}}},
      {"canary",
       {{"enabled", c.canary.enabled},
        {"template", c.canary.text_template},
        {"count", c.canary.count},
        {"secret_len", c.canary.secret_len},
        {"reps", c.canary.reps}}},
      {"model",
       {{"vocab_size", c.model.vocab_size},
        {"context_len", c.model.context_len},
        {"embed_dim", c.model.embed_dim},
        {"hidden_dim", c.model.hidden_dim}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"lr", c.train.lr},
        {"batch_size", c.train.batch_size},
        {"retrain_epochs", c.train.retrain_epochs},
        {"finetune_epochs", c.train.finetune_epochs}}},
      {"unlearn",
       {{"ascent_lr", c.unlearn.ascent_lr},
        {"gamma", c.unlearn.gamma},
        {"mu", c.unlearn.mu},
        {"sigma", c.unlearn.sigma},
        {"fisher",
         {{"lambda", f.lambda},
          {"m", f.m},
          {"block_width", f.block_width},
          {"eigen_clamp", f.eigen_clamp}}}}},
      {"dp",
       {{"clip_norm", c.dp.clip_norm},
        {"noise_multiplier", c.dp.noise_multiplier},
        {"lot_size", c.dp.lot_size}}},
      {"grids",
       {{"noise", c.grids.noise},
        {"ascent_lr", c.grids.ascent_lr},
        {"gamma", c.grids.gamma},
        {"mu", c.grids.mu}}},
      {"memorization",
       {{"prefix", c.memorization.prefix},
        {"continuation", c.memorization.continuation},
        {"tries", c.memorization.tries},
        {"top_k", c.memorization.top_k},
        {"epochs", c.memorization.epochs},
        {"regular_samples", c.memorization.regular_samples}}},
  };
}

/// Overlays the keys present in `j` onto `c`.
inline void merge_json(ExperimentConfig& c, const Json& j) {
  using detail::read;
  detail::require_object(j, "config");
  read(j, "scenario", c.scenario);
  read(j, "seeds", c.seeds);
  read(j, "cycles", c.cycles);
  read(j, "cache_size", c.cache_size);
  read(j, "refset_size", c.refset_size);
  read(j, "bins", c.bins);
  read(j, "threshold", c.threshold);
  read(j, "methods", c.methods);
  read(j, "output_dir", c.output_dir);
  if (j.contains("corpus")) {
    const Json& s = j["corpus"];
    detail::require_object(s, "corpus");
    read(s, "path", c.corpus.path);
    read(s, "max_bytes", c.corpus.max_bytes);
    read(s, "train_frac", c.corpus.train_frac);
    read(s, "val_frac", c.corpus.val_frac);
    read(s, "test_frac", c.corpus.test_frac);
    read(s, "sample_len", c.corpus.sample_len);
  }
  if (j.contains("canary")) {
    const Json& s = j["canary"];
    detail::require_object(s, "canary");
    read(s, "enabled", c.canary.enabled);
    read(s, "template", c.canary.text_template);
    read(s, "count", c.canary.count);
    read(s, "secret_len", c.canary.secret_len);
    read(s, "reps", c.canary.reps);
  }
  if (j.contains("model")) {
    const Json& s = j["model"];
    detail::require_object(s, "model");
    read(s, "vocab_size", c.model.vocab_size);
    read(s, "context_len", c.model.context_len);
    read(s, "embed_dim", c.model.embed_dim);
    read(s, "hidden_dim", c.model.hidden_dim);
  }
  if (j.contains("train")) {
    const Json& s = j["train"];
    detail::require_object(s, "train");
    read(s, "epochs", c.train.epochs);
    read(s, "lr", c.train.lr);
    read(s, "batch_size", c.train.batch_size);
    read(s, "retrain_epochs", c.train.retrain_epochs);
    read(s, "finetune_epochs", c.train.finetune_epochs);
  }
  if (j.contains("unlearn")) {
    const Json& s = j["unlearn"];
    detail::require_object(s, "unlearn");
    read(s, "ascent_lr", c.unlearn.ascent_lr);
    read(s, "gamma", c.unlearn.gamma);
    read(s, "mu", c.unlearn.mu);
    read(s, "sigma", c.unlearn.sigma);
    if (s.contains("fisher")) {
      const Json& f = s["fisher"];
      detail::require_object(f, "unlearn.fisher");
      read(f, "lambda", c.unlearn.fisher.lambda);
      read(f, "m", c.unlearn.fisher.m);
      read(f, "block_width", c.unlearn.fisher.block_width);
      read(f, "eigen_clamp", c.unlearn.fisher.eigen_clamp);
    }
  }
  if (j.contains("dp")) {
    const Json& s = j["dp"];
    detail::require_object(s, "dp");
    read(s, "clip_norm", c.dp.clip_norm);
    read(s, "noise_multiplier", c.dp.noise_multiplier);
    read(s, "lot_size", c.dp.lot_size);
  }
  if (j.contains("grids")) {
    const Json& s = j["grids"];
    detail::require_object(s, "grids");
    read(s, "noise", c.grids.noise);
    read(s, "ascent_lr", c.grids.ascent_lr);
    read(s, "gamma", c.grids.gamma);
    read(s, "mu", c.grids.mu);
  }
  if (j.contains("memorization")) {
    const Json& s = j["memorization"];
    detail::require_object(s, "memorization");
    read(s, "prefix", c.memorization.prefix);
    read(s, "continuation", c.memorization.continuation);
    read(s, "tries", c.memorization.tries);
    read(s, "top_k", c.memorization.top_k);
    read(s, "epochs", c.memorization.epochs);
    read(s, "regular_samples", c.memorization.regular_samples);
  }
}

inline ExperimentConfig from_json(const Json& j) {
  ExperimentConfig c;
  merge_json(c, j);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(io::read_text(path));
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::kBadConfig, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

/// FNV-1a of the canonical JSON dump (keys sorted, fixed float format).
/// output_dir is left out: where results go does not change them.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  Json j = to_json(c);
  j.erase("output_dir");
  numerics::Fnv1a h;
  h.text(j.dump());
  return h.digest();
}

inline std::string config_hash_hex(const ExperimentConfig& c) {
  return numerics::hex64(config_hash(c));
}

/// Per-purpose child seed so that corpus, model and unlearning streams stay
/// independent while all following from the one run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
  numerics::Fnv1a h;
  h.value(seed);
  h.text(purpose);
  return h.digest();
}

}  // namespace fisher_unlearn::harness

#endif  // FISHER_UNLEARN_HARNESS_CONFIG_HPP_
