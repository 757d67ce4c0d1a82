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

#ifndef FISHER_UNLEARN_LM_CHECKPOINT_HPP_
#define FISHER_UNLEARN_LM_CHECKPOINT_HPP_

#include <filesystem>
#include <sstream>
#include <string>
#include <utility>

#include "fisher_unlearn/error.hpp"
#include "fisher_unlearn/io.hpp"
#include "fisher_unlearn/lm/model.hpp"

namespace fisher_unlearn::lm {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ParamVector params;
};

inline std::string describe_layer(const LayerEntry& e) {
  std::string shape;
  for (std::size_t i = 0; i < e.shape.size(); ++i) {
    if (i) shape += "x";
    shape += std::to_string(e.shape[i]);
  }
  return e.name + " " + shape + " @" + std::to_string(e.offset);
}

/// Writes `<path>` (manifest) and `<path>.bin` (payload).
inline void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                            const ParamVector& params) {
  const LayoutPtr expected = make_layout(cfg);
  if (!same_layout(expected, params.layout())) {
    fail(ErrorCode::kLayoutMismatch, "parameters do not match the model config");
  }
  io::Manifest m;
  m.set("format", std::string("fisher-unlearn-checkpoint"));
  m.set("format_version", kCheckpointFormatVersion);
  m.set("vocab_size", cfg.vocab_size);
  m.set("context_len", cfg.context_len);
  m.set("embed_dim", cfg.embed_dim);
  m.set("hidden_dim", cfg.hidden_dim);
  m.set("seed", cfg.seed);
  const auto& entries = params.layout()->entries();
  m.set("layer_count", entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i)
    m.set("layer." + std::to_string(i), describe_layer(entries[i]));
  m.set("param_count", params.size());
  m.set("layout_hash", numerics::hex64(params.layout()->hash()));
  m.set("payload", io::payload_path(path).filename().string());
  io::write_text(path, m.to_string());
  io::write_f64_le(io::payload_path(path), params.values());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const io::Manifest m = io::Manifest::parse(io::read_text(path));
  if (m.get("format") != "fisher-unlearn-checkpoint") {
    fail(ErrorCode::kIoError, "not a checkpoint manifest: " + path.string());
  }
  if (m.get_u64("format_version") != kCheckpointFormatVersion) {
    fail(ErrorCode::kIoError, "unsupported checkpoint version");
  }
  Checkpoint ck;
  ck.config.vocab_size = m.get_u64("vocab_size");
  ck.config.context_len = m.get_u64("context_len");
  ck.config.embed_dim = m.get_u64("embed_dim");
  ck.config.hidden_dim = m.get_u64("hidden_dim");
  ck.config.seed = m.get_u64("seed");
  const LayoutPtr layout = make_layout(ck.config);
  if (m.get("layout_hash") != numerics::hex64(layout->hash())) {
    fail(ErrorCode::kLayoutMismatch, "checkpoint layout hash does not match its config");
  }
  std::vector<double> values = io::read_f64_le(path.parent_path() / m.get("payload"));
  if (values.size() != layout->total() || m.get_u64("param_count") != layout->total()) {
    fail(ErrorCode::kLayoutMismatch, "checkpoint payload length does not match layout");
  }
  ck.params = ParamVector(layout, std::move(values));
  return ck;
}

}  // namespace fisher_unlearn::lm

#endif  // FISHER_UNLEARN_LM_CHECKPOINT_HPP_
