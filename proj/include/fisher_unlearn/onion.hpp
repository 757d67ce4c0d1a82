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

// Onion-effect analysis: drop the most exposed training samples, retrain,
// and look for samples that become exposed in their place.

#ifndef FISHER_UNLEARN_ONION_HPP_
#define FISHER_UNLEARN_ONION_HPP_

#include <cmath>
#include <cstddef>
#include <set>
#include <vector>

#include "fisher_unlearn/error.hpp"
#include "fisher_unlearn/lm/corpus.hpp"
#include "fisher_unlearn/lm/model.hpp"
#include "fisher_unlearn/lm/train.hpp"
#include "fisher_unlearn/metrics.hpp"
#include "fisher_unlearn/unlearn.hpp"

namespace fisher_unlearn::metrics {

struct OnionReport {
  std::vector<std::size_t> sample_ids;
  std::vector<double> exposure_before;
  std::vector<double> exposure_after;
  std::vector<bool> removed;
  std::size_t removed_count = 0;
  std::size_t crossings = 0;  // kept samples that rise from <= threshold to above it
};

/// `base` must be the model trained on all of `train` with (model, opts), so
/// that an empty removal set reproduces it exactly.
inline OnionReport onion_analysis(const std::vector<lm::Sample>& train, const ParamVector& base,
                                  double threshold, const lm::ModelConfig& model,
                                  const lm::TrainOptions& opts, const ReferenceSet& refset) {
  if (!std::isfinite(threshold)) fail(ErrorCode::kInvalidArgument, "threshold must be finite");
  OnionReport r;
  const ExposureScorer before(base, refset);
  std::set<std::size_t> removed;
  for (const auto& s : train) {
    const double e = before.exposure(s.tokens);
    r.sample_ids.push_back(s.id);
    r.exposure_before.push_back(e);
    if (e > threshold) removed.insert(s.id);
  }
  const ParamVector after_params =
      removed.empty() ? base : unlearn::retrain(unlearn::retain_set(train, removed), model, opts);
  const ExposureScorer after(after_params, refset);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const double e = after.exposure(train[i].tokens);
    const bool gone = removed.contains(train[i].id);
    r.exposure_after.push_back(e);
    r.removed.push_back(gone);
    if (!gone && r.exposure_before[i] <= threshold && e > threshold) ++r.crossings;
  }
  r.removed_count = removed.size();
  return r;
}

}  // namespace fisher_unlearn::metrics

#endif  // FISHER_UNLEARN_ONION_HPP_
