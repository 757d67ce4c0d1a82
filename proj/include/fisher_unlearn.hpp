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

// Umbrella header.

#ifndef FISHER_UNLEARN_FISHER_UNLEARN_HPP_
#define FISHER_UNLEARN_FISHER_UNLEARN_HPP_

#include "fisher_unlearn/error.hpp"
#include "fisher_unlearn/fisher.hpp"
#include "fisher_unlearn/io.hpp"
#include "fisher_unlearn/lm/checkpoint.hpp"
#include "fisher_unlearn/lm/corpus.hpp"
#include "fisher_unlearn/lm/model.hpp"
#include "fisher_unlearn/lm/tokenizer.hpp"
#include "fisher_unlearn/lm/train.hpp"
#include "fisher_unlearn/metrics.hpp"
#include "fisher_unlearn/numerics.hpp"
#include "fisher_unlearn/onion.hpp"
#include "fisher_unlearn/unlearn.hpp"
#include "fisher_unlearn/harness/config.hpp"
#include "fisher_unlearn/harness/memorization.hpp"
#include "fisher_unlearn/harness/report.hpp"
#include "fisher_unlearn/harness/scenarios.hpp"
#include "fisher_unlearn/harness/testbed.hpp"

#endif  // FISHER_UNLEARN_FISHER_UNLEARN_HPP_
