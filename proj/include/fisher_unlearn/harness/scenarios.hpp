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

// Experiment scenarios. Each returns one table plus a JSON summary; the
// writer stores <scenario>.csv, <scenario>.json and manifest.json.

#ifndef FISHER_UNLEARN_HARNESS_SCENARIOS_HPP_
#define FISHER_UNLEARN_HARNESS_SCENARIOS_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fisher_unlearn/error.hpp"
#include "fisher_unlearn/harness/config.hpp"
#include "fisher_unlearn/harness/memorization.hpp"
#include "fisher_unlearn/harness/report.hpp"
#include "fisher_unlearn/harness/testbed.hpp"
#include "fisher_unlearn/lm/model.hpp"
#include "fisher_unlearn/lm/train.hpp"
#include "fisher_unlearn/metrics.hpp"
#include "fisher_unlearn/onion.hpp"
#include "fisher_unlearn/unlearn.hpp"

namespace fisher_unlearn::harness {

using lm::ParamVector;
using unlearn::MethodId;

struct ScenarioResult {
  std::string scenario;
  Table table;
  nlohmann::json summary = nlohmann::json::object();
};

/// Optional progress sink; scenarios write one line per unit of work.
struct Progress {
  std::ostream* out = nullptr;
  template <class... A>
  void operator()(const A&... parts) const {
    if (!out) return;
    ((*out) << ... << parts) << '\n';
    out->flush();
  }
};

inline constexpr std::size_t kExtendedCycles = 8;
inline constexpr std::string_view kKlLayer = lm::layer_names::kOutputWeight;

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::vector<MethodId> methods_of(const ExperimentConfig& cfg) {
  std::vector<MethodId> out;
  for (const auto& m : cfg.methods) out.push_back(unlearn::parse_method(m));
  // Retrain first: its per-cycle parameters are the KL reference.
  std::stable_partition(out.begin(), out.end(),
                        [](MethodId m) { return m == MethodId::kRetrain; });
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// cycles / extended
// ---------------------------------------------------------------------------

inline Table cycle_table() {
  return Table{{"config_hash", "seed", "method", "cycle", "t", "r", "forget_batches", "cumulative",
                "acc_before", "acc_after", "delta_acc", "delta_exp", "kl_vs_retrain",
                "gradient_s", "fisher_s", "update_s", "eval_s"},
               {}};
}

/// Runs every configured method for `cycles` cycles on one testbed and
/// appends one row per (method, cycle).
inline void cycle_rows(const ExperimentConfig& cfg, const Testbed& tb, const ParamVector& theta0,
                       std::size_t cycles, Table& table, const Progress& progress = {}) {
  const std::string hash = config_hash_hex(cfg);
  std::vector<ParamVector> retrain_params;
  for (MethodId method : detail::methods_of(cfg)) {
    progress("  seed ", tb.seed, " method ", unlearn::method_name(method));
    unlearn::ForgetCache cache(cfg.cache_size);
    const unlearn::CycleInputs in{theta0, tb.train, tb.forget_stream, tb.test, tb.refset};
    std::vector<double> kl;
    auto observer = [&](const metrics::CycleReport& rep, const ParamVector& theta) {
      if (method == MethodId::kRetrain) {
        retrain_params.push_back(theta);
        kl.push_back(0.0);
      } else if (rep.cycle <= retrain_params.size()) {
        kl.push_back(metrics::weight_distribution_kl(theta, retrain_params[rep.cycle - 1],
                                                     kKlLayer, cfg.bins));
      } else {
        kl.push_back(std::numeric_limits<double>::quiet_NaN());
      }
    };
    const auto reports =
        unlearn::run_unlearning_cycles(in, cache, method, cycles, tb.settings, nullptr, observer);
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const auto& r = reports[i];
      table.add({hash, tb.seed, r.method, std::uint64_t{r.cycle},
                 std::uint64_t{r.t}, std::uint64_t{r.r}, std::uint64_t{r.forget_batches},
                 std::uint64_t{r.cumulative}, r.acc_before, r.acc_after, r.delta_acc, r.delta_exp,
                 kl[i], r.timings.gradient_s, r.timings.fisher_s, r.timings.update_s,
                 r.timings.eval_s});
    }
  }
}

inline ScenarioResult scenario_cycles(const ExperimentConfig& cfg, std::size_t cycles,
                                      const Progress& progress = {}) {
  ScenarioResult res;
  res.table = cycle_table();
  for (std::uint64_t seed : cfg.seeds) {
    const Testbed tb = make_testbed(cfg, seed);
    progress("seed ", seed, ": training base model on ", tb.train.size(), " samples");
    const ParamVector theta0 = train_base(tb, cfg.train.epochs);
    res.summary["secrets"][std::to_string(seed)] = tb.data.secrets;
    cycle_rows(cfg, tb, theta0, cycles, res.table, progress);
  }
  res.summary["cycles"] = cycles;
  return res;
}

// ---------------------------------------------------------------------------
// memorization
// ---------------------------------------------------------------------------

inline ScenarioResult scenario_memorization(const ExperimentConfig& cfg,
                                            const Progress& progress = {}) {
  ScenarioResult res;
  res.table = Table{{"config_hash", "seed", "method", "canary_memorized", "canary_total",
                     "regular_memorized", "regular_total", "canary_max_exposure",
                     "refset_median_exposure", "delta_acc", "runtime_s"},
                    {}};
  const std::string hash = config_hash_hex(cfg);
  const auto& mem = cfg.memorization;
  for (std::uint64_t seed : cfg.seeds) {
    Testbed tb = make_testbed(cfg, seed);
    tb.settings.train.epochs = mem.epochs;
    tb.settings.retrain_epochs = mem.epochs;
    progress("seed ", seed, ": heavy training for ", mem.epochs, " epochs");
    const ParamVector theta0 = train_base(tb, mem.epochs);
    const auto canaries = tb.distinct_canaries();
    std::vector<lm::Sample> regular;
    for (std::size_t i = std::min(cfg.cache_size, tb.forget_stream.size());
         i < tb.forget_stream.size() && regular.size() < mem.regular_samples; ++i)
      if (tb.forget_stream[i].canary == 0) regular.push_back(tb.forget_stream[i]);
    const std::uint64_t decode_seed = derive_seed(seed, "decode");
    const double acc0 = lm::next_token_accuracy(theta0, tb.test);
    auto add = [&](const std::string& method, const ParamVector& p, double seconds) {
      const metrics::ExposureScorer scorer(p, tb.refset);
      double max_exposure = 0.0;
      for (const auto& e : metrics::exposure_report(scorer, canaries).entries)
        max_exposure = std::max(max_exposure, e.exposure);
      res.table.add({hash, seed, method,
                     std::uint64_t{count_memorized(p, canaries, mem, decode_seed)},
                     std::uint64_t{canaries.size()},
                     std::uint64_t{count_memorized(p, regular, mem, decode_seed)},
                     std::uint64_t{regular.size()}, max_exposure,
                     scorer.median_reference_exposure(), 100.0 * (lm::next_token_accuracy(p, tb.test) - acc0), seconds});
    };
    add("none", theta0, 0.0);
    for (MethodId method : detail::methods_of(cfg)) {
      progress("  seed ", seed, " method ", unlearn::method_name(method));
      unlearn::ForgetCache cache(cfg.cache_size);
      const unlearn::CycleInputs in{theta0, tb.train, tb.forget_stream, tb.test, tb.refset};
      ParamVector after = theta0;
      const auto reports = unlearn::run_unlearning_cycles(in, cache, method, 1, tb.settings, &after);
      add(std::string(unlearn::method_name(method)), after, reports.front().timings.unlearn_s());
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// dp_tradeoff
// ---------------------------------------------------------------------------

inline ScenarioResult scenario_dp_tradeoff(const ExperimentConfig& cfg,
                                           const Progress& progress = {}) {
  if (cfg.grids.noise.empty()) fail(ErrorCode::kBadConfig, "noise grid is empty");
  ScenarioResult res;
  res.table = Table{{"config_hash", "seed", "method", "knob", "accuracy", "exposure", "runtime_s"},
                    {}};
  const std::string hash = config_hash_hex(cfg);
  for (std::uint64_t seed : cfg.seeds) {
    const Testbed tb = make_testbed(cfg, seed);
    const std::size_t n_sub = std::min(cfg.cache_size, tb.forget_stream.size());
    const std::vector<lm::Sample> subset(tb.forget_stream.begin(),
                                         tb.forget_stream.begin() + static_cast<std::ptrdiff_t>(n_sub));
    auto add = [&](const std::string& method, double knob, const ParamVector& p, double seconds) {
      const metrics::ExposureScorer scorer(p, tb.refset);
      res.table.add({hash, seed, method, knob, lm::next_token_accuracy(p, tb.test),
                     metrics::mean_exposure(scorer, subset), seconds});
    };
    progress("seed ", seed, ": non-private baseline");
    auto t0 = std::chrono::steady_clock::now();
    const ParamVector theta0 = train_base(tb, cfg.train.epochs);
    add("none", 0.0, theta0, detail::seconds_since(t0));

    for (double z : cfg.grids.noise) {
      progress("  seed ", seed, " dp_sgd z=", z);
      lm::DpConfig dp = cfg.dp;
      dp.noise_multiplier = z;
      t0 = std::chrono::steady_clock::now();
      numerics::Rng rng(tb.model.seed);
      const ParamVector init = lm::init_params(tb.model, rng);
      const ParamVector p = lm::dp_sgd_train(init, tb.train, dp, tb.settings.train, rng);
      add("dp_sgd", z, p, detail::seconds_since(t0));
    }

    std::set<std::size_t> ids;
    for (const auto& s : subset) ids.insert(s.id);
    const std::vector<lm::Sample> d_plus = unlearn::retain_set(tb.train, ids);
    const auto dims = lm::ModelDims::of(*theta0.layout());
    const auto batches = unlearn::forget_batches(subset, cfg.train.batch_size, dims);
    for (double l : cfg.grids.ascent_lr) {
      t0 = std::chrono::steady_clock::now();
      add("gradient_ascent", l, unlearn::gradient_ascent(theta0, batches, l),
          detail::seconds_since(t0));
    }
    for (double g : cfg.grids.gamma) {
      progress("  seed ", seed, " fisher_removal gamma=", g);
      unlearn::UnlearnConfig u = tb.settings.unlearn;
      u.gamma = g;
      t0 = std::chrono::steady_clock::now();
      add("fisher_removal", g,
          unlearn::fisher_removal(theta0, batches, d_plus, cfg.train.batch_size, u),
          detail::seconds_since(t0));
    }
    for (double mu : cfg.grids.mu) {
      progress("  seed ", seed, " fisher_forgetting mu=", mu);
      unlearn::UnlearnConfig u = tb.settings.unlearn;
      u.mu = mu;
      numerics::Rng noise(derive_seed(seed, "dp-forgetting-noise"));
      t0 = std::chrono::steady_clock::now();
      add("fisher_forgetting", mu,
          unlearn::fisher_forgetting(theta0, batches, d_plus, cfg.train.batch_size, u, noise),
          detail::seconds_since(t0));
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// onion
// ---------------------------------------------------------------------------

inline ScenarioResult scenario_onion(const ExperimentConfig& cfg, const Progress& progress = {}) {
  ScenarioResult res;
  res.table = Table{{"config_hash", "seed", "sample_id", "exposure_before", "exposure_after",
                     "removed_flag"},
                    {}};
  const std::string hash = config_hash_hex(cfg);
  for (std::uint64_t seed : cfg.seeds) {
    const Testbed tb = make_testbed(cfg, seed);
    progress("seed ", seed, ": onion analysis at threshold ", cfg.threshold);
    const ParamVector theta0 = train_base(tb, cfg.train.epochs);
    const auto rep = metrics::onion_analysis(tb.train, theta0, cfg.threshold, tb.model,
                                             tb.settings.train, tb.refset);
    for (std::size_t i = 0; i < rep.sample_ids.size(); ++i)
      res.table.add({hash, seed, std::uint64_t{rep.sample_ids[i]}, rep.exposure_before[i],
                     rep.exposure_after[i], std::uint64_t{rep.removed[i] ? 1u : 0u}});
    res.summary["removed"][std::to_string(seed)] = rep.removed_count;
    res.summary["crossings"][std::to_string(seed)] = rep.crossings;
  }
  return res;
}

// ---------------------------------------------------------------------------
// runtime sweep
// ---------------------------------------------------------------------------

/// One unlearning cycle per (t, n) pair: the retained set is the first n
/// samples of the forget stream and the cache holds t requests, so the
/// reports cover a grid of forget-set and retain-set sizes for
/// metrics::runtime_ledger.
inline std::vector<metrics::CycleReport> runtime_sweep(const ExperimentConfig& cfg,
                                                       const Testbed& tb,
                                                       const ParamVector& theta0,
                                                       const std::vector<std::size_t>& t_grid,
                                                       const std::vector<std::size_t>& n_grid,
                                                       const Progress& progress = {}) {
  std::vector<metrics::CycleReport> out;
  for (MethodId method : detail::methods_of(cfg)) {
    for (std::size_t n : n_grid) {
      if (n > tb.forget_stream.size()) {
        fail(ErrorCode::kInvalidArgument, "sweep size exceeds the training set");
      }
      const std::vector<lm::Sample> train(tb.forget_stream.begin(),
                                          tb.forget_stream.begin() + static_cast<std::ptrdiff_t>(n));
      for (std::size_t t : t_grid) {
        progress("  sweep ", unlearn::method_name(method), " t=", t, " n=", n);
        unlearn::ForgetCache cache(t);
        const unlearn::CycleInputs in{theta0, train, train, tb.test, tb.refset};
        const auto reports = unlearn::run_unlearning_cycles(in, cache, method, 1, tb.settings);
        out.insert(out.end(), reports.begin(), reports.end());
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// dispatch and output
// ---------------------------------------------------------------------------

inline ScenarioResult run_scenario(const ExperimentConfig& cfg, const Progress& progress = {}) {
  cfg.validate();
  ScenarioResult res;
  if (cfg.scenario == "cycles") res = scenario_cycles(cfg, cfg.cycles, progress);
  else if (cfg.scenario == "extended")
    res = scenario_cycles(cfg, std::max(cfg.cycles, kExtendedCycles), progress);
  else if (cfg.scenario == "memorization") res = scenario_memorization(cfg, progress);
  else if (cfg.scenario == "dp_tradeoff") res = scenario_dp_tradeoff(cfg, progress);
  else res = scenario_onion(cfg, progress);
  res.scenario = cfg.scenario;
  return res;
}

/// Writes <dir>/<scenario>.csv, <dir>/<scenario>.json and <dir>/manifest.json.
inline void write_scenario(const ExperimentConfig& cfg, const ScenarioResult& res,
                           const std::filesystem::path& dir) {
  const std::string stem = res.scenario;
  emit_report(res.table, ReportFormat::kCsv, dir / (stem + ".csv"));
  nlohmann::json body = to_json(res.table);
  body["config_hash"] = config_hash_hex(cfg);
  io::write_text(dir / (stem + ".json"), body.dump(2) + "\n");
  nlohmann::json manifest{{"scenario", res.scenario},
                          {"config", to_json(cfg)},
                          {"config_hash", config_hash_hex(cfg)},
                          {"seeds", cfg.seeds},
                          {"columns", res.table.columns},
                          {"timing_columns_excluded_from_digest", true},
                          {"determinism_digest", determinism_digest(res.table)},
                          {"files", {stem + ".csv", stem + ".json"}},
                          {"summary", res.summary}};
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace fisher_unlearn::harness

#endif  // FISHER_UNLEARN_HARNESS_SCENARIOS_HPP_
