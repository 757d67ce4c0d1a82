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

// Command-line front end: train, unlearn, eval, scenario, report.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "fisher_unlearn.hpp"

namespace fu = fisher_unlearn;
namespace harness = fisher_unlearn::harness;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, corpus, methods;
  std::optional<std::size_t> cache_size, cycles, fisher_m, block_width, refset_size, bins;
  std::optional<double> gamma, mu, sigma, ascent_lr, lambda, threshold;
  std::optional<std::string> noise_grid;
  bool quiet = false;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON experiment config");
  app->add_option("--seed", o.seed, "run a single seed (replaces the config's seed list)");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--corpus", o.corpus, "corpus text file");
  app->add_option("--methods", o.methods, "comma-separated method ids");
  app->add_option("--cache-size", o.cache_size, "forget cache capacity");
  app->add_option("--cycles", o.cycles, "unlearning cycles");
  app->add_option("--gamma", o.gamma, "Fisher Removal rate");
  app->add_option("--mu", o.mu, "Fisher Forgetting mu");
  app->add_option("--sigma", o.sigma, "Fisher Forgetting sigma");
  app->add_option("--ascent-lr", o.ascent_lr, "gradient ascent coefficient");
  app->add_option("--lambda", o.lambda, "inverse Fisher initialization lambda");
  app->add_option("--fisher-m", o.fisher_m, "Fisher recursions per estimate");
  app->add_option("--block-width", o.block_width, "Fisher block width");
  app->add_option("--refset-size", o.refset_size, "exposure reference set size");
  app->add_option("--bins", o.bins, "histogram bins for weight KL");
  app->add_option("--threshold", o.threshold, "onion exposure cutoff");
  app->add_option("--noise-grid", o.noise_grid, "comma-separated DP noise multipliers");
  app->add_flag("--quiet", o.quiet, "suppress progress output");
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_csv(s)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      fu::fail(fu::ErrorCode::kBadConfig, "not a number in list: " + item);
    }
  }
  return out;
}

// flag > file > default
harness::ExperimentConfig resolve(const Overrides& o) {
  harness::ExperimentConfig c = o.config.empty() ? harness::ExperimentConfig{}
                                                 : harness::load_config(o.config);
  if (o.seed) c.seeds = {*o.seed};
  if (o.out) c.output_dir = *o.out;
  if (o.corpus) c.corpus.path = *o.corpus;
  if (o.methods) c.methods = split_csv(*o.methods);
  if (o.cache_size) c.cache_size = *o.cache_size;
  if (o.cycles) c.cycles = *o.cycles;
  if (o.gamma) c.unlearn.gamma = *o.gamma;
  if (o.mu) c.unlearn.mu = *o.mu;
  if (o.sigma) c.unlearn.sigma = *o.sigma;
  if (o.ascent_lr) c.unlearn.ascent_lr = *o.ascent_lr;
  if (o.lambda) c.unlearn.fisher.lambda = *o.lambda;
  if (o.fisher_m) c.unlearn.fisher.m = *o.fisher_m;
  if (o.block_width) c.unlearn.fisher.block_width = *o.block_width;
  if (o.refset_size) c.refset_size = *o.refset_size;
  if (o.bins) c.bins = *o.bins;
  if (o.threshold) c.threshold = *o.threshold;
  if (o.noise_grid) c.grids.noise = parse_doubles(*o.noise_grid);
  return c;
}

harness::Progress progress_for(const Overrides& o) {
  return harness::Progress{o.quiet ? nullptr : &std::cerr};
}

nlohmann::json evaluate(const harness::Testbed& tb, const fu::lm::ParamVector& p) {
  const fu::metrics::ExposureScorer scorer(p, tb.refset);
  nlohmann::json j{{"seed", tb.seed},
                   {"accuracy", fu::lm::next_token_accuracy(p, tb.test)},
                   {"refset_median_exposure", scorer.median_reference_exposure()}};
  if (!tb.canary_samples.empty()) {
    const auto rep = fu::metrics::exposure_report(scorer, tb.distinct_canaries());
    j["canary_mean_exposure"] = rep.mean;
    for (std::size_t i = 0; i < rep.entries.size(); ++i)
      j["canary_exposure"].push_back(rep.entries[i].exposure);
  }
  return j;
}

fu::lm::ParamVector model_for(const harness::Testbed& tb, const harness::ExperimentConfig& c,
                              const std::string& checkpoint) {
  if (checkpoint.empty()) return harness::train_base(tb, c.train.epochs);
  auto ck = fu::lm::load_checkpoint(checkpoint);
  if (!fu::lm::same_layout(ck.params.layout(), fu::lm::make_layout(tb.model))) {
    fu::fail(fu::ErrorCode::kLayoutMismatch, "checkpoint does not match the configured model");
  }
  return ck.params;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale machine unlearning with inverse empirical Fisher curvature"};
  app.require_subcommand(1);
  Overrides o;
  std::string method, checkpoint, scenario_name, report_path, compare_path;

  auto* train = app.add_subcommand("train", "train the base model and save a checkpoint");
  add_common(train, o);

  auto* unl = app.add_subcommand("unlearn", "run unlearning cycles with one method");
  add_common(unl, o);
  unl->add_option("--method", method, "retrain | finetune | gradient_ascent | fisher_removal | "
                                       "fisher_forgetting")
      ->required();
  unl->add_option("--checkpoint", checkpoint, "start from this checkpoint instead of training");

  auto* eval = app.add_subcommand("eval", "accuracy and canary exposure of a checkpoint");
  add_common(eval, o);
  eval->add_option("--checkpoint", checkpoint, "checkpoint manifest")->required();

  auto* scen = app.add_subcommand("scenario", "run an experiment scenario");
  add_common(scen, o);
  scen->add_option("name", scenario_name, "cycles | extended | memorization | dp_tradeoff | onion")
      ->required();

  auto* rep = app.add_subcommand("report", "summarize a report CSV and its determinism digest");
  rep->add_option("csv", report_path, "report CSV")->required();
  rep->add_option("--compare", compare_path, "second CSV whose non-timing content must match");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*rep) {
      const auto a = harness::parse_csv(fu::io::read_text(report_path));
      nlohmann::json j{{"path", report_path},
                       {"rows", a.rows.size()},
                       {"columns", a.columns},
                       {"determinism_digest", harness::determinism_digest(a)}};
      int code = 0;
      if (!compare_path.empty()) {
        const auto b = harness::parse_csv(fu::io::read_text(compare_path));
        const bool same = harness::determinism_digest(a) == harness::determinism_digest(b);
        j["matches"] = same;
        code = same ? 0 : 1;
      }
      std::cout << j.dump(2) << '\n';
      return code;
    }

    harness::ExperimentConfig cfg = resolve(o);
    if (*scen) cfg.scenario = scenario_name;
    cfg.validate();
    const std::filesystem::path out = cfg.output_dir;
    const auto progress = progress_for(o);

    if (*scen) {
      const auto res = harness::run_scenario(cfg, progress);
      harness::write_scenario(cfg, res, out);
      std::cout << nlohmann::json{{"scenario", res.scenario},
                                  {"rows", res.table.rows.size()},
                                  {"output_dir", out.string()},
                                  {"config_hash", harness::config_hash_hex(cfg)},
                                  {"determinism_digest", harness::determinism_digest(res.table)}}
                       .dump(2)
                << '\n';
      return 0;
    }

    const std::uint64_t seed = cfg.seeds.front();
    const harness::Testbed tb = harness::make_testbed(cfg, seed);

    if (*train) {
      progress("training seed ", seed, " on ", tb.train.size(), " samples");
      const auto p = harness::train_base(tb, cfg.train.epochs);
      const auto path = out / ("model_seed" + std::to_string(seed) + ".manifest");
      fu::lm::save_checkpoint(path, tb.model, p);
      auto j = evaluate(tb, p);
      j["checkpoint"] = path.string();
      j["config_hash"] = harness::config_hash_hex(cfg);
      std::cout << j.dump(2) << '\n';
      return 0;
    }

    if (*eval) {
      auto j = evaluate(tb, model_for(tb, cfg, checkpoint));
      j["checkpoint"] = checkpoint;
      std::cout << j.dump(2) << '\n';
      return 0;
    }

    // unlearn
    const auto id = fu::unlearn::parse_method(method);
    const auto theta0 = model_for(tb, cfg, checkpoint);
    fu::unlearn::ForgetCache cache(cfg.cache_size);
    const fu::unlearn::CycleInputs in{theta0, tb.train, tb.forget_stream, tb.test, tb.refset};
    fu::lm::ParamVector after = theta0;
    progress("unlearning with ", method, " for ", cfg.cycles, " cycles");
    const auto reports =
        fu::unlearn::run_unlearning_cycles(in, cache, id, cfg.cycles, tb.settings, &after);
    harness::Table t = harness::cycle_table();
    const std::string hash = harness::config_hash_hex(cfg);
    for (const auto& r : reports)
      t.add({hash, seed, r.method, std::uint64_t{r.cycle}, std::uint64_t{r.t}, std::uint64_t{r.r},
             std::uint64_t{r.forget_batches}, std::uint64_t{r.cumulative}, r.acc_before,
             r.acc_after, r.delta_acc, r.delta_exp, std::numeric_limits<double>::quiet_NaN(),
             r.timings.gradient_s, r.timings.fisher_s, r.timings.update_s, r.timings.eval_s});
    harness::emit_report(t, harness::ReportFormat::kCsv, out / ("unlearn_" + method + ".csv"));
    const auto path = out / ("unlearned_" + method + "_seed" + std::to_string(seed) + ".manifest");
    fu::lm::save_checkpoint(path, tb.model, after);
    auto j = evaluate(tb, after);
    j["checkpoint"] = path.string();
    j["cycles"] = reports.size();
    std::cout << j.dump(2) << '\n';
    return 0;
  } catch (const fu::Error& e) {
    std::cerr << "error [" << fu::error_code_name(e.code()) << "]: " << e.what() << '\n';
    return 2;
  }
}
