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

// Acceptance run: one PASS/FAIL line per criterion 1-12. Tolerances, seed
// counts and wall-clock budgets are fixed below; the desk experiments read
// configs/desk.json from the source tree unless --config says otherwise.
//
//   acceptance [--only 6,9] [--config path] [--verbose]
//
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fisher_unlearn.hpp"
#include "oracles.hpp"

namespace fu = fisher_unlearn;
namespace h = fisher_unlearn::harness;
using fu::lm::ParamVector;
using fu::numerics::Rng;

namespace {

// Pinned tolerances.
constexpr double kOracleTol = 1e-8;        // 1
constexpr double kBlockTol = 1e-10;        // 2
constexpr double kFdStep = 1e-5;           // 3
constexpr double kFdTol = 1e-5;            // 3
constexpr double kFdFloor = 1e-3;          // 3: denominator floor for near-zero partials
constexpr std::size_t kFdCoords = 50;      // 3: per seed
constexpr std::size_t kNoiseApps = 16;     // 4
constexpr std::size_t kNoiseCoords = 10000;// 4
constexpr double kNoiseBand = 0.10;        // 4
constexpr std::size_t kSeedQuorum = 4;     // 6, 7, 9: out of 5 seeds
constexpr double kFinalAccBand = 3.0;      // 7: percentage points
constexpr std::size_t kDpSeeds = 3;        // 11
constexpr double kDpPairShare = 0.80;      // 11

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

h::ExperimentConfig g_base;
h::Progress g_progress;

h::ExperimentConfig desk(const std::string& scenario, std::vector<std::string> methods) {
  h::ExperimentConfig c = g_base;
  c.scenario = scenario;
  c.methods = std::move(methods);
  return c;
}

// Per (seed, method) rows of a cycles table, in cycle order.
using RowIndex = std::map<std::pair<std::uint64_t, std::string>, std::vector<std::size_t>>;

RowIndex index_rows(const h::Table& t) {
  RowIndex out;
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    out[{static_cast<std::uint64_t>(t.number(i, "seed")), t.text(i, "method")}].push_back(i);
  return out;
}

// --- 1 ---------------------------------------------------------------------

Outcome fisher_oracle() {
  double worst = 0.0;
  std::size_t cases = 0;
  Rng rng(11);
  for (std::size_t d : {8, 16, 32})
    for (double lambda : {0.5, 1.0, 4.0})
      for (std::size_t m : {4, 64}) {
        const auto grads = fu::testing::random_gradients(rng, m, d);
        const fu::fisher::FisherConfig cfg{lambda, m, 48};
        auto f = fu::fisher::init_inverse_fisher(fu::testing::flat_layout(d), cfg);
        for (const auto& g : grads) f.update(g, m);
        const auto oracle = fu::testing::dense_fisher_inverse(grads, lambda, m, 0, d);
        worst = std::max(worst, fu::numerics::relative_frobenius_error(
                                    f.layers()[0].blocks.at(0).inverse, oracle));
        ++cases;
      }
  return {worst <= kOracleTol, std::to_string(cases) + " cases, worst relative Frobenius error " +
                                   fmt(worst) + " (tol " + fmt(kOracleTol) + ")"};
}

// --- 2 ---------------------------------------------------------------------

Outcome block_restriction() {
  double worst = 0.0;
  std::size_t blocks = 0;
  Rng rng(12);
  const std::size_t m = 32;
  for (std::size_t d : {50, 100})
    for (std::size_t width : {6, 16, 48})
      for (double lambda : {0.5, 1.0, 4.0}) {
        const auto grads = fu::testing::random_gradients(rng, m, d);
        const fu::fisher::FisherConfig cfg{lambda, m, width};
        auto f = fu::fisher::init_inverse_fisher(fu::testing::flat_layout(d), cfg);
        for (const auto& g : grads) f.update(g, m);
        for (const auto& b : f.layers()[0].blocks) {
          const auto oracle = fu::testing::dense_recursion(grads, lambda, m, b.offset, b.width());
          worst = std::max(worst, fu::numerics::relative_frobenius_error(b.inverse, oracle));
          ++blocks;
        }
      }
  return {worst <= kBlockTol, std::to_string(blocks) + " blocks, worst relative error " +
                                  fmt(worst) + " (tol " + fmt(kBlockTol) + ")"};
}

// --- 3 ---------------------------------------------------------------------

Outcome gradient_check() {
  const auto data = h::load_corpus(g_base.corpus.path, g_base.corpus, std::nullopt, 0);
  const auto samples = fu::lm::chunk_samples(data.corpus, fu::lm::Split::kTrain,
                                             g_base.corpus.sample_len);
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    fu::lm::ModelConfig mc = g_base.model;
    mc.seed = seed;
    ParamVector p = fu::lm::init_params(mc);
    Rng rng(100 + seed);
    std::vector<fu::lm::Sample> picked;
    for (int k = 0; k < 4; ++k) picked.push_back(samples[rng.uniform_index(samples.size())]);
    fu::lm::Batch batch;
    batch.context_len = mc.context_len;
    for (const auto& s : picked) fu::lm::append_examples(batch, s.tokens, mc.pad_id());
    const auto g = fu::lm::backward(p, batch);
    for (std::size_t trial = 0; trial < kFdCoords; ++trial) {
      const std::size_t i = rng.uniform_index(p.size());
      const double keep = p.values()[i];
      p.values()[i] = keep + kFdStep;
      const double up = fu::lm::forward_loss(p, batch).loss;
      p.values()[i] = keep - kFdStep;
      const double down = fu::lm::forward_loss(p, batch).loss;
      p.values()[i] = keep;
      const double fd = (up - down) / (2.0 * kFdStep);
      const double scale = std::max({std::abs(fd), std::abs(g.values[i]), kFdFloor});
      worst = std::max(worst, std::abs(fd - g.values[i]) / scale);
      ++checked;
    }
  }
  return {worst <= kFdTol && checked >= 3 * kFdCoords,
          std::to_string(checked) + " coordinates over 3 seeds, worst relative error " +
              fmt(worst) + " (tol " + fmt(kFdTol) + ")"};
}

// --- 4 ---------------------------------------------------------------------

Outcome noise_law() {
  const fu::lm::ModelConfig mc = g_base.model;
  const ParamVector zero(fu::lm::make_layout(mc));
  if (zero.size() < kNoiseCoords) return {false, "model has fewer than 10^4 parameters"};
  fu::lm::Batch b;
  b.context_len = mc.context_len;
  b.add(std::vector<fu::lm::TokenId>(mc.context_len, 1), 2);
  fu::unlearn::UnlearnConfig cfg;  // mu = sigma = 1e-3, lambda = 1
  const auto curvature = fu::unlearn::identity_curvature(cfg.fisher);
  Rng rng(4);
  ParamVector theta = zero;
  for (std::size_t k = 0; k < kNoiseApps; ++k)
    theta = fu::unlearn::fisher_forgetting(theta, {b}, curvature, cfg, rng);
  double ss = 0.0;
  for (std::size_t i = 0; i < kNoiseCoords; ++i) ss += theta.values()[i] * theta.values()[i];
  const double measured = std::sqrt(ss / static_cast<double>(kNoiseCoords));
  const double expected = std::sqrt(static_cast<double>(kNoiseApps)) * cfg.noise_scale() *
                          std::pow(1.0 / cfg.fisher.lambda, 0.25);
  const double rel = std::abs(measured - expected) / expected;
  return {rel <= kNoiseBand, "std " + fmt(measured) + " vs " + fmt(expected) +
                                 " expected, relative gap " + fmt(rel, 3)};
}

// --- 5 ---------------------------------------------------------------------

Outcome reduction_identity() {
  const fu::lm::ModelConfig mc = g_base.model;
  const auto data = h::load_corpus(g_base.corpus.path, g_base.corpus, std::nullopt, 0);
  const auto samples = fu::lm::chunk_samples(data.corpus, fu::lm::Split::kTrain,
                                             g_base.corpus.sample_len);
  const std::vector<fu::lm::Sample> forget(samples.begin(), samples.begin() + 24);
  const auto batches = fu::unlearn::forget_batches(forget, 8, fu::lm::ModelDims::of(*fu::lm::make_layout(mc)));
  std::size_t identical = 0, total = 0;
  for (double step : {1e-3, 5e-5, 0.2}) {
    const ParamVector p = fu::lm::init_params(mc);
    fu::fisher::FisherConfig fc;
    fc.lambda = 1.0;
    const auto fr = fu::unlearn::fisher_removal(p, batches, fu::unlearn::identity_curvature(fc),
                                                step);
    const auto ga = fu::unlearn::gradient_ascent(p, batches, step);
    identical += fr == ga ? 1 : 0;
    ++total;
  }
  return {identical == total, std::to_string(identical) + "/" + std::to_string(total) +
                                  " step sizes bit-identical over 3 forget batches"};
}

// --- 6 ---------------------------------------------------------------------

Outcome erasure_ordering() {
  // Cycle 1 drains exactly the canary occurrences (cache size = count * reps).
  auto cfg = desk("cycles", {"finetune", "fisher_removal", "fisher_forgetting"});
  const auto res = h::scenario_cycles(cfg, 1, g_progress);
  const auto rows = index_rows(res.table);
  std::size_t fr_lt_ff = 0, ff_le_0 = 0, fr_lt_ft = 0;
  std::ostringstream per;
  for (std::uint64_t seed : cfg.seeds) {
    auto dexp = [&](const char* m) {
      return res.table.number(rows.at({seed, m}).front(), "delta_exp");
    };
    const double ft = dexp("finetune"), fr = dexp("fisher_removal"), ff = dexp("fisher_forgetting");
    fr_lt_ff += fr < ff;
    ff_le_0 += ff <= 0.0;
    fr_lt_ft += fr < ft;
    per << " s" << seed << "[FR " << fmt(fr, 3) << " FF " << fmt(ff, 3) << " FT " << fmt(ft, 3) << "]";
  }
  const bool pass = fr_lt_ff >= kSeedQuorum && ff_le_0 >= kSeedQuorum && fr_lt_ft >= kSeedQuorum;
  return {pass, "FR<FF " + std::to_string(fr_lt_ff) + "/5, FF<=0 " + std::to_string(ff_le_0) +
                    "/5, FR<FT " + std::to_string(fr_lt_ft) + "/5;" + per.str()};
}

// --- 7 ---------------------------------------------------------------------

Outcome fidelity_ordering() {
  auto cfg = desk("extended", {"finetune", "gradient_ascent", "fisher_forgetting"});
  const auto res = h::scenario_cycles(cfg, h::kExtendedCycles, g_progress);
  const auto rows = index_rows(res.table);
  std::size_t ff_gt_ga = 0;
  double final_ff = 0.0, final_ft = 0.0;
  std::ostringstream per;
  for (std::uint64_t seed : cfg.seeds) {
    auto mean_dacc = [&](const char* m) {
      double s = 0.0;
      for (std::size_t i : rows.at({seed, m})) s += res.table.number(i, "delta_acc");
      return s / static_cast<double>(rows.at({seed, m}).size());
    };
    auto final_acc = [&](const char* m) {
      return 100.0 * res.table.number(rows.at({seed, m}).back(), "acc_after");
    };
    const double ff = mean_dacc("fisher_forgetting"), ga = mean_dacc("gradient_ascent");
    ff_gt_ga += ff > ga;
    final_ff += final_acc("fisher_forgetting");
    final_ft += final_acc("finetune");
    per << " s" << seed << "[FF " << fmt(ff, 3) << " GA " << fmt(ga, 3) << "]";
  }
  final_ff /= static_cast<double>(cfg.seeds.size());
  final_ft /= static_cast<double>(cfg.seeds.size());
  const double gap = std::abs(final_ff - final_ft);
  return {ff_gt_ga >= kSeedQuorum && gap <= kFinalAccBand,
          "mean dacc FF>GA " + std::to_string(ff_gt_ga) + "/5, final acc FF " + fmt(final_ff) +
              "% vs FT " + fmt(final_ft) + "% (gap " + fmt(gap, 3) + " pp);" + per.str()};
}

// --- 8 ---------------------------------------------------------------------

Outcome gold_standard() {
  auto cfg = desk("memorization", {"retrain"});
  const auto res = h::scenario_memorization(cfg, g_progress);
  std::size_t ok = 0, seeds = 0;
  std::ostringstream per;
  for (std::size_t i = 0; i < res.table.rows.size(); ++i) {
    const std::string method = res.table.text(i, "method");
    const auto seed = static_cast<std::uint64_t>(res.table.number(i, "seed"));
    const double memorized = res.table.number(i, "canary_memorized");
    if (method == "none") {
      per << " s" << seed << "[base memorized " << memorized << "/"
          << res.table.number(i, "canary_total");
      continue;
    }
    const double mx = res.table.number(i, "canary_max_exposure");
    const double med = res.table.number(i, "refset_median_exposure");
    ++seeds;
    ok += memorized == 0.0 && mx <= med;
    per << ", retrain " << memorized << ", max exp " << fmt(mx, 3) << " <= median " << fmt(med, 3)
        << "]";
  }
  return {seeds == cfg.seeds.size() && ok == seeds,
          std::to_string(ok) + "/" + std::to_string(seeds) + " seeds clean;" + per.str()};
}

// --- 9 ---------------------------------------------------------------------

Outcome kl_ordering() {
  auto cfg = desk("cycles", {"retrain", "gradient_ascent", "fisher_removal"});
  const auto res = h::scenario_cycles(cfg, cfg.cycles, g_progress);
  const auto rows = index_rows(res.table);
  std::size_t ordered = 0;
  std::ostringstream per;
  for (std::uint64_t seed : cfg.seeds) {
    auto kl = [&](const char* m) {
      return res.table.number(rows.at({seed, m}).back(), "kl_vs_retrain");
    };
    const double ga = kl("gradient_ascent"), fr = kl("fisher_removal");
    ordered += ga > fr;
    per << " s" << seed << "[GA " << fmt(ga, 3) << " FR " << fmt(fr, 3) << "]";
  }
  return {ordered >= kSeedQuorum, "KL(GA) > KL(FR) at cycle " + std::to_string(cfg.cycles) + " on " +
                                      std::to_string(ordered) + "/5 seeds;" + per.str()};
}

// --- 10 --------------------------------------------------------------------

Outcome complexity_ordering() {
  auto cfg = desk("cycles", {"retrain", "gradient_ascent", "fisher_removal"});
  const std::uint64_t seed = cfg.seeds.front();
  const auto tb = h::make_testbed(cfg, seed);
  g_progress("seed ", seed, ": base model for the runtime sweep");
  const ParamVector theta0 = h::train_base(tb, cfg.train.epochs);
  const std::size_t n_max = tb.forget_stream.size();
  std::vector<std::size_t> n_grid;
  for (std::size_t k = 1; k <= 4; ++k) n_grid.push_back(n_max * k / 4);
  const auto reports = h::runtime_sweep(cfg, tb, theta0, {8, 16, 32, 64}, n_grid, g_progress);
  const auto s = fu::metrics::runtime_ledger(reports, cfg.unlearn.fisher.m);
  const auto& rt = s.methods.at("retrain");
  const auto& ga = s.methods.at("gradient_ascent");
  const bool pass = s.retrain_grows_with_r && s.ascent_grows_with_t && s.ascent_flat_in_r &&
                    s.fisher_matches_cost_model;
  return {pass, "retrain growth_r " + fmt(rt.growth_r, 3) + ", ascent growth_t " +
                    fmt(ga.growth_t, 3) + " growth_r " + fmt(ga.growth_r, 3) +
                    ", fisher cost ratio " + fmt(s.fisher_cost_ratio, 3) + " (band 1/3..3), " +
                    std::to_string(reports.size()) + " cycles"};
}

// --- 11 --------------------------------------------------------------------

Outcome dp_trend() {
  auto cfg = desk("dp_tradeoff", {"retrain"});
  cfg.seeds.resize(std::min(cfg.seeds.size(), kDpSeeds));
  // Only the DP-SGD rows matter here; one point per unlearning grid.
  cfg.grids.ascent_lr = {cfg.unlearn.ascent_lr};
  cfg.grids.gamma = {cfg.unlearn.gamma};
  cfg.grids.mu = {cfg.unlearn.mu};
  const auto res = h::scenario_dp_tradeoff(cfg, g_progress);
  double exp_share = 0.0, acc_share = 0.0;
  std::ostringstream per;
  for (std::uint64_t seed : cfg.seeds) {
    std::vector<std::pair<double, std::pair<double, double>>> pts;  // z -> (exposure, accuracy)
    for (std::size_t i = 0; i < res.table.rows.size(); ++i)
      if (res.table.number(i, "seed") == static_cast<double>(seed) &&
          res.table.text(i, "method") == "dp_sgd")
        pts.push_back({res.table.number(i, "knob"),
                       {res.table.number(i, "exposure"), res.table.number(i, "accuracy")}});
    std::sort(pts.begin(), pts.end());
    std::size_t e_ok = 0, a_ok = 0;
    per << " s" << seed << "[";
    for (std::size_t k = 0; k < pts.size(); ++k) {
      per << (k ? " " : "") << "z" << fmt(pts[k].first, 3) << ":" << fmt(pts[k].second.first, 3)
          << "/" << fmt(pts[k].second.second, 3);
      if (k == 0) continue;
      e_ok += pts[k].second.first <= pts[k - 1].second.first;
      a_ok += pts[k].second.second <= pts[k - 1].second.second;
    }
    per << "]";
    const double pairs = static_cast<double>(pts.size() - 1);
    exp_share += static_cast<double>(e_ok) / pairs;
    acc_share += static_cast<double>(a_ok) / pairs;
  }
  exp_share /= static_cast<double>(cfg.seeds.size());
  acc_share /= static_cast<double>(cfg.seeds.size());
  return {cfg.grids.noise.size() >= 2 && exp_share >= kDpPairShare && acc_share >= kDpPairShare,
          "non-increasing pairs: exposure " + fmt(exp_share, 3) + ", accuracy " +
              fmt(acc_share, 3) + " (need " + fmt(kDpPairShare, 2) + "); exposure/accuracy" +
              per.str()};
}

// --- 12 --------------------------------------------------------------------

Outcome determinism() {
  auto cfg = h::load_config(fu::testing::source_dir() / "configs" / "smoke.json");
  cfg.corpus.path = g_base.corpus.path;
  const auto root = std::filesystem::temp_directory_path() / "fisher_unlearn_acceptance";
  std::size_t same = 0, total = 0;
  std::string bad;
  for (auto name : h::kScenarios) {
    cfg.scenario = std::string(name);
    std::string digest[2], manifest[2];
    for (int run = 0; run < 2; ++run) {
      const auto dir = root / ("run" + std::to_string(run)) / cfg.scenario;
      std::filesystem::create_directories(dir);
      h::write_scenario(cfg, h::run_scenario(cfg), dir);
      digest[run] = h::determinism_digest(
          h::parse_csv(fu::io::read_text(dir / (cfg.scenario + ".csv"))));
      manifest[run] = fu::io::read_text(dir / "manifest.json");
    }
    ++total;
    if (digest[0] == digest[1] && manifest[0] == manifest[1]) ++same;
    else bad += " " + cfg.scenario;
  }
  std::filesystem::remove_all(root);
  return {same == total, std::to_string(same) + "/" + std::to_string(total) +
                             " scenarios reproduce byte-identical non-timing output" +
                             (bad.empty() ? "" : "; differing:" + bad)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fisher-unlearn acceptance criteria"};
  std::string config = (fu::testing::source_dir() / "configs" / "desk.json").string();
  std::vector<int> only;
  bool verbose = false;
  app.add_option("--config", config, "desk experiment config");
  app.add_option("--only", only, "criterion ids to run")->delimiter(',');
  app.add_flag("--verbose", verbose, "print scenario progress");
  CLI11_PARSE(app, argc, argv);

  try {
    g_base = h::load_config(config);
    g_base.corpus.path = (fu::testing::source_dir() / "data" / "desk_corpus.txt").string();
  } catch (const fu::Error& e) {
    std::cerr << "config: " << e.what() << '\n';
    return 2;
  }
  if (verbose) g_progress.out = &std::cerr;

  const std::vector<Criterion> criteria = {
      {1, "fisher oracle equivalence", 5, fisher_oracle},
      {2, "block restriction", 5, block_restriction},
      {3, "gradient vs finite differences", 10, gradient_check},
      {4, "fisher forgetting noise law", 10, noise_law},
      {5, "removal reduces to ascent", 5, reduction_identity},
      {6, "erasure ordering", 15 * 60, erasure_ordering},
      {7, "fidelity ordering", 30 * 60, fidelity_ordering},
      {8, "retraining gold standard", 10 * 60, gold_standard},
      {9, "weight-distribution KL ordering", 10 * 60, kl_ordering},
      {10, "complexity ordering", 20 * 60, complexity_ordering},
      {11, "dp trade-off trend", 20 * 60, dp_trend},
      {12, "determinism", 0, determinism},
  };

  std::size_t failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double elapsed = seconds_since(t0);
    const bool in_budget = c.budget_s <= 0 || elapsed <= c.budget_s;
    const bool pass = out.pass && in_budget;
    failed += pass ? 0 : 1;
    std::cout << "criterion " << std::setw(2) << c.id << ' ' << (pass ? "PASS" : "FAIL") << "  "
              << c.name << ": " << out.detail << "  [" << fmt(elapsed, 3) << " s";
    if (c.budget_s > 0) std::cout << " / budget " << fmt(c.budget_s, 4) << " s";
    if (!in_budget) std::cout << ", over budget";
    std::cout << "]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
