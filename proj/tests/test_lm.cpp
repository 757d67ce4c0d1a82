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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fisher_unlearn/lm/checkpoint.hpp"
#include "fisher_unlearn/lm/corpus.hpp"
#include "fisher_unlearn/lm/model.hpp"
#include "fisher_unlearn/lm/tokenizer.hpp"
#include "fisher_unlearn/lm/train.hpp"

namespace fisher_unlearn::lm {
namespace {

ModelConfig small_config(std::uint64_t seed = 1) {
  ModelConfig c;
  c.context_len = 3;
  c.embed_dim = 4;
  c.hidden_dim = 6;
  c.seed = seed;
  return c;
}

Sequence random_sequence(numerics::Rng& rng, std::size_t n) {
  Sequence s(n);
  for (auto& t : s) t = static_cast<TokenId>(rng.uniform_index(tokenizer::kPadId));
  return s;
}

Batch random_batch(const ModelConfig& c, numerics::Rng& rng, std::size_t seqs, std::size_t len) {
  std::vector<Sequence> v;
  for (std::size_t i = 0; i < seqs; ++i) v.push_back(random_sequence(rng, len));
  return make_batch(v, c.context_len, c.pad_id());
}

// Straight-line forward pass written from the layer definitions.
double oracle_loss(const ParamVector& p, const ModelConfig& c, const Batch& b) {
  const auto E = p.layer(layer_names::kEmbed), W1 = p.layer(layer_names::kHiddenWeight),
             B1 = p.layer(layer_names::kHiddenBias), W2 = p.layer(layer_names::kOutputWeight),
             B2 = p.layer(layer_names::kOutputBias);
  const std::size_t V = c.vocab_size, C = c.context_len, D = c.embed_dim, H = c.hidden_dim;
  long double total = 0.0L;
  for (std::size_t i = 0; i < b.size(); ++i) {
    std::vector<long double> x;
    for (std::size_t k = 0; k < C; ++k)
      for (std::size_t e = 0; e < D; ++e) x.push_back(E[b.context(i)[k] * D + e]);
    std::vector<long double> h(H);
    for (std::size_t j = 0; j < H; ++j) {
      long double s = B1[j];
      for (std::size_t k = 0; k < C * D; ++k) s += W1[j * C * D + k] * x[k];
      h[j] = std::tanh(s);
    }
    std::vector<long double> z(V);
    for (std::size_t o = 0; o < V; ++o) {
      long double s = B2[o];
      for (std::size_t j = 0; j < H; ++j) s += W2[o * H + j] * h[j];
      z[o] = s;
    }
    long double norm = 0.0L;
    for (auto v : z) norm += std::exp(v);
    total += std::log(norm) - z[b.targets[i]];
  }
  return static_cast<double>(total / b.size());
}

TEST(Tokenizer, Empty) { EXPECT_TRUE(tokenizer::tokenize("").empty()); }

TEST(Tokenizer, DistinctSymbols) {
  const auto ids = tokenizer::tokenize("ab");
  ASSERT_EQ(ids.size(), 2u);
  EXPECT_NE(ids[0], ids[1]);
}

TEST(Tokenizer, CaseFoldsAndUnknownsShareAnId) {
  EXPECT_EQ(tokenizer::tokenize("A"), tokenizer::tokenize("a"));
  EXPECT_EQ(tokenizer::token_of(0x80), tokenizer::kOtherId);
  EXPECT_EQ(tokenizer::token_of(0x01), tokenizer::kOtherId);
}

TEST(Tokenizer, RoundTripEqualsFold) {
  numerics::Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    std::string s(rng.uniform_index(40), '\0');
    for (char& ch : s) ch = static_cast<char>(rng.uniform_index(256));
    const std::string folded = tokenizer::fold(s);
    ASSERT_EQ(tokenizer::detokenize(tokenizer::tokenize(s)), folded);
    ASSERT_EQ(tokenizer::fold(folded), folded);
  }
}

TEST(Layout, ContiguousAndDeskSized) {
  ModelConfig c;
  const auto layout = make_layout(c);
  std::size_t offset = 0;
  for (const auto& e : layout->entries()) {
    EXPECT_EQ(e.offset, offset);
    offset += e.size();
  }
  EXPECT_EQ(offset, layout->total());
  EXPECT_GE(layout->total(), 5000u);
  EXPECT_LE(layout->total(), 50000u);
  EXPECT_EQ(layout->total(), c.parameter_count());
}

TEST(Layout, ZeroDimensionRejected) {
  ModelConfig c;
  c.hidden_dim = 0;
  EXPECT_THROW(make_layout(c), Error);
}

TEST(ForwardLoss, UniformLogitsGiveLogVocab) {
  const ModelConfig c = small_config();
  const ParamVector zero(make_layout(c));
  numerics::Rng rng(1);
  const Batch b = random_batch(c, rng, 3, 10);
  EXPECT_DOUBLE_EQ(forward_loss(zero, b).loss, std::log(64.0));
}

TEST(ForwardLoss, DuplicatedExampleSameLoss) {
  const ModelConfig c = small_config();
  const ParamVector p = init_params(c);
  Batch one;
  one.context_len = c.context_len;
  const std::vector<TokenId> ctx{1, 2, 3};
  one.add(ctx, 4);
  Batch two = one;
  two.add(ctx, 4);
  EXPECT_DOUBLE_EQ(forward_loss(p, one).loss, forward_loss(p, two).loss);
}

TEST(ForwardLoss, MatchesStraightLineOracle) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const ModelConfig c = small_config(seed);
    const ParamVector p = init_params(c);
    numerics::Rng rng(seed + 100);
    const Batch b = random_batch(c, rng, 4, 12);
    EXPECT_NEAR(forward_loss(p, b).loss, oracle_loss(p, c, b), 1e-12);
  }
}

TEST(ForwardLoss, ContextLengthMismatchThrows) {
  const ModelConfig c = small_config();
  const ParamVector p = init_params(c);
  Batch b;
  b.context_len = 2;
  b.add(std::vector<TokenId>{1, 2}, 3);
  EXPECT_THROW(forward_loss(p, b), Error);
}

TEST(Backward, UnusedEmbeddingRowIsZero) {
  const ModelConfig c = small_config();
  const ParamVector p = init_params(c);
  const Batch b = make_batch(std::vector<Sequence>{tokenizer::tokenize("abcabcab")},
                             c.context_len, c.pad_id());
  const GradSample g = backward(p, b);
  const auto& e = p.layout()->at(layer_names::kEmbed);
  const TokenId absent = tokenizer::token_of('z');
  for (std::size_t k = 0; k < c.embed_dim; ++k)
    EXPECT_EQ(g.values[e.offset + absent * c.embed_dim + k], 0.0);
}

TEST(Backward, CentralDifferences) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const ModelConfig c = small_config(seed);
    ParamVector p = init_params(c);
    numerics::Rng rng(seed * 7);
    const Batch b = random_batch(c, rng, 3, 10);
    const GradSample g = backward(p, b);
    int checked = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t i = rng.uniform_index(p.size());
      const double keep = p.values()[i];
      p.values()[i] = keep + 1e-5;
      const double up = forward_loss(p, b).loss;
      p.values()[i] = keep - 1e-5;
      const double down = forward_loss(p, b).loss;
      p.values()[i] = keep;
      const double fd = (up - down) / 2e-5;
      const double scale = std::max({std::abs(fd), std::abs(g.values[i]), 1e-3});
      EXPECT_LE(std::abs(fd - g.values[i]) / scale, 1e-5) << "coordinate " << i;
      ++checked;
    }
    EXPECT_EQ(checked, 50);
  }
}

TEST(Backward, UnionIsSizeWeightedMean) {
  const ModelConfig c = small_config();
  const ParamVector p = init_params(c);
  numerics::Rng rng(8);
  const Batch b1 = random_batch(c, rng, 2, 9);
  const Batch b2 = random_batch(c, rng, 1, 5);
  Batch both = b1;
  both.append(b2);
  const auto g1 = backward(p, b1), g2 = backward(p, b2), g = backward(p, both);
  const double n1 = b1.size(), n2 = b2.size();
  for (std::size_t i = 0; i < g.values.size(); ++i)
    ASSERT_NEAR(g.values[i], (n1 * g1.values[i] + n2 * g2.values[i]) / (n1 + n2), 1e-12);
}

TEST(SgdTrain, ZeroEpochsIsNoOp) {
  const ModelConfig c = small_config();
  const ParamVector p = init_params(c);
  numerics::Rng rng(1);
  std::vector<Sequence> data{tokenizer::tokenize("hello world")};
  EXPECT_EQ(sgd_train(p, data, TrainOptions{0, 0.5, 4}, rng), p);
}

TEST(SgdTrain, SeedDeterminism) {
  const ModelConfig c = small_config();
  const ParamVector p = init_params(c);
  std::vector<Sequence> data;
  numerics::Rng gen(3);
  for (int i = 0; i < 20; ++i) data.push_back(random_sequence(gen, 16));
  numerics::Rng a(5), b(5);
  EXPECT_EQ(sgd_train(p, data, TrainOptions{2, 0.3, 4}, a),
            sgd_train(p, data, TrainOptions{2, 0.3, 4}, b));
}

TEST(SgdTrain, DescentOnSmallCorpus) {
  const ModelConfig c = small_config();
  const ParamVector p = init_params(c);
  std::vector<Sequence> data;
  for (int i = 0; i < 20; ++i) data.push_back(tokenizer::tokenize("the cat sat on the mat. "));
  const Batch all = make_batch(data, c.context_len, c.pad_id());
  numerics::Rng rng(2);
  const ParamVector trained = sgd_train(p, data, TrainOptions{5, 0.5, 4}, rng);
  EXPECT_LT(forward_loss(trained, all).loss, forward_loss(p, all).loss);
  EXPECT_TRUE(trained.finite());
}

TEST(SgdTrain, EmptyAndBadRateThrow) {
  const ModelConfig c = small_config();
  const ParamVector p = init_params(c);
  numerics::Rng rng(2);
  EXPECT_THROW(sgd_train(p, std::vector<Sequence>{}, TrainOptions{}, rng), Error);
  EXPECT_THROW(sgd_train(p, std::vector<Sequence>{{1, 2}}, TrainOptions{1, 0.0, 1}, rng), Error);
}

TEST(DpSgd, NoNoiseUnclippedEqualsSgd) {
  const ModelConfig c = small_config();
  const ParamVector p = init_params(c);
  const std::vector<Sequence> lot{tokenizer::tokenize("abcd"), tokenizer::tokenize("efgh")};
  DpConfig dp;
  dp.clip_norm = 1e6;
  numerics::Rng rng(1);
  const ParamVector dp_out = dp_sgd_step(p, lot, dp, 0.1, rng);
  // The DP unit is the sample: equal-weight mean of per-sample mean gradients.
  ParamVector expected = p;
  for (const auto& s : lot) {
    const auto g = backward(p, make_batch(std::vector<Sequence>{s}, c.context_len, c.pad_id()));
    numerics::axpy(-0.1 / lot.size(), g.values, expected.values());
  }
  for (std::size_t i = 0; i < p.size(); ++i)
    ASSERT_NEAR(dp_out.values()[i], expected.values()[i], 1e-15);
}

TEST(DpSgd, ClipToBoundary) {
  const ModelConfig c = small_config();
  const ParamVector p = init_params(c);
  const std::vector<Sequence> lot{tokenizer::tokenize("hello")};
  const auto g = backward(p, make_batch(lot, c.context_len, c.pad_id()));
  DpConfig dp;
  dp.clip_norm = 0.5 * numerics::l2_norm(g.values);  // ||g|| = 2C
  numerics::Rng rng(1);
  const ParamVector out = dp_sgd_step(p, lot, dp, 1.0, rng);
  std::vector<double> step(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) step[i] = p.values()[i] - out.values()[i];
  EXPECT_NEAR(numerics::l2_norm(step), dp.clip_norm, 1e-12);
}

TEST(DpSgd, NoiseScale) {
  const ModelConfig c = small_config();
  const ParamVector p = init_params(c);
  std::vector<Sequence> lot;
  for (int i = 0; i < 8; ++i) lot.push_back(tokenizer::tokenize("sample " + std::to_string(i)));
  DpConfig clean, noisy;
  noisy.noise_multiplier = 1.0;
  numerics::Rng rng(4);
  const double lr = 0.1;
  const ParamVector base = dp_sgd_step(p, lot, clean, lr, rng);
  const std::size_t steps = 200;
  double ss = 0.0;
  std::size_t n = 0;
  for (std::size_t s = 0; s < steps; ++s) {
    const ParamVector out = dp_sgd_step(p, lot, noisy, lr, rng);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = out.values()[i] - base.values()[i];
      ss += d * d;
      ++n;
    }
  }
  const double expected = 1.0 * 1.0 / 8.0 * lr;
  EXPECT_NEAR(std::sqrt(ss / n), expected, 0.1 * expected);
}

TEST(DpSgd, EmptyLotThrows) {
  const ModelConfig c = small_config();
  numerics::Rng rng(1);
  EXPECT_THROW(dp_sgd_step(init_params(c), std::vector<Sequence>{}, DpConfig{}, 0.1, rng), Error);
}

TEST(Accuracy, MemorizedSequenceIsPerfect) {
  const ModelConfig c = small_config();
  const std::vector<Sequence> data{tokenizer::tokenize("abcdefgh")};
  numerics::Rng rng(3);
  const ParamVector p = sgd_train(init_params(c), data, TrainOptions{400, 0.5, 1}, rng);
  EXPECT_EQ(next_token_accuracy(p, make_batch(data, c.context_len, c.pad_id())), 1.0);
}

TEST(Accuracy, UniformLogitsPickTokenZero) {
  const ModelConfig c = small_config();
  const ParamVector zero(make_layout(c));
  const std::vector<Sequence> data{tokenizer::tokenize("a b c  d")};
  const Batch b = make_batch(data, c.context_len, c.pad_id());
  const double zeros = std::count(b.targets.begin(), b.targets.end(), TokenId{0});
  EXPECT_DOUBLE_EQ(next_token_accuracy(zero, b), zeros / b.size());
}

TEST(Accuracy, MatchesRecount) {
  const ModelConfig c = small_config();
  const ParamVector p = init_params(c);
  numerics::Rng rng(12);
  const Batch b = random_batch(c, rng, 10, 50);
  ASSERT_EQ(b.size(), 500u);
  const auto lp = forward_loss(p, b).log_probs;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto dist = next_token_log_probs(p, b.context(i));
    if (argmax_lowest(dist) == b.targets[i]) ++hits;
    ASSERT_NEAR(dist[b.targets[i]], lp[i], 1e-12);
  }
  EXPECT_DOUBLE_EQ(next_token_accuracy(p, b), static_cast<double>(hits) / 500.0);
}

TEST(SequenceLogLikelihood, UniformModel) {
  const ModelConfig c = small_config();
  const ParamVector zero(make_layout(c));
  EXPECT_NEAR(sequence_log_likelihood(zero, tokenizer::tokenize("anything here")),
              -std::log(64.0), 1e-12);
}

TEST(SequenceLogLikelihood, MatchesPerPositionRecomputation) {
  const ModelConfig c = small_config();
  const ParamVector p = init_params(c);
  const Sequence s = tokenizer::tokenize("the quick brown fox");
  double total = 0.0;
  std::vector<TokenId> window(c.context_len, c.pad_id());
  for (TokenId t : s) {
    Batch b;
    b.context_len = c.context_len;
    b.add(window, t);
    total -= forward_loss(p, b).loss;
    window.erase(window.begin());
    window.push_back(t);
  }
  EXPECT_NEAR(sequence_log_likelihood(p, s), total / s.size(), 1e-12);
}

TEST(SequenceLogLikelihood, MemorizedCanaryBeatsShuffle) {
  const ModelConfig c = small_config(4);
  const Sequence canary = tokenizer::tokenize("my pin is 31415926");
  std::vector<Sequence> data(8, canary);
  numerics::Rng rng(9);
  const ParamVector p = sgd_train(init_params(c), data, TrainOptions{20, 0.5, 2}, rng);
  Sequence shuffled = canary;
  rng.shuffle(shuffled);
  EXPECT_GT(sequence_log_likelihood(p, canary), sequence_log_likelihood(p, shuffled));
}

TEST(SequenceLogLikelihood, TooShortThrows) {
  const ModelConfig c = small_config();
  EXPECT_THROW(sequence_log_likelihood(init_params(c), tokenizer::tokenize("ab")), Error);
}

TEST(Corpus, ChunksDropTailAndCarryTags) {
  Corpus corpus;
  corpus.tokens = tokenizer::tokenize("abcdefghij");
  corpus.tags = {0, 0, 0, 2, 2, 2, 0, 0, 0, 0};
  corpus.train_end = 10;
  corpus.val_end = 10;
  const auto samples = chunk_samples(corpus, Split::kTrain, 3);
  ASSERT_EQ(samples.size(), 3u);
  EXPECT_EQ(samples[0].canary, 0);
  EXPECT_EQ(samples[1].canary, 2);
  EXPECT_EQ(samples[2].id, 2u);
}

TEST(Checkpoint, RoundTrip) {
  const ModelConfig c = small_config(6);
  const ParamVector p = init_params(c);
  const auto dir = std::filesystem::temp_directory_path() / "fu_test_checkpoint";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "m.manifest", c, p);
  const Checkpoint back = load_checkpoint(dir / "m.manifest");
  EXPECT_EQ(back.params, p);
  EXPECT_EQ(back.config.hidden_dim, c.hidden_dim);
  EXPECT_EQ(back.config.seed, c.seed);
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, MissingFileIsIoError) {
  try {
    load_checkpoint("/nonexistent/dir/model.manifest");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
  }
}

}  // namespace
}  // namespace fisher_unlearn::lm
