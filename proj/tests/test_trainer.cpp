#include <doctest.h>

#include <cmath>
#include <random>

#include "petrecon/adam.hpp"
#include "petrecon/trainer.hpp"

using namespace petrecon;
using namespace petrecon::nn;

namespace {

NetworkConfig toy_config() {
  NetworkConfig c;
  c.channels = {4, 8};
  c.convs_per_scale = 1;
  return c;
}

// Random 8x8 images; the input stack repeats the label in all five channels.
// White-noise images keep the output layer's features well conditioned.
std::vector<TrainingPair> identity_pairs(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<TrainingPair> pairs;
  for (int k = 0; k < count; ++k) {
    TrainingPair p{Tensor({1, 5, 8, 8}), Tensor({1, 1, 8, 8})};
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        const double v = u(rng);
        p.label.at(0, 0, y, x) = v;
        for (int ch = 0; ch < 5; ++ch) p.input.at(0, ch, y, x) = v;
      }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  auto w = init_weights(toy_config(), 1);
  const auto before = w;
  auto st = make_adam(w);
  std::vector<std::vector<double>> zero;
  for (const auto& b : w.blocks) zero.emplace_back(b.values.size(), 0.0);
  adam_step(st, w, zero);
  for (std::size_t b = 0; b < w.blocks.size(); ++b) CHECK(w.blocks[b].values == before.blocks[b].values);
}

TEST_CASE("adam: first step moves each trainable parameter by the learning rate") {
  auto w = init_weights(toy_config(), 1);
  const auto before = w;
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  auto st = make_adam(w, cfg);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<std::vector<double>> g;
  for (const auto& b : w.blocks) {
    g.emplace_back(b.values.size());
    for (auto& v : g.back()) v = n01(rng);
  }
  adam_step(st, w, g);
  for (std::size_t b = 0; b < w.blocks.size(); ++b) {
    for (std::size_t i = 0; i < g[b].size(); ++i) {
      const double step = w.blocks[b].values[i] - before.blocks[b].values[i];
      if (!w.blocks[b].trainable) {
        CHECK(step == 0.0);
        continue;
      }
      const double expected = -cfg.learning_rate * g[b][i] / (std::abs(g[b][i]) + cfg.epsilon);
      CHECK(step == doctest::Approx(expected).epsilon(1e-9));
      CHECK(std::abs(step) == doctest::Approx(cfg.learning_rate).epsilon(1e-6));
    }
  }
  // Second step against a hand recursion.
  const auto mid = w;
  adam_step(st, w, g);
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double gi = g[0][0];
  const double m = (b1 * (1 - b1) + (1 - b1)) * gi / (1 - b1 * b1);
  const double v = (b2 * (1 - b2) + (1 - b2)) * gi * gi / (1 - b2 * b2);
  CHECK(w.blocks[0].values[0] - mid.blocks[0].values[0] ==
        doctest::Approx(-cfg.learning_rate * m / (std::sqrt(v) + cfg.epsilon)).epsilon(1e-9));
}

TEST_CASE("adam: identical gradient sequences give identical trajectories") {
  auto a = init_weights(toy_config(), 2);
  auto b = a;
  auto sa = make_adam(a);
  auto sb = make_adam(b);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int k = 0; k < 5; ++k) {
    std::vector<std::vector<double>> g;
    for (const auto& blk : a.blocks) {
      g.emplace_back(blk.values.size());
      for (auto& v : g.back()) v = n01(rng);
    }
    adam_step(sa, a, g);
    adam_step(sb, b, g);
  }
  for (std::size_t i = 0; i < a.blocks.size(); ++i) CHECK(a.blocks[i].values == b.blocks[i].values);
  AdamConfig bad;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("augmentation: rotations, flips and shifts") {
  Tensor t({1, 1, 3, 3});
  for (int i = 0; i < 9; ++i) t[i] = i;
  // 0 1 2 / 3 4 5 / 6 7 8
  Augmentation a;
  CHECK(augment(t, a) == t);

  a.flip_x = true;
  CHECK(augment(t, a).values()[0] == 2.0);
  a = {};
  a.flip_y = true;
  CHECK(augment(t, a).values()[0] == 6.0);

  a = {};
  a.quarter_turns = 1;
  const Tensor r1 = augment(t, a);
  a.quarter_turns = 4;
  CHECK(augment(t, a) == t);
  // Four single turns compose to the identity, two turns equal both flips.
  a.quarter_turns = 1;
  CHECK(augment(augment(augment(r1, a), a), a) == t);
  a.quarter_turns = 2;
  Augmentation flips;
  flips.flip_x = flips.flip_y = true;
  CHECK(augment(t, a) == augment(t, flips));
  // A quarter turn is a permutation that moves the corners.
  std::vector<double> sorted(r1.values().begin(), r1.values().end());
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 9; ++i) CHECK(sorted[i] == i);
  CHECK(r1.values()[4] == 4.0);
  CHECK(r1.values()[0] != 0.0);

  a = {};
  a.shift_x = 1;
  const Tensor s = augment(t, a);
  const double expect_shift[9] = {0, 0, 1, 3, 3, 4, 6, 6, 7};
  for (int i = 0; i < 9; ++i) CHECK(s[i] == expect_shift[i]);
  a.shift_x = 0;
  a.shift_y = -1;
  const Tensor s2 = augment(t, a);
  const double expect_up[9] = {3, 4, 5, 6, 7, 8, 6, 7, 8};
  for (int i = 0; i < 9; ++i) CHECK(s2[i] == expect_up[i]);

  Tensor rect({1, 1, 2, 3});
  a = {};
  a.quarter_turns = 1;
  CHECK_THROWS_AS(augment(rect, a), DimensionError);
}

TEST_CASE("input scale is the power of two nearest the inverse label mean") {
  auto pairs = identity_pairs(2, 1);
  for (auto& p : pairs)
    for (auto& v : p.label.values()) v = 0.01;
  CHECK(choose_input_scale(pairs) == 128.0);
  for (auto& p : pairs)
    for (auto& v : p.label.values()) v = 3.0;
  CHECK(choose_input_scale(pairs) == 0.25);
}

TEST_CASE("training errors") {
  TrainConfig cfg;
  CHECK_THROWS_AS(train({}, toy_config(), cfg), ConfigError);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(identity_pairs(2, 1), toy_config(), cfg), ConfigError);
  cfg = {};
  auto pairs = identity_pairs(2, 1);
  pairs[1].label = Tensor({1, 1, 4, 4});
  CHECK_THROWS_AS(train(pairs, toy_config(), cfg), DimensionError);
  pairs = identity_pairs(2, 1);
  pairs[0].label[3] = std::nan("");
  CHECK_THROWS_AS(train(pairs, toy_config(), cfg), NumericalError);
}

TEST_CASE("training on an identity task converges and is reproducible") {
  const auto pairs = identity_pairs(16, 7);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 4;
  cfg.adam.learning_rate = 3e-3;
  cfg.lr_decay = 0.98;
  cfg.seed = 3;
  auto init = init_weights(toy_config(), 21);
  init.input_scale = choose_input_scale(pairs);
  Tensor x({16, 5, 8, 8}), y({16, 1, 8, 8});
  for (int k = 0; k < 16; ++k) {
    std::copy(pairs[k].input.values().begin(), pairs[k].input.values().end(), x.item(k).begin());
    std::copy(pairs[k].label.values().begin(), pairs[k].label.values().end(), y.item(k).begin());
  }
  const double initial = l2_loss(forward(init, x, Mode::Train), y);
  const auto res = train(pairs, toy_config(), cfg, &init);
  REQUIRE(res.loss_history.size() == 200);
  CHECK(res.loss_history.back() < 1e-6 * initial);
  CHECK(l2_loss(forward(res.weights, x, Mode::Train), y) < 1e-6 * initial);

  // Non-increasing over 10-epoch windows.
  for (std::size_t k = 10; k + 10 <= res.loss_history.size(); k += 10) {
    double prev = 0.0, cur = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
      prev += res.loss_history[k - 10 + i];
      cur += res.loss_history[k + i];
    }
    CHECK(cur <= prev);
  }

  TrainConfig short_cfg = cfg;
  short_cfg.epochs = 3;
  const auto a = train(pairs, toy_config(), short_cfg);
  const auto b = train(pairs, toy_config(), short_cfg);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.weights.blocks[0].values == b.weights.blocks[0].values);

  // Resuming from given weights continues from them.
  int calls = 0;
  const auto c = train(pairs, toy_config(), short_cfg, &a.weights, [&](int, double) { ++calls; });
  CHECK(calls == 3);
  CHECK(c.weights.input_scale == a.weights.input_scale);
}
