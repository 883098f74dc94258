// Copyright 2026 The PETS-cpp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "gradcheck.h"
#include "pets/common/errors.h"
#include "pets/diffnet/checkpoint.h"
#include "pets/diffnet/network.h"
#include "pets/envs/sine.h"

namespace pets::nn {
namespace {

double naive_softplus(double x) { return std::log1p(std::exp(x)); }

NetworkParams linear_net(double w, double b, Head head = Head::kDeterministic) {
  NetworkParams p = init_params(std::vector<std::size_t>{1, head == Head::kProbabilistic ? 2u : 1u},
                                head, 1);
  p.weights[0](0, 0) = w;
  p.biases[0][0] = b;
  return p;
}

TEST(Activation, SwishExamples) {
  EXPECT_EQ(swish(0.0), 0.0);
  EXPECT_NEAR(swish(1.0), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(swish(1.0), 0.731059, 1e-5);
  EXPECT_NEAR(swish(-20.0), -4.1e-8, 0.05e-8);
}

TEST(Activation, SoftplusMatchesNaiveInSafeRange) {
  for (double x = -30.0; x <= 30.0; x += 0.37) EXPECT_NEAR(softplus(x), naive_softplus(x), 1e-13);
  EXPECT_EQ(softplus(1000.0), 1000.0);
  EXPECT_EQ(softplus(-1000.0), 0.0);
}

TEST(BoundLogvar, LowerAsymptote) {
  // Gap below ~1e-16 would round back onto the bound itself.
  const Matrix raw = Matrix::from_rows({{-10.0 - 30.0}});
  const double v = bound_logvar(raw, std::vector<double>{0.5}, std::vector<double>{-10.0})(0, 0);
  EXPECT_GT(v, -10.0);
  EXPECT_LT(v, -10.0 + 1e-6);
}

TEST(BoundLogvar, RawZero) {
  const double v1 = 0.5 - naive_softplus(0.5);
  const double v2 = -10.0 + naive_softplus(v1 + 10.0);
  const double v = bound_logvar(Matrix::from_rows({{0.0}}), std::vector<double>{0.5},
                                std::vector<double>{-10.0})(0, 0);
  EXPECT_NEAR(v, v2, 1e-14);
  EXPECT_NEAR(v, -0.474, 1e-3);
  EXPECT_LT(std::abs(v - v1), 1e-4);
}

TEST(BoundLogvar, SandwichAndMonotone) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double hi = u(rng) / 10.0;
    const double lo = hi - 0.1 - std::abs(u(rng)) / 5.0;
    double prev = -std::numeric_limits<double>::infinity();
    for (double raw = -60.0; raw <= 60.0; raw += 0.5) {
      const double v = bound_logvar(Matrix::from_rows({{raw}}), std::vector<double>{hi},
                                    std::vector<double>{lo})(0, 0);
      EXPECT_GE(v, lo);
      EXPECT_LE(v, hi + std::log(2.0) + 1e-12);
      // libm log1p/exp can step back by an ulp or two.
      EXPECT_GE(v, prev - 4.0 * std::numeric_limits<double>::epsilon() * std::abs(prev));
      prev = v;
    }
  }
  // Strict at moderate raw values.
  const auto f = [](double raw) {
    return bound_logvar(Matrix::from_rows({{raw}}), std::vector<double>{0.5},
                        std::vector<double>{-10.0})(0, 0);
  };
  EXPECT_LT(f(-1.0), f(1.0));
}

TEST(BoundLogvar, RejectsInvertedBounds) {
  EXPECT_THROW(bound_logvar(Matrix::from_rows({{0.0}}), std::vector<double>{-1.0},
                            std::vector<double>{1.0}),
               std::invalid_argument);
}

TEST(Losses, GaussianNllExamples) {
  EXPECT_EQ(gaussian_nll(Matrix::from_rows({{2.0}}), Matrix::from_rows({{0.0}}),
                         Matrix::from_rows({{2.0}})),
            0.0);
  EXPECT_DOUBLE_EQ(gaussian_nll(Matrix::from_rows({{1.0}}), Matrix::from_rows({{0.0}}),
                                Matrix::from_rows({{0.0}})),
                   1.0);
  EXPECT_DOUBLE_EQ(gaussian_nll(Matrix::from_rows({{0.0}}), Matrix::from_rows({{1.0}}),
                                Matrix::from_rows({{0.0}})),
                   1.0);
}

TEST(Losses, NllWithUnitVarianceEqualsMse) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  Matrix mean(9, 3), target(9, 3), zero(9, 3);
  for (double& v : mean.values()) v = n(rng);
  for (double& v : target.values()) v = n(rng);
  EXPECT_EQ(gaussian_nll(mean, zero, target), mse_loss(mean, target));
}

TEST(Losses, MseExamples) {
  const Matrix t = Matrix::from_rows({{0.0}, {0.0}});
  EXPECT_EQ(mse_loss(t, t), 0.0);
  EXPECT_EQ(mse_loss(Matrix::from_rows({{1.0}, {-1.0}}), t), 2.0);
  EXPECT_DOUBLE_EQ(mse_loss(Matrix::from_rows({{3.0}, {-3.0}}), t),
                   9.0 * mse_loss(Matrix::from_rows({{1.0}, {-1.0}}), t));
}

TEST(Losses, ShapeMismatchThrows) {
  EXPECT_THROW(mse_loss(Matrix(2, 1), Matrix(1, 2)), std::invalid_argument);
}

TEST(Forward, ZeroNetGivesZeroMean) {
  NetworkParams p = init_params(std::vector<std::size_t>{3, 5, 4}, Head::kProbabilistic, 2);
  for (auto& w : p.weights) std::fill(w.values().begin(), w.values().end(), 0.0);
  const auto out = forward(p, Matrix::from_rows({{1.0, -2.0, 3.0}}));
  EXPECT_EQ(out.mean, Matrix(1, 2));
  ASSERT_TRUE(out.logvar.has_value());
}

TEST(Forward, IdentityLinearNet) {
  const auto out = forward(linear_net(1.0, 0.0), Matrix::from_rows({{3.0}}));
  EXPECT_EQ(out.mean(0, 0), 3.0);
  EXPECT_FALSE(out.logvar.has_value());
}

TEST(Forward, BatchEqualsRowWise) {
  const NetworkParams p =
      init_params(std::vector<std::size_t>{2, 6, 6, 4}, Head::kProbabilistic, 9);
  const Matrix both = Matrix::from_rows({{0.3, -1.0}, {2.0, 0.5}});
  const auto out = forward(p, both);
  for (std::size_t r = 0; r < 2; ++r) {
    const auto single = forward(p, Matrix::from_data(1, 2, {both(r, 0), both(r, 1)}));
    EXPECT_EQ(single.mean(0, 0), out.mean(r, 0));
    EXPECT_EQ(single.mean(0, 1), out.mean(r, 1));
    EXPECT_EQ((*single.logvar)(0, 1), (*out.logvar)(r, 1));
  }
}

TEST(Forward, InferenceWorkspaceMatchesForward) {
  const NetworkParams p =
      init_params(std::vector<std::size_t>{3, 8, 8, 6}, Head::kProbabilistic, 4);
  Matrix x(11, 3);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  for (double& v : x.values()) v = n(rng);
  const auto ref = forward(p, x);
  InferenceWorkspace ws;
  Matrix mean(11, 3), logvar(11, 3);
  ws.run(p, x.data(), 11, mean.data(), logvar.data());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    EXPECT_NEAR(mean.values()[i], ref.mean.values()[i], 1e-13);
    EXPECT_NEAR(logvar.values()[i], ref.logvar->values()[i], 1e-13);
  }
}

TEST(Forward, ShapeMismatchThrows) {
  const NetworkParams p = init_params(std::vector<std::size_t>{3, 4, 2}, Head::kProbabilistic, 1);
  EXPECT_THROW(forward(p, Matrix(2, 2)), std::invalid_argument);
}

TEST(Init, TruncatedAtTwoSigma) {
  const NetworkParams p =
      init_params(std::vector<std::size_t>{50, 40, 2}, Head::kProbabilistic, 11);
  const double sd = 1.0 / std::sqrt(50.0);
  double sq = 0.0;
  for (double w : p.weights[0].values()) {
    EXPECT_LE(std::abs(w), 2.0 * sd);
    sq += w * w;
  }
  // Variance of a N(0, sd^2) truncated at 2 sd is 0.774 sd^2.
  EXPECT_NEAR(sq / p.weights[0].size() / (sd * sd), 0.774, 0.06);
  for (const auto& b : p.biases) {
    for (double v : b) EXPECT_EQ(v, 0.0);
  }
  EXPECT_EQ(p.max_logvar, std::vector<double>{kInitMaxLogvar});
  EXPECT_EQ(p.min_logvar, std::vector<double>{kInitMinLogvar});
  EXPECT_EQ(init_params(std::vector<std::size_t>{50, 40, 2}, Head::kProbabilistic, 11), p);
}

TEST(Gradient, FiniteDifferenceOnRandomNets) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto c = pets::testing::random_case(seed);
    const auto r = pets::testing::check_gradient(c.params, c.batch, c.options);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed;
  }
}

TEST(Gradient, ThreeLayerWidthEight) {
  NetworkParams p = init_params(std::vector<std::size_t>{3, 8, 8, 8, 4}, Head::kProbabilistic, 21);
  p.max_logvar = {0.7, 0.2};
  p.min_logvar = {-1.0, -2.0};
  Batch b{Matrix(5, 3), Matrix(5, 2)};
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  for (double& v : b.inputs.values()) v = n(rng);
  for (double& v : b.targets.values()) v = n(rng);
  for (LossKind kind : {LossKind::kGaussianNll, LossKind::kMse}) {
    LossOptions o;
    o.kind = kind;
    EXPECT_LT(pets::testing::check_gradient(p, b, o).max_rel_error, 1e-4);
  }
}

TEST(Gradient, ZeroAtExactFit) {
  NetworkParams p = linear_net(0.0, 2.5);
  Batch b{Matrix::from_rows({{1.0}, {-3.0}}), Matrix::from_rows({{2.5}, {2.5}})};
  LossOptions o;
  o.kind = LossKind::kMse;
  const auto g = gradient(p, b, o).gradient;
  EXPECT_EQ(g.weights[0](0, 0), 0.0);
  EXPECT_EQ(g.biases[0][0], 0.0);
}

TEST(Gradient, RegularizerOnSaturatedBounds) {
  // Raw pinned deep inside the bounds: both softplus paths saturate and only
  // the lambda * (max - min) term reaches the bound vectors.
  NetworkParams p = linear_net(0.0, 0.0, Head::kProbabilistic);
  p.biases[0][1] = -5.0;
  p.max_logvar = {40.0};
  p.min_logvar = {-50.0};
  Batch b{Matrix::from_rows({{1.0}}), Matrix::from_rows({{0.0}})};
  LossOptions o;
  o.lambda = 0.01;
  const auto g = gradient(p, b, o).gradient;
  EXPECT_NEAR(g.max_logvar[0], 0.01, 1e-12);
  EXPECT_NEAR(g.min_logvar[0], -0.01, 1e-12);
}

TEST(Gradient, NonFiniteIsReported) {
  NetworkParams p = linear_net(1.0, 0.0);
  Batch b{Matrix::from_rows({{std::numeric_limits<double>::infinity()}}),
          Matrix::from_rows({{0.0}})};
  LossOptions o;
  o.kind = LossKind::kMse;
  EXPECT_THROW(gradient(p, b, o), std::exception);
}

TEST(Adam, ZeroGradientLeavesParams) {
  NetworkParams p = init_params(std::vector<std::size_t>{2, 3, 2}, Head::kProbabilistic, 1);
  const NetworkParams before = p;
  AdamState s = AdamState::zeros_like(p);
  adam_step(p, Gradient::zeros_like(p), s);
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  NetworkParams p = linear_net(0.3, 0.0);
  Gradient g = Gradient::zeros_like(p);
  g.weights[0](0, 0) = 7.5;
  AdamState s = AdamState::zeros_like(p);
  AdamConfig cfg;
  adam_step(p, g, s, cfg);
  // m_hat = g, v_hat = g^2: step = lr * g / (|g| + eps).
  EXPECT_NEAR(p.weights[0](0, 0), 0.3 - cfg.learning_rate * 7.5 / (7.5 + cfg.epsilon), 1e-15);
}

TEST(Adam, Pure) {
  NetworkParams p1 = init_params(std::vector<std::size_t>{2, 3, 2}, Head::kProbabilistic, 1);
  NetworkParams p2 = p1;
  Gradient g = Gradient::zeros_like(p1);
  g.biases[0][1] = 0.25;
  g.max_logvar[0] = -1.0;
  AdamState s1 = AdamState::zeros_like(p1), s2 = s1;
  adam_step(p1, g, s1);
  adam_step(p2, g, s2);
  EXPECT_EQ(p1, p2);
  EXPECT_EQ(s1, s2);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  NetworkParams p = init_params(std::vector<std::size_t>{3, 7, 4}, Head::kProbabilistic, 77);
  p.max_logvar[0] = 0.1 + 1e-17;
  p.biases[1][0] = std::nextafter(1.0 / 3.0, 1.0);
  AdamState s = AdamState::zeros_like(p);
  Gradient g = Gradient::zeros_like(p);
  g.weights[0](1, 2) = 0.123456789;
  adam_step(p, g, s);
  const auto path = std::filesystem::temp_directory_path() / "pets_ckpt_test.json";
  save_checkpoint(path, p, &s);
  const Checkpoint c = load_checkpoint(path);
  EXPECT_EQ(c.params, p);
  ASSERT_TRUE(c.adam.has_value());
  EXPECT_EQ(*c.adam, s);
  std::filesystem::remove(path);
}

TEST(Training, FullBatchAdamDecreasesNllOnSine) {
  int decreased = 0;
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(seed);
    Batch data = envs::sine_dataset(200, rng);
    NetworkParams p = init_params(std::vector<std::size_t>{1, 16, 16, 2},
                                  Head::kProbabilistic, static_cast<std::uint64_t>(seed));
    LossOptions o;
    o.mean_over_rows = true;
    AdamState s = AdamState::zeros_like(p);
    AdamConfig cfg;
    cfg.learning_rate = 1e-2;
    const double start = evaluate_loss(p, data, o);
    for (int epoch = 0; epoch < 100; ++epoch) {
      adam_step(p, gradient(p, data, o).gradient, s, cfg);
    }
    if (evaluate_loss(p, data, o) < start) ++decreased;
  }
  EXPECT_GE(decreased, static_cast<int>(0.95 * seeds));
}

TEST(Training, DeterministicTrajectory) {
  auto run = [] {
    Rng rng(4);
    Batch data = envs::sine_dataset(64, rng);
    NetworkParams p = init_params(std::vector<std::size_t>{1, 8, 2}, Head::kProbabilistic, 3);
    AdamState s = AdamState::zeros_like(p);
    for (int i = 0; i < 20; ++i) adam_step(p, gradient(p, data, {}).gradient, s);
    return p;
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace pets::nn
