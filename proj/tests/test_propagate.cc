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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "linear_oracle.h"
#include "pets/envs/environment.h"
#include "pets/propagate/models.h"
#include "pets/propagate/rollout.h"

namespace {

using pets::Rng;
using pets::nn::Matrix;
using pets::prop::LinearGaussianEnsemble;
using pets::prop::LinearMember;
using pets::prop::Propagation;
using pets::testing::estimate;
using pets::testing::sample_moments;

const pets::prop::RewardFunction kZero = [](const double*, const double*, std::size_t rows,
                                            double* out) {
  for (std::size_t r = 0; r < rows; ++r) out[r] = 0.0;
};
const pets::prop::RewardFunction kOne = [](const double*, const double*, std::size_t rows,
                                           double* out) {
  for (std::size_t r = 0; r < rows; ++r) out[r] = 1.0;
};
const pets::prop::RewardFunction kNegSquare = [](const double* s, const double*,
                                                 std::size_t rows, double* out) {
  for (std::size_t r = 0; r < rows; ++r) out[r] = -s[r] * s[r];
};

Matrix zero_actions(std::size_t h) { return Matrix(h, 1); }

const std::vector<Propagation> kAll = {Propagation::kTS1, Propagation::kTSInf,
                                       Propagation::kE, Propagation::kMM, Propagation::kDS};

double kurtosis(const Matrix& x) {
  const auto m = sample_moments(x.data(), x.rows(), x.cols());
  double k = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double z = x(i, 0) - m.mean;
    k += z * z * z * z;
  }
  return k / static_cast<double>(x.rows()) / (m.variance * m.variance);
}

TEST(AssignBootstraps, SingleMemberIsAllZero) {
  Rng rng(1);
  for (auto v : {Propagation::kTS1, Propagation::kTSInf}) {
    for (auto b : pets::prop::assign_bootstraps(20, 1, v, 0, rng)) EXPECT_EQ(b, 0u);
  }
}

TEST(AssignBootstraps, FixedAssignmentIsBalanced) {
  Rng rng(2);
  const auto a = pets::prop::assign_bootstraps(20, 5, Propagation::kTSInf, 3, rng);
  std::vector<int> count(5, 0);
  for (auto b : a) ++count[b];
  for (int c : count) EXPECT_EQ(c, 4);
}

TEST(AssignBootstraps, ResampledFrequenciesAreUniform) {
  Rng rng(3);
  std::vector<double> count(5, 0.0);
  const std::size_t n = 200000;
  const auto a = pets::prop::assign_bootstraps(n, 5, Propagation::kTS1, 0, rng);
  for (auto b : a) count[b] += 1.0;
  for (double c : count) EXPECT_NEAR(c / n, 0.2, 0.01);
}

TEST(AssignBootstraps, RejectsOtherSchemes) {
  Rng rng(4);
  EXPECT_THROW(pets::prop::assign_bootstraps(4, 2, Propagation::kMM, 0, rng),
               std::invalid_argument);
  EXPECT_THROW(pets::prop::assign_bootstraps(0, 2, Propagation::kTS1, 0, rng),
               std::invalid_argument);
}

TEST(Propagation, NamesRoundTrip) {
  for (auto p : kAll) {
    EXPECT_EQ(pets::prop::propagation_from_string(pets::prop::to_string(p)), p);
  }
  EXPECT_THROW(pets::prop::propagation_from_string("TS2"), std::invalid_argument);
}

// Moments of every sampling scheme against the closed-form recursions.
class LinearMoments : public ::testing::TestWithParam<Propagation> {};

TEST_P(LinearMoments, MatchAnalyticRecursion) {
  const std::vector<LinearMember> members = {{0.8, 0.1, 0.0, 0.1}, {1.2, -0.1, 0.0, 0.2}};
  const LinearGaussianEnsemble model(members);
  const std::size_t H = 10, P = 4000, R = 20;
  const double s0 = 1.0;
  const std::vector<double> start{s0};

  std::vector<pets::testing::Moments> truth;
  if (GetParam() == Propagation::kTSInf) {
    const auto paths = pets::testing::member_moments(members, s0, H);
    for (std::size_t t = 0; t <= H; ++t) {
      const auto d = pets::testing::fixed_member_decomposition(members, s0, t);
      const double mean = 0.5 * (paths[0][t].mean + paths[1][t].mean);
      truth.push_back({mean, d.aleatoric + d.epistemic});
    }
  } else {
    truth = pets::testing::resampled_moments(members, s0, H);
  }

  for (std::size_t t : {1u, 5u, 10u}) {
    std::vector<double> means, vars;
    for (std::size_t r = 0; r < R; ++r) {
      const auto res = pets::prop::rollout(model, start, zero_actions(H), GetParam(), P, kZero,
                                           1000 + r);
      const auto m = sample_moments(res.bundles[t].states.data(), P);
      means.push_back(m.mean);
      vars.push_back(m.variance);
    }
    const auto em = estimate(means);
    const auto ev = estimate(vars);
    EXPECT_NEAR(em.mean, truth[t].mean, 4.0 * em.stderr_) << "t=" << t;
    EXPECT_NEAR(ev.mean, truth[t].variance, 4.0 * ev.stderr_) << "t=" << t;
  }
}

INSTANTIATE_TEST_SUITE_P(Schemes, LinearMoments,
                         ::testing::Values(Propagation::kTS1, Propagation::kTSInf,
                                           Propagation::kMM, Propagation::kDS),
                         [](const auto& info) {
                           return std::string(pets::prop::to_string(info.param));
                         });

TEST(Rollout, FixedMembersSeparateLinearly) {
  const LinearGaussianEnsemble model({{1.0, 1.0, 0.0, 0.0}, {1.0, -1.0, 0.0, 0.0}});
  const std::vector<double> s0{0.25};
  const auto res = pets::prop::rollout(model, s0, zero_actions(8), Propagation::kTSInf, 10,
                                       kZero, 5);
  for (const auto& b : res.bundles) {
    for (std::size_t p = 0; p < 10; ++p) {
      const double expect = b.bootstrap[p] == 0 ? 0.25 + b.t : 0.25 - double(b.t);
      EXPECT_EQ(b.states(p, 0), expect);
    }
    EXPECT_EQ(b.states(0, 0) - b.states(1, 0), 2.0 * b.t);
  }
}

TEST(Rollout, ExpectationFollowsMixtureMean) {
  const LinearGaussianEnsemble model({{2.0, 0.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 0.0}});
  const std::vector<double> s0{1.0};
  const auto res = pets::prop::rollout(model, s0, zero_actions(6), Propagation::kE, 20,
                                       kZero, 0);
  ASSERT_EQ(res.particles(), 1u);
  for (const auto& b : res.bundles) EXPECT_EQ(b.states(0, 0), 1.0);
}

TEST(Rollout, ExpectationIgnoresNoise) {
  const LinearGaussianEnsemble model({{0.5, 0.2, 0.0, 3.0}});
  const std::vector<double> s0{1.0};
  const auto res = pets::prop::rollout(model, s0, zero_actions(3), Propagation::kE, 1, kZero, 9);
  EXPECT_DOUBLE_EQ(res.bundles[1].states(0, 0), 0.7);
  EXPECT_DOUBLE_EQ(res.bundles[2].states(0, 0), 0.55);
}

TEST(Rollout, MomentMatchingRemovesBimodality) {
  const LinearGaussianEnsemble model({{0.0, 1.0, 0.0, 0.05}, {0.0, -1.0, 0.0, 0.05}});
  const std::vector<double> s0{0.0};
  const std::size_t P = 20000;
  const auto mm = pets::prop::rollout(model, s0, zero_actions(1), Propagation::kMM, P, kZero, 11);
  const auto ts = pets::prop::rollout(model, s0, zero_actions(1), Propagation::kTS1, P, kZero, 11);
  EXPECT_NEAR(kurtosis(mm.bundles[1].states), 3.0, 0.15);
  EXPECT_LT(kurtosis(ts.bundles[1].states), 1.2);
}

TEST(Rollout, SamplingWithOneMemberMatchesTrajectorySampling) {
  const LinearGaussianEnsemble model({{0.9, 0.1, 0.5, 0.3}});
  const std::vector<double> s0{0.4};
  Matrix a(5, 1);
  for (std::size_t t = 0; t < 5; ++t) a(t, 0) = 0.1 * double(t);
  const auto ds = pets::prop::rollout(model, s0, a, Propagation::kDS, 16, kNegSquare, 21);
  const auto ts = pets::prop::rollout(model, s0, a, Propagation::kTS1, 16, kNegSquare, 21);
  for (std::size_t t = 0; t <= 5; ++t) {
    EXPECT_TRUE(ds.bundles[t].states == ts.bundles[t].states) << t;
  }
  EXPECT_EQ(ds.expected_return(), ts.expected_return());
}

TEST(Rollout, SamplingRefitsOverMembers) {
  // Members s + 1 and s - 1 give per-particle N(s, 1).
  const LinearGaussianEnsemble model({{1.0, 1.0, 0.0, 0.0}, {1.0, -1.0, 0.0, 0.0}});
  const std::vector<double> s0{0.5};
  const std::size_t P = 40000;
  const auto res = pets::prop::rollout(model, s0, zero_actions(1), Propagation::kDS, P, kZero, 3);
  const auto m = sample_moments(res.bundles[1].states.data(), P);
  EXPECT_NEAR(m.mean, 0.5, 4.0 / std::sqrt(double(P)));
  EXPECT_NEAR(m.variance, 1.0, 4.0 * std::sqrt(2.0 / double(P)));
}

TEST(Decompose, RecoversMemberVarianceAndSpread) {
  const std::vector<LinearMember> members = {{0.8, 0.0, 0.0, 0.1}, {1.2, 0.0, 0.0, 0.1}};
  const LinearGaussianEnsemble model(members);
  const std::vector<double> s0{1.0};
  const auto res = pets::prop::rollout(model, s0, zero_actions(10), Propagation::kTSInf, 20000,
                                       kZero, 17);
  const auto d = pets::prop::decompose(res, 2);
  ASSERT_EQ(d.size(), 11u);
  EXPECT_EQ(d[0].aleatoric[0], 0.0);
  EXPECT_EQ(d[0].epistemic[0], 0.0);
  for (std::size_t t : {1u, 5u, 10u}) {
    const auto truth = pets::testing::fixed_member_decomposition(members, 1.0, t);
    EXPECT_NEAR(d[t].aleatoric[0], truth.aleatoric, 0.05 * truth.aleatoric) << t;
    EXPECT_NEAR(d[t].epistemic[0], truth.epistemic, 0.05 * truth.epistemic) << t;
  }
}

TEST(Decompose, IdenticalMembersHaveNoEpistemicPart) {
  const LinearGaussianEnsemble model({{1.0, 0.0, 0.0, 0.0}, {1.0, 0.0, 0.0, 0.0}});
  const std::vector<double> s0{2.0};
  const auto res = pets::prop::rollout(model, s0, zero_actions(3), Propagation::kTSInf, 8,
                                       kZero, 1);
  for (const auto& d : pets::prop::decompose(res, 2)) {
    EXPECT_EQ(d.epistemic[0], 0.0);
    EXPECT_EQ(d.aleatoric[0], 0.0);
  }
}

TEST(Decompose, RequiresFixedMembers) {
  const LinearGaussianEnsemble model({{1.0, 0.0, 0.0, 0.1}, {1.0, 0.0, 0.0, 0.1}});
  const std::vector<double> s0{0.0};
  const auto res = pets::prop::rollout(model, s0, zero_actions(2), Propagation::kTS1, 8,
                                       kZero, 1);
  EXPECT_THROW(pets::prop::decompose(res, 2), std::invalid_argument);
}

TEST(Rollout, ExpectedReturnOfQuadraticCost) {
  const std::vector<LinearMember> members = {{0.9, 0.0, 0.0, 0.2}, {1.1, 0.0, 0.0, 0.2}};
  const LinearGaussianEnsemble model(members);
  const std::size_t H = 6;
  const auto m = pets::testing::resampled_moments(members, 1.0, H);
  double truth = 0.0;
  for (std::size_t t = 1; t <= H; ++t) truth -= m[t].variance + m[t].mean * m[t].mean;
  const std::vector<double> s0{1.0};
  std::vector<double> ret;
  for (std::uint64_t r = 0; r < 20; ++r) {
    ret.push_back(pets::prop::rollout(model, s0, zero_actions(H), Propagation::kTS1, 2000,
                                      kNegSquare, r)
                      .expected_return());
  }
  const auto e = estimate(ret);
  EXPECT_NEAR(e.mean, truth, 4.0 * e.stderr_);
}

TEST(Rollout, ConstantRewardSumsToHorizon) {
  const LinearGaussianEnsemble model({{0.9, 0.0, 0.0, 0.1}, {1.0, 0.0, 0.0, 0.2}});
  const std::vector<double> s0{0.0};
  for (auto scheme : kAll) {
    const auto res = pets::prop::rollout(model, s0, zero_actions(7), scheme, 10, kOne, 2);
    EXPECT_EQ(res.expected_return(), 7.0);
    EXPECT_FALSE(res.truncated);
  }
}

TEST(Rollout, NonFiniteStatesTruncate) {
  const LinearGaussianEnsemble model({{1e200, 0.0, 0.0, 0.0}});
  const std::vector<double> s0{1.0};
  for (auto scheme : kAll) {
    const auto res = pets::prop::rollout(model, s0, zero_actions(5), scheme, 4, kOne, 2);
    EXPECT_TRUE(res.truncated);
    EXPECT_EQ(res.truncated_at, 1u);
    EXPECT_EQ(res.expected_return(), 1.0 + 4.0 * pets::prop::kTruncationReward);

    double score = 0.0;
    bool cut = false;
    const std::uint64_t seed = 2;
    Matrix a = zero_actions(5);
    pets::prop::evaluate_batch(model, s0, a.data(), 1, 5, scheme, 4, kOne, &seed, &score, &cut);
    EXPECT_TRUE(cut);
    EXPECT_EQ(score, res.expected_return());
  }
}

TEST(Rollout, RejectsBadInputs) {
  const LinearGaussianEnsemble model({{1.0, 0.0, 0.0, 0.0}});
  const std::vector<double> two{0.0, 0.0};
  const std::vector<double> one{0.0};
  EXPECT_THROW(pets::prop::rollout(model, two, zero_actions(2), Propagation::kTS1, 2, kZero, 0),
               std::invalid_argument);
  EXPECT_THROW(pets::prop::rollout(model, one, zero_actions(2), Propagation::kTS1, 0, kZero, 0),
               std::invalid_argument);
  EXPECT_THROW(pets::prop::rollout(model, one, Matrix(2, 3), Propagation::kTS1, 2, kZero, 0),
               std::invalid_argument);
  EXPECT_THROW(LinearGaussianEnsemble({}), std::invalid_argument);
  EXPECT_THROW(LinearGaussianEnsemble({{1.0, 0.0, 0.0, -1.0}}), std::invalid_argument);
}

Matrix random_candidates(std::size_t n, std::size_t h, std::size_t da, std::uint64_t seed) {
  Rng rng(seed);
  Matrix c(n, h * da);
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] = pets::uniform(rng, -1.0, 1.0);
  return c;
}

TEST(EvaluateBatch, MatchesSingleRollouts) {
  const LinearGaussianEnsemble model({{0.9, 0.0, 0.3, 0.1}, {1.05, 0.1, 0.2, 0.05},
                                      {1.0, -0.1, 0.4, 0.2}});
  const std::vector<double> s0{0.3};
  const std::size_t n = 7, H = 6, P = 5;
  const Matrix cand = random_candidates(n, H, 1, 8);
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < n; ++i) seeds.push_back(pets::derive_seed(77, {i}));
  for (auto scheme : kAll) {
    for (std::size_t chunk : {1u, 3u, 128u}) {
      for (std::size_t threads : {1u, 2u}) {
        std::vector<double> scores(n);
        pets::prop::BatchOptions opt;
        opt.chunk = chunk;
        opt.threads = threads;
        pets::prop::evaluate_batch(model, s0, cand.data(), n, H, scheme, P, kNegSquare,
                                   seeds.data(), scores.data(), nullptr, opt);
        for (std::size_t i = 0; i < n; ++i) {
          Matrix a(H, 1);
          for (std::size_t t = 0; t < H; ++t) a(t, 0) = cand(i, t);
          const auto res = pets::prop::rollout(model, s0, a, scheme, P, kNegSquare, seeds[i]);
          EXPECT_EQ(scores[i], res.expected_return())
              << pets::prop::to_string(scheme) << " chunk " << chunk << " cand " << i;
        }
      }
    }
  }
}

void expect_collapse(const pets::prop::DynamicsModel& model, std::span<const double> s0,
                     const pets::prop::RewardFunction& reward, std::size_t H) {
  const std::size_t da = model.action_dim();
  const std::size_t n = 6, P = 20;
  const Matrix cand = random_candidates(n, H, da, 4);
  std::vector<std::uint64_t> seeds(n);
  for (std::size_t i = 0; i < n; ++i) seeds[i] = 100 + i;

  std::vector<std::vector<double>> all_scores;
  for (auto scheme : kAll) {
    for (bool collapse : {false, true}) {
      std::vector<double> scores(n);
      pets::prop::BatchOptions opt;
      opt.collapse_deterministic = collapse;
      pets::prop::evaluate_batch(model, s0, cand.data(), n, H, scheme, P, reward, seeds.data(),
                                 scores.data(), nullptr, opt);
      all_scores.push_back(scores);
    }
  }
  for (const auto& s : all_scores) EXPECT_EQ(s, all_scores.front());

  Matrix a(H, da);
  std::copy(cand.data(), cand.data() + H * da, a.data());
  const auto ref = pets::prop::rollout(model, s0, a, Propagation::kE, 1, reward, 0);
  for (auto scheme : kAll) {
    const auto res = pets::prop::rollout(model, s0, a, scheme, P, reward, 9);
    ASSERT_EQ(res.bundles.size(), H + 1);
    for (std::size_t t = 0; t <= H; ++t) {
      for (std::size_t p = 0; p < res.particles(); ++p) {
        for (std::size_t i = 0; i < model.state_dim(); ++i) {
          EXPECT_EQ(res.bundles[t].states(p, i), ref.bundles[t].states(0, i));
        }
      }
    }
    EXPECT_EQ(res.expected_return(), ref.expected_return());
  }
}

TEST(Collapse, DeterministicLinearModel) {
  const LinearGaussianEnsemble model({{0.95, 0.01, 0.5, 0.0}});
  const std::vector<double> s0{0.7};
  expect_collapse(model, s0, kNegSquare, 9);
}

TEST(Collapse, GroundTruthCartpole) {
  const auto env = pets::envs::make_environment("cartpole");
  const pets::prop::EnvironmentDynamics model(*env);
  const auto s0 = env->initial_state();
  expect_collapse(model, s0, env->reward_function(), 12);
}

TEST(RolloutCsv, OneRowPerParticleAndStep) {
  const LinearGaussianEnsemble model({{1.0, 0.0, 0.0, 0.1}, {1.0, 0.0, 0.0, 0.1}});
  const std::vector<double> s0{0.0};
  const auto res = pets::prop::rollout(model, s0, zero_actions(3), Propagation::kTS1, 4, kOne, 1);
  std::ostringstream out;
  pets::prop::write_rollout_csv(res, 0, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "candidate,particle,step,s_0,reward");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4u * 4u);
}

}  // namespace
