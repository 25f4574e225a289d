#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fdrl/error.hpp"
#include "fdrl/gradcheck.hpp"
#include "fdrl/objective.hpp"

using namespace fdrl;

namespace {

// Rollouts sampled from `policy` itself, so theta == theta_old.
RolloutGroup on_policy_group(const Policy<double>& policy, std::vector<double> rewards, std::uint64_t seed,
                             int horizon = 12) {
  std::mt19937_64 rng(seed);
  RolloutGroup g;
  for (int t = 0; t < horizon; ++t) g.episode.user_bits.push_back(static_cast<State>(rng() & 1u));
  g.episode.forced_active_frames = 2;
  g.episode.content_seed = 3;
  for (std::size_t i = 0; i < rewards.size(); ++i) g.rollouts.push_back(sample_rollout(policy, g.episode, 1.0, seed + i));
  g.advantages = group_advantages(rewards);
  return g;
}

}  // namespace

TEST(Objective, ParseNames) {
  EXPECT_EQ(parse_objective("aspirin"), Objective::kProjected);
  EXPECT_EQ(parse_objective("standard"), Objective::kStandard);
  EXPECT_EQ(parse_objective("standard_grpo"), Objective::kStandard);
  EXPECT_THROW(parse_objective("ppo"), ConfigError);
}

TEST(Objective, FirstEpochOppositeAdvantagesCancel) {
  const auto f = make_objective_fixture(1, 2);
  const Policy<double> policy(f.old), ref(f.ref);
  const auto g = on_policy_group(policy, {0.2, 0.9}, 5);
  EXPECT_NEAR(projected_grpo_loss(g, policy, ref, 0.0), 0.0, 1e-15);
  EXPECT_NEAR(standard_grpo_loss(g, policy, ref, 0.0), 0.0, 1e-15);
}

TEST(Objective, ZeroAdvantagesGiveZeroLossAndGradient) {
  const auto f = make_objective_fixture(2, 3);
  const Policy<double> policy(f.current), ref(f.ref);
  auto g = f.group;
  g.advantages = group_advantages(std::vector<double>{0.4, 0.4, 0.4});
  for (Objective o : {Objective::kProjected, Objective::kStandard}) {
    Vector<double> grad = Vector<double>::Zero(policy.layout().total_size());
    const auto s = group_objective(o, g, policy, ref, 0.0, &grad);
    EXPECT_EQ(s.loss, 0.0);
    EXPECT_EQ(grad.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Objective, KlVanishesAtReference) {
  const auto f = make_objective_fixture(3, 3);
  const Policy<double> ref(f.ref);
  for (Objective o : {Objective::kProjected, Objective::kStandard}) {
    const auto a = group_objective(o, f.group, ref, ref, 0.0, static_cast<Vector<double>*>(nullptr));
    const auto b = group_objective(o, f.group, ref, ref, 5.0, static_cast<Vector<double>*>(nullptr));
    EXPECT_EQ(a.loss, b.loss);
    EXPECT_EQ(b.kl_sum, 0.0);
  }
}

TEST(Objective, KlNonNegativeAwayFromReference) {
  const auto f = make_objective_fixture(4, 3);
  const Policy<double> policy(f.current), ref(f.ref);
  for (Objective o : {Objective::kProjected, Objective::kStandard}) {
    const auto s = group_objective(o, f.group, policy, ref, 0.1, static_cast<Vector<double>*>(nullptr));
    EXPECT_GT(s.kl_sum, 0.0);
  }
}

TEST(Objective, InvariantToRolloutOrder) {
  const auto f = make_objective_fixture(5, 3);
  const Policy<double> policy(f.current), ref(f.ref);
  auto g = f.group;
  std::reverse(g.rollouts.begin(), g.rollouts.end());
  std::reverse(g.advantages.advantages.begin(), g.advantages.advantages.end());
  for (Objective o : {Objective::kProjected, Objective::kStandard}) {
    EXPECT_NEAR(group_objective(o, f.group, policy, ref, 0.05, static_cast<Vector<double>*>(nullptr)).loss,
                group_objective(o, g, policy, ref, 0.05, static_cast<Vector<double>*>(nullptr)).loss, 1e-14);
  }
}

TEST(Objective, GroupShapeErrors) {
  const auto f = make_objective_fixture(6, 3);
  const Policy<double> policy(f.current), ref(f.ref);
  auto g = f.group;
  g.advantages.advantages.pop_back();
  EXPECT_THROW(projected_grpo_loss(g, policy, ref, 0.0), ShapeError);
  g = f.group;
  g.rollouts.resize(1);
  EXPECT_THROW(projected_grpo_loss(g, policy, ref, 0.0), ShapeError);
}

TEST(Objective, ProjectedInvariantToWithinSetPermutationStandardIsNot) {
  // Four tokens, pad {0}: swapping the logits of tokens 1 and 2 changes the
  // realized token's probability but neither set sum.
  const auto part = make_partition(4, {0});
  Rollout r;
  r.tokens = {1};
  r.states = {kSpeech};
  Vector<double> z(4), zref(4);
  z << 0.1, 1.5, -0.5, 0.3;
  zref << 0.0, 0.2, 0.1, -0.1;
  r.state_logprobs_old = {state_log_prob(z, part, kSpeech)};
  r.token_logprobs_old = {log_softmax(z)(1)};
  Vector<double> zp = z;
  std::swap(zp(1), zp(2));
  const Matrix<double> Z = z, ZP = zp, ZR = zref;
  Matrix<double>* none = nullptr;
  const double proj = rollout_objective<double>(Objective::kProjected, Z, ZR, r, 1.0, 0.1, 1.0, part, none).loss;
  const double proj_p = rollout_objective<double>(Objective::kProjected, ZP, ZR, r, 1.0, 0.1, 1.0, part, none).loss;
  const double std_l = rollout_objective<double>(Objective::kStandard, Z, ZR, r, 1.0, 0.1, 1.0, part, none).loss;
  const double std_p = rollout_objective<double>(Objective::kStandard, ZP, ZR, r, 1.0, 0.1, 1.0, part, none).loss;
  EXPECT_LE(std::abs(proj - proj_p), 1e-9);
  EXPECT_GE(std::abs(std_l - std_p), 1e-3);
}

TEST(Objective, ProjectedLogitGradientEqualWithinSets) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = make_objective_fixture(seed, 3);
    const Policy<double> policy(f.current), ref(f.ref);
    EXPECT_LE(within_set_spread(Objective::kProjected, f.group, policy, ref, 0.1), 1e-9);
    EXPECT_GT(within_set_spread(Objective::kStandard, f.group, policy, ref, 0.1), 1e-6);
  }
}

TEST(Objective, RatioTrickIdentity) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = make_objective_fixture(seed, 2);
    const Policy<double> policy(f.current), ref(f.ref);
    const auto g = on_policy_group(policy, {0.1 * static_cast<double>(seed), 0.8}, 40 + seed);
    Vector<double> grad = Vector<double>::Zero(policy.layout().total_size());
    group_objective(Objective::kProjected, g, policy, ref, 0.0, &grad);

    // d/dmargin of log pi'(s) is (s - p_active); pad logits carry the negative.
    double norm = 0;
    for (const auto& r : g.rollouts) norm += r.trainable_frames();
    Vector<double> want = Vector<double>::Zero(grad.size());
    for (std::size_t i = 0; i < g.rollouts.size(); ++i) {
      const auto& r = g.rollouts[i];
      const double A = g.advantages.advantages[i];
      Vector<double> gi;
      loss_and_grad(
          policy, g.episode, r.tokens,
          [&](const auto& z, Matrix<double>& d) {
            double value = 0;
            d.setZero();
            for (int t = r.context_frames; t < r.size(); ++t) {
              const auto s = r.states[static_cast<std::size_t>(t)];
              const auto dist = state_distribution(project_logits(z.col(t), policy.partition()));
              value -= A * dist.log_prob(s) / norm;
              const double dm = -A * ((s == kSpeech ? 1.0 : 0.0) - dist.p_active()) / norm;
              for (TokenId v = 0; v < policy.config().vocab_size; ++v) {
                d(v, t) = policy.partition().is_pad(v) ? -dm : dm;
              }
            }
            return value;
          },
          gi);
      want += gi;
    }
    EXPECT_LE((grad - want).norm() / want.norm(), 1e-6);
  }
}
