#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "fdrl/duplexsim.hpp"
#include "fdrl/error.hpp"
#include "fdrl/evaluate.hpp"
#include "fdrl/io.hpp"
#include "fdrl/trainer.hpp"

using namespace fdrl;

namespace {

PolicyConfig tiny_policy(int horizon = 250) {
  PolicyConfig c;
  c.vocab_size = 8;
  c.pad_ids = {0, 1, 2, 3, 4, 5};
  c.embed_dim = 16;
  c.num_layers = 1;
  c.num_heads = 2;
  c.mlp_ratio = 2;
  c.max_horizon = horizon;
  c.seed = 3;
  return c;
}

std::vector<TrainingEpisode> turn_taking(int n, std::uint64_t seed) {
  const auto specs = generate_suite(ScenarioKind::kTurnTaking, n, seed);
  return to_training_episodes(specs);
}

}  // namespace

TEST(TrainConfig, DefaultsAndValidation) {
  TrainConfig c;
  EXPECT_EQ(c.group_size, 2);
  EXPECT_EQ(c.kl_beta, 0.001);
  EXPECT_EQ(c.learning_rate, 1e-3);
  EXPECT_EQ(c.inner_epochs, 1);
  EXPECT_EQ(c.grad_clip_norm, 1.0);
  EXPECT_EQ(c.objective, Objective::kProjected);
  c.group_size = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.kl_beta = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Adam, FirstStepMovesEachCoordinateByLearningRate) {
  AdamOptimizer adam(3, 0.1, 100.0);
  Vector<double> p(3), g(3);
  p << 1.0, 2.0, 3.0;
  g << 0.5, -2.0, 0.0;
  adam.step(p, g);
  // Bias-corrected first step: m_hat / sqrt(v_hat) = sign(g), up to epsilon.
  EXPECT_NEAR(p(0), 0.9, 1e-8);
  EXPECT_NEAR(p(1), 2.1, 1e-8);
  EXPECT_EQ(p(2), 3.0);
}

TEST(Adam, ClipsGlobalNorm) {
  AdamOptimizer adam(2, 0.1, 1.0);
  Vector<double> p = Vector<double>::Zero(2), g(2);
  g << 3.0, 4.0;
  EXPECT_DOUBLE_EQ(adam.step(p, g), 5.0);
  EXPECT_NEAR(g.norm(), 1.0, 1e-15);
}

TEST(Train, ZeroStepsReturnsInitialCheckpoint) {
  const auto init = init_policy(tiny_policy());
  TrainConfig cfg;
  cfg.steps = 0;
  const auto r = train(init, cfg, turn_taking(4, 1));
  EXPECT_EQ(serialize_checkpoint(r.final), serialize_checkpoint(init));
  EXPECT_TRUE(r.log.empty());
}

TEST(Train, LogHasOneRowPerStepAndIsDeterministic) {
  const auto init = init_policy(tiny_policy());
  TrainConfig cfg;
  cfg.steps = 3;
  cfg.batch_size = 2;
  cfg.seed = 5;
  const auto eps = turn_taking(6, 2);
  const auto a = train(init, cfg, eps);
  const auto b = train(init, cfg, eps);
  ASSERT_EQ(a.log.size(), 3u);
  EXPECT_EQ(train_log_csv(a.log), train_log_csv(b.log));
  EXPECT_EQ(serialize_checkpoint(a.final), serialize_checkpoint(b.final));
  EXPECT_NE(serialize_checkpoint(a.final), serialize_checkpoint(init));
  for (const auto& row : a.log) {
    EXPECT_GE(row.mean_r_total, 0.0);
    EXPECT_LE(row.mean_r_total, 1.0);
    EXPECT_DOUBLE_EQ(row.mean_ratio, 1.0);  // first inner epoch: theta == theta_old
  }
}

TEST(Train, ZeroVarianceGroupsWithoutKlLeaveParametersUnchanged) {
  // The user talks for the whole horizon, so no utterance can ever follow a
  // user end and every reward is 0.
  TrainingEpisode ep;
  ep.id = "busy";
  ep.input.user_bits.assign(40, 1);
  ep.user = make_interval_set({{0.0, 40 * 0.08}});
  const auto init = init_policy(tiny_policy(40));
  TrainConfig cfg;
  cfg.steps = 2;
  cfg.batch_size = 2;
  cfg.kl_beta = 0.0;
  const std::vector<TrainingEpisode> eps{ep};
  Trainer t(init, cfg);
  const Vector<double> before = t.policy().parameters();
  t.step(eps);
  EXPECT_EQ(t.policy().parameters(), before);
}

TEST(Train, ErrorsOnEmptyInput) {
  TrainConfig cfg;
  cfg.steps = 1;
  EXPECT_THROW(train(init_policy(tiny_policy()), cfg, {}), EmptyInputError);
}

TEST(Train, EarlyRewardsMatchMonteCarloEstimateOfUntrainedPolicy) {
  const auto init = init_policy(tiny_policy());
  TrainConfig cfg;
  cfg.steps = 10;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-4;
  cfg.seed = 11;
  const auto eps = turn_taking(64, 3);
  const auto r = train(init, cfg, eps);
  double train_mean = 0;
  for (const auto& row : r.log) train_mean += row.mean_r_total;
  train_mean /= static_cast<double>(r.log.size());

  // Independent estimate: 1000 rollouts of the initial policy on fresh episodes.
  const Policy<double> policy(init);
  const auto mc_eps = turn_taking(1000, 99);
  RewardConfig reward;
  double sum = 0, sum_sq = 0;
  for (std::size_t i = 0; i < mc_eps.size(); ++i) {
    const auto ro = sample_rollout(policy, mc_eps[i].input, 1.0, mix_seed(1234, i));
    const double v = total_reward(ro.states, mc_eps[i].user, reward).r_total;
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(mc_eps.size());
  const double mc_mean = sum / n;
  const double var = std::max(sum_sq / n - mc_mean * mc_mean, 1e-12);
  const double n_train = 10.0 * 8 * 2;
  const double se = std::sqrt(var / n + var / n_train);
  EXPECT_LE(std::abs(train_mean - mc_mean), 3 * se) << "train " << train_mean << " mc " << mc_mean;
}

TEST(Train, WritesOutputs) {
  const auto init = init_policy(tiny_policy());
  TrainConfig cfg;
  cfg.steps = 2;
  cfg.batch_size = 1;
  const auto r = train(init, cfg, turn_taking(2, 4));
  const auto dir = (std::filesystem::temp_directory_path() / "fdrl_test_train_out").string();
  std::filesystem::remove_all(dir);
  write_train_outputs(r, dir);
  const auto log = read_file(dir + "/train_log.csv");
  EXPECT_EQ(log.substr(0, log.find('\n')), "step,mean_r_total,mean_r_int,mean_r_re,loss,mean_kl,mean_ratio");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 3);
  const auto curve = read_file(dir + "/reward_curve.csv");
  EXPECT_EQ(curve.substr(0, curve.find('\n')), "step,mean_r_int,mean_r_re,mean_r_total");
  EXPECT_EQ(load_checkpoint(dir + "/final.ckpt"), r.final);
  EXPECT_EQ(load_checkpoint(dir + "/initial.ckpt"), init);
  std::filesystem::remove_all(dir);
}

TEST(Train, StandardObjectiveRuns) {
  const auto init = init_policy(tiny_policy());
  TrainConfig cfg;
  cfg.steps = 2;
  cfg.batch_size = 2;
  cfg.objective = Objective::kStandard;
  const auto r = train(init, cfg, turn_taking(4, 5));
  EXPECT_EQ(r.log.size(), 2u);
  EXPECT_NE(r.final, init);
}
