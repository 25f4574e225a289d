#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "fdrl/error.hpp"
#include "fdrl/io.hpp"
#include "fdrl/policy.hpp"

using namespace fdrl;

namespace {

PolicyConfig small_config() {
  PolicyConfig c;
  c.vocab_size = 6;
  c.pad_ids = {0, 5};
  c.embed_dim = 8;
  c.num_layers = 2;
  c.num_heads = 2;
  c.mlp_ratio = 2;
  c.max_horizon = 20;
  c.seed = 42;
  return c;
}

EpisodeInput episode(int T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  EpisodeInput e;
  for (int t = 0; t < T; ++t) e.user_bits.push_back(static_cast<State>(rng() & 1u));
  return e;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("fdrl_test_" + name)).string();
}

}  // namespace

TEST(PolicyConfig, Validation) {
  PolicyConfig c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.embed_dim = 65;
  c.num_heads = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.num_layers = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.pad_ids = {0, 1, 2, 3, 4, 5};
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(init_policy(c), Error);
}

TEST(InitPolicy, DeterministicAndSeeded) {
  const auto a = init_policy(small_config());
  const auto b = init_policy(small_config());
  EXPECT_EQ(serialize_checkpoint(a), serialize_checkpoint(b));
  auto c2 = small_config();
  c2.seed = 43;
  EXPECT_NE(init_policy(c2).parameters, a.parameters);
}

TEST(InitPolicy, ParameterConventions) {
  const auto ckpt = init_policy(small_config());
  const ParamLayout layout(ckpt.config);
  double sum_sq = 0;
  long n = 0;
  for (const auto& p : layout.params()) {
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const float v = ckpt.parameters[static_cast<std::size_t>(p.offset + i)];
      if (p.is_gain()) {
        EXPECT_EQ(v, 1.0f) << p.name;
      } else if (!p.is_weight()) {
        EXPECT_EQ(v, 0.0f) << p.name;
      } else {
        sum_sq += static_cast<double>(v) * v;
        ++n;
      }
    }
  }
  EXPECT_NEAR(std::sqrt(sum_sq / static_cast<double>(n)), 0.02, 0.002);
}

TEST(Forward, Causality) {
  const Policy<double> policy(init_policy(small_config()));
  const auto ep = episode(12, 1);
  const TokenSequence tokens{1, 0, 2, 3, 0, 5, 4, 1, 0, 0, 2, 3};
  const Matrix<double> base = forward(policy, ep, tokens).logits();
  for (int t = 0; t < 12; ++t) {
    auto ep2 = ep;
    ep2.user_bits[static_cast<std::size_t>(t)] ^= 1u;
    auto tok2 = tokens;
    tok2[static_cast<std::size_t>(t)] = (tok2[static_cast<std::size_t>(t)] + 1) % 6;
    const Matrix<double> a = forward(policy, ep2, tokens).logits();
    const Matrix<double> b = forward(policy, ep, tok2).logits();
    // User bit t affects frames >= t; token t affects frames > t.
    EXPECT_EQ(a.leftCols(t), base.leftCols(t)) << t;
    EXPECT_EQ(b.leftCols(t + 1), base.leftCols(t + 1)) << t;
    if (t + 1 < 12) EXPECT_NE(b.col(t + 1), base.col(t + 1)) << t;
    EXPECT_NE(a.col(t), base.col(t)) << t;
  }
}

TEST(Forward, ZeroHeadGivesUniformStates) {
  auto ckpt = init_policy(small_config());
  const ParamLayout layout(ckpt.config);
  for (std::size_t idx : {layout.head_weight(), layout.head_bias()}) {
    const auto& p = layout[idx];
    std::fill_n(ckpt.parameters.begin() + p.offset, p.size(), 0.0f);
  }
  const Policy<double> policy(ckpt);
  const auto dec = forward(policy, episode(8, 2), TokenSequence{1, 2, 3, 4, 0, 5, 1, 2});
  for (Eigen::Index t = 0; t < 8; ++t) {
    const auto d = state_distribution(project_logits(dec.logits().col(t), policy.partition()));
    EXPECT_EQ(d.p_active(), 0.5);
  }
}

TEST(Forward, ReproducibleAndHorizonChecked) {
  const Policy<double> policy(init_policy(small_config()));
  const auto ep = episode(10, 3);
  const TokenSequence tokens{1, 2, 3, 4, 0, 5, 1, 2, 0, 0};
  const Matrix<double> a = forward(policy, ep, tokens).logits();
  const Matrix<double> b = forward(policy, ep, tokens).logits();
  EXPECT_EQ(a, b);
  EXPECT_THROW(forward(policy, episode(5, 3), tokens), RangeError);
  EXPECT_THROW(forward(policy, episode(25, 3), TokenSequence(25, 0)), RangeError);
}

TEST(Sampling, DeterministicAndRecordsOldLogProbs) {
  const Policy<double> policy(init_policy(small_config()));
  auto ep = episode(16, 4);
  ep.content_seed = 7;
  ep.forced_active_frames = 3;
  const auto r1 = sample_rollout(policy, ep, 1.0, 99);
  const auto r2 = sample_rollout(policy, ep, 1.0, 99);
  EXPECT_EQ(r1.tokens, r2.tokens);
  EXPECT_EQ(r1.state_logprobs_old, r2.state_logprobs_old);
  ASSERT_EQ(r1.size(), 16);
  EXPECT_EQ(r1.context_frames, 3);
  for (int t = 0; t < 3; ++t) EXPECT_EQ(r1.states[static_cast<std::size_t>(t)], kSpeech);
  EXPECT_EQ(r1.states, extract_states(r1.tokens, policy.partition()));

  const Matrix<double> z = forward(policy, ep, r1.tokens).logits();
  for (int t = 0; t < 16; ++t) {
    const auto ti = static_cast<std::size_t>(t);
    EXPECT_NEAR(r1.state_logprobs_old[ti], state_log_prob(z.col(t), policy.partition(), r1.states[ti]), 1e-9);
    EXPECT_NEAR(r1.token_logprobs_old[ti], log_softmax(z.col(t))(r1.tokens[ti]), 1e-9);
    EXPECT_LE(r1.state_logprobs_old[ti], 0.0);
    EXPECT_LE(r1.token_logprobs_old[ti], 0.0);
  }
}

TEST(Sampling, GreedyBelowThreshold) {
  const Policy<double> policy(init_policy(small_config()));
  const auto ep = episode(12, 5);
  const auto r = sample_rollout(policy, ep, 1e-7, 1);
  const auto r_other_seed = sample_rollout(policy, ep, 1e-7, 2);
  EXPECT_EQ(r.tokens, r_other_seed.tokens);
  const Matrix<double> z = forward(policy, ep, r.tokens).logits();
  for (int t = 0; t < 12; ++t) {
    Eigen::Index arg;
    z.col(t).maxCoeff(&arg);
    EXPECT_EQ(r.tokens[static_cast<std::size_t>(t)], arg);
  }
  EXPECT_THROW(sample_rollout(policy, ep, 0.0, 1), ConfigError);
}

TEST(LossAndGrad, ConstantLossHasZeroGradient) {
  const Policy<double> policy(init_policy(small_config()));
  Vector<double> grad;
  const double v = loss_and_grad(
      policy, episode(6, 6), TokenSequence{1, 2, 0, 3, 4, 5},
      [](const auto&, Matrix<double>& d) {
        d.setZero();
        return 3.0;
      },
      grad);
  EXPECT_EQ(v, 3.0);
  EXPECT_EQ(grad.size(), policy.layout().total_size());
  EXPECT_EQ(grad.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LossAndGrad, NonFiniteReportsFrame) {
  const Policy<double> policy(init_policy(small_config()));
  Vector<double> grad;
  try {
    loss_and_grad(
        policy, episode(6, 6), TokenSequence{1, 2, 0, 3, 4, 5},
        [](const auto&, Matrix<double>& d) {
          d.setZero();
          d(1, 4) = NAN;
          return 0.0;
        },
        grad);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("frame 4"), std::string::npos) << e.what();
  }
}

TEST(LossAndGrad, MatchesFiniteDifferencesOnSquaredLogits) {
  auto ckpt = init_policy(small_config());
  std::mt19937_64 rng(8);
  std::normal_distribution<float> n(0.0f, 0.3f);
  for (float& v : ckpt.parameters) v += n(rng);
  Policy<double> policy(ckpt);
  const auto ep = episode(7, 7);
  const TokenSequence tokens{1, 0, 2, 3, 5, 4, 1};
  auto loss = [](const auto& z, Matrix<double>& d) {
    d = z;
    return 0.5 * z.squaredNorm();
  };
  Vector<double> grad;
  loss_and_grad(policy, ep, tokens, loss, grad);
  const double h = 1e-5;
  for (int k = 0; k < 60; ++k) {
    const auto idx = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(grad.size()));
    Vector<double> g2;
    const double saved = policy.parameters()(idx);
    policy.parameters()(idx) = saved + h;
    const double up = loss_and_grad(policy, ep, tokens, loss, g2);
    policy.parameters()(idx) = saved - h;
    const double down = loss_and_grad(policy, ep, tokens, loss, g2);
    policy.parameters()(idx) = saved;
    const double numeric = (up - down) / (2 * h);
    EXPECT_LT(std::abs(numeric - grad(idx)) / std::max({std::abs(numeric), std::abs(grad(idx)), 1e-6}), 1e-4)
        << policy.layout()[policy.layout().owner(idx)].name;
  }
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
  const auto ckpt = init_policy(small_config());
  const std::string path = temp_path("roundtrip.ckpt");
  save_checkpoint(ckpt, path);
  const auto loaded = load_checkpoint(path);
  EXPECT_EQ(loaded, ckpt);
  const std::string path2 = temp_path("roundtrip2.ckpt");
  save_checkpoint(loaded, path2);
  EXPECT_EQ(read_file(path), read_file(path2));
  // Policy<double> round trip is exact because the values started as floats.
  EXPECT_EQ(Policy<double>(ckpt).checkpoint(), ckpt);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST(Checkpoint, FormatErrors) {
  const std::string bytes = serialize_checkpoint(init_policy(small_config()));
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad_magic), FormatError);
  std::string bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(deserialize_checkpoint(bad_version), FormatError);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), CorruptionError);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, 20)), CorruptionError);
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), CorruptionError);
  EXPECT_THROW(load_checkpoint(temp_path("does_not_exist.ckpt")), IoError);
}

TEST(Checkpoint, ShapeMismatchIsCorruption) {
  // Rewrite the first record's leading dimension (tok_emb rows = vocab + 1).
  const std::string bytes = serialize_checkpoint(init_policy(small_config()));
  const std::string name = "tok_emb";
  const auto pos = bytes.find(name);
  ASSERT_NE(pos, std::string::npos);
  std::string bad = bytes;
  const std::size_t dim0 = pos + name.size() + 4;  // after the dimension count
  bad[dim0] = static_cast<char>(bad[dim0] + 1);
  EXPECT_THROW(deserialize_checkpoint(bad), CorruptionError);
}
