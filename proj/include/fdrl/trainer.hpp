#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fdrl/objective.hpp"
#include "fdrl/policy.hpp"
#include "fdrl/reward.hpp"

namespace fdrl {

struct TrainConfig {
  int group_size = 2;
  double kl_beta = 0.001;
  double learning_rate = 1e-3;
  int inner_epochs = 1;
  int steps = 100;
  double grad_clip_norm = 1.0;
  int batch_size = 8;  // episodes per step
  double temperature = 1.0;
  RewardConfig reward;
  Objective objective = Objective::kProjected;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainLogRow {
  int step = 0;
  double mean_r_total = 0.0;
  double mean_r_int = 0.0;
  double mean_r_re = 0.0;
  double loss = 0.0;
  double mean_kl = 0.0;
  double mean_ratio = 0.0;
};

inline constexpr const char* kTrainLogHeader = "step,mean_r_total,mean_r_int,mean_r_re,loss,mean_kl,mean_ratio";
inline constexpr const char* kRewardCurveHeader = "step,mean_r_int,mean_r_re,mean_r_total";

/// An episode ready for training: model conditioning plus the user speech
/// the rewards are scored against.
struct TrainingEpisode {
  std::string id;
  EpisodeInput input;
  IntervalSet user;
};

/// Adam with bias correction (0.9 / 0.999 / 1e-8) after global-norm clipping.
class AdamOptimizer {
 public:
  AdamOptimizer(Eigen::Index size, double learning_rate, double clip_norm);

  /// Clips `grad` in place and updates `params`. Returns the pre-clip norm.
  double step(Vector<double>& params, Vector<double>& grad);

 private:
  double lr_, clip_;
  long t_ = 0;
  Vector<double> m_, v_;
};

/// Owns the trainable policy, the frozen reference and the optimizer state.
class Trainer {
 public:
  /// The reference policy is `init`, fixed for the whole run.
  Trainer(const PolicyCheckpoint& init, TrainConfig cfg);

  /// Samples G rollouts from the current policy and scores them.
  RolloutGroup sample_group(const TrainingEpisode& episode, std::uint64_t seed,
                            std::vector<std::optional<Decoder<double>>>* caches = nullptr) const;

  /// One optimisation step on a batch of episodes.
  TrainLogRow step(std::span<const TrainingEpisode> batch);

  const Policy<double>& policy() const { return policy_; }
  Policy<double>& policy() { return policy_; }
  const Policy<double>& ref_policy() const { return ref_; }
  const TrainConfig& config() const { return cfg_; }
  int steps_done() const { return step_; }

 private:
  TrainConfig cfg_;
  Policy<double> policy_;
  Policy<double> ref_;
  AdamOptimizer adam_;
  int step_ = 0;
};

struct TrainResult {
  PolicyCheckpoint initial;
  PolicyCheckpoint final;
  std::vector<TrainLogRow> log;
};

/// Runs cfg.steps steps; each step draws batch_size episodes from a seeded
/// shuffle of `episodes`, cycling epoch by epoch.
TrainResult train(const PolicyCheckpoint& init, const TrainConfig& cfg, std::span<const TrainingEpisode> episodes,
                  const std::function<void(const TrainLogRow&)>& on_row = {});

std::string train_log_csv(std::span<const TrainLogRow> rows);
std::string reward_curve_csv(std::span<const TrainLogRow> rows);

/// Writes initial.ckpt, final.ckpt, train_log.csv and reward_curve.csv into `dir`.
void write_train_outputs(const TrainResult& result, const std::string& dir);

}  // namespace fdrl
