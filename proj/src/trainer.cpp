#include "fdrl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "fdrl/error.hpp"
#include "fdrl/io.hpp"

namespace fdrl {

Objective parse_objective(const std::string& name) {
  if (name == "aspirin" || name == "projected") return Objective::kProjected;
  if (name == "standard" || name == "standard_grpo") return Objective::kStandard;
  throw ConfigError("unknown objective '" + name + "' (expected aspirin or standard)");
}

std::string to_string(Objective objective) {
  return objective == Objective::kProjected ? "aspirin" : "standard_grpo";
}

void TrainConfig::validate() const {
  if (group_size < 2) throw ConfigError("group_size must be at least 2");
  if (!(kl_beta >= 0.0)) throw ConfigError("kl_beta must be non-negative");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (inner_epochs < 1) throw ConfigError("inner_epochs must be at least 1");
  if (steps < 0) throw ConfigError("steps must be non-negative");
  if (!(grad_clip_norm > 0.0)) throw ConfigError("grad_clip_norm must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  reward.validate();
}

AdamOptimizer::AdamOptimizer(Eigen::Index size, double learning_rate, double clip_norm)
    : lr_(learning_rate), clip_(clip_norm), m_(Vector<double>::Zero(size)), v_(Vector<double>::Zero(size)) {}

double AdamOptimizer::step(Vector<double>& params, Vector<double>& grad) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  const double norm = grad.norm();
  if (norm > clip_) grad *= clip_ / norm;
  ++t_;
  m_ = kBeta1 * m_ + (1.0 - kBeta1) * grad;
  v_ = kBeta2 * v_ + (1.0 - kBeta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + kEps);
  return norm;
}

Trainer::Trainer(const PolicyCheckpoint& init, TrainConfig cfg)
    : cfg_(std::move(cfg)),
      policy_(init),
      ref_(init),
      adam_(policy_.layout().total_size(), cfg_.learning_rate, cfg_.grad_clip_norm) {
  cfg_.validate();
}

RolloutGroup Trainer::sample_group(const TrainingEpisode& episode, std::uint64_t seed,
                                   std::vector<std::optional<Decoder<double>>>* caches) const {
  RolloutGroup g;
  g.episode = episode.input;
  g.user = episode.user;
  const auto G = static_cast<std::size_t>(cfg_.group_size);
  if (caches) caches->assign(G, std::nullopt);
  std::vector<double> rewards;
  for (std::size_t i = 0; i < G; ++i) {
    g.rollouts.push_back(sample_rollout(policy_, g.episode, cfg_.temperature, mix_seed(seed, i),
                                        caches ? &(*caches)[i] : nullptr));
    g.breakdowns.push_back(total_reward(g.rollouts.back().states, g.user, cfg_.reward));
    rewards.push_back(g.breakdowns.back().r_total);
  }
  g.advantages = group_advantages(rewards);
  return g;
}

TrainLogRow Trainer::step(std::span<const TrainingEpisode> batch) {
  if (batch.empty()) throw EmptyInputError("training batch is empty");
  const std::uint64_t step_seed = mix_seed(cfg_.seed, static_cast<std::uint64_t>(step_) + 1);
  const auto B = batch.size();

  std::vector<RolloutGroup> groups;
  std::vector<std::vector<std::optional<Decoder<double>>>> caches(B);
  std::vector<std::vector<Matrix<double>>> ref_logits(B);
  TrainLogRow row;
  row.step = step_;
  double n_rollouts = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    groups.push_back(sample_group(batch[b], mix_seed(step_seed, b), &caches[b]));
    for (const auto& r : groups.back().rollouts) {
      ref_logits[b].push_back(forward(ref_, groups.back().episode, r.tokens).logits());
    }
    for (const auto& br : groups.back().breakdowns) {
      row.mean_r_total += br.r_total;
      row.mean_r_int += br.r_int;
      row.mean_r_re += br.r_re;
      n_rollouts += 1.0;
    }
  }
  row.mean_r_total /= n_rollouts;
  row.mean_r_int /= n_rollouts;
  row.mean_r_re /= n_rollouts;

  Vector<double> grad(policy_.layout().total_size());
  for (int epoch = 0; epoch < cfg_.inner_epochs; ++epoch) {
    grad.setZero();
    LossStats stats;
    double loss = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      // The sampling decoders hold the current parameters only before the first update.
      const auto* current = epoch == 0 ? &caches[b] : nullptr;
      const LossStats s =
          group_objective(cfg_.objective, groups[b], policy_, ref_, cfg_.kl_beta, &grad, current, &ref_logits[b]);
      loss += s.loss;
      stats += s;
    }
    // Mean over groups.
    grad /= static_cast<double>(B);
    if (!grad.allFinite()) throw NumericError("non-finite gradient at step " + std::to_string(step_));
    if (epoch == 0) {
      row.loss = loss / static_cast<double>(B);
      row.mean_kl = stats.kl_sum / static_cast<double>(stats.frames);
      row.mean_ratio = stats.ratio_sum / static_cast<double>(stats.frames);
    }
    adam_.step(policy_.parameters(), grad);
    if (epoch == 0) {
      for (auto& c : caches) c.clear();
    }
  }
  ++step_;
  return row;
}

TrainResult train(const PolicyCheckpoint& init, const TrainConfig& cfg, std::span<const TrainingEpisode> episodes,
                  const std::function<void(const TrainLogRow&)>& on_row) {
  cfg.validate();
  if (episodes.empty() && cfg.steps > 0) throw EmptyInputError("no training episodes");
  Trainer trainer(init, cfg);
  TrainResult result{init, init, {}};
  std::vector<std::size_t> order(episodes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0xE915u));
  std::size_t cursor = order.size();
  std::vector<TrainingEpisode> batch;
  for (int s = 0; s < cfg.steps; ++s) {
    batch.clear();
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        cursor = 0;
      }
      batch.push_back(episodes[order[cursor++]]);
    }
    try {
      result.log.push_back(trainer.step(batch));
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(s) + ": " + e.what());
    }
    if (on_row) on_row(result.log.back());
  }
  if (cfg.steps > 0) result.final = trainer.policy().checkpoint();
  return result;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string train_log_csv(std::span<const TrainLogRow> rows) {
  std::string out = std::string(kTrainLogHeader) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step) + "," + fmt_double(r.mean_r_total) + "," + fmt_double(r.mean_r_int) + "," +
           fmt_double(r.mean_r_re) + "," + fmt_double(r.loss) + "," + fmt_double(r.mean_kl) + "," +
           fmt_double(r.mean_ratio) + "\n";
  }
  return out;
}

std::string reward_curve_csv(std::span<const TrainLogRow> rows) {
  std::string out = std::string(kRewardCurveHeader) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step) + "," + fmt_double(r.mean_r_int) + "," + fmt_double(r.mean_r_re) + "," +
           fmt_double(r.mean_r_total) + "\n";
  }
  return out;
}

void write_train_outputs(const TrainResult& result, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  const std::filesystem::path base(dir);
  save_checkpoint(result.initial, (base / "initial.ckpt").string());
  save_checkpoint(result.final, (base / "final.ckpt").string());
  write_file_atomic((base / "train_log.csv").string(), train_log_csv(result.log));
  write_file_atomic((base / "reward_curve.csv").string(), reward_curve_csv(result.log));
}

}  // namespace fdrl
