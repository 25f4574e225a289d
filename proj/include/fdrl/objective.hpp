#pragma once

// Group-relative policy objectives over a group of sampled rollouts.
//
// Both objectives share the same rewards, advantages and token-pooled
// normalisation 1 / sum_i |s_i|. They differ in which policy the ratio and KL
// act on:
//   projected: the two-state speech/silence policy from project_logits,
//              with the closed-form binary KL to the reference;
//   standard:  the full-vocabulary token policy with the categorical KL.
// There is no ratio clipping. The old-policy log-probabilities are the values
// recorded at sampling time and are treated as constants.

#include <optional>
#include <string>
#include <vector>

#include "fdrl/policy.hpp"
#include "fdrl/projection.hpp"
#include "fdrl/reward.hpp"

namespace fdrl {

enum class Objective { kProjected, kStandard };

/// Accepts "aspirin"/"projected" and "standard"/"standard_grpo".
Objective parse_objective(const std::string& name);
std::string to_string(Objective objective);

struct RolloutGroup {
  EpisodeInput episode;
  IntervalSet user;
  std::vector<Rollout> rollouts;
  std::vector<RewardBreakdown> breakdowns;
  AdvantageSet advantages;
};

/// Loss value plus the per-frame telemetry summed over trainable frames.
struct LossStats {
  double loss = 0.0;
  double kl_sum = 0.0;
  double ratio_sum = 0.0;
  long frames = 0;

  LossStats& operator+=(const LossStats& o) {
    loss += o.loss;
    kl_sum += o.kl_sum;
    ratio_sum += o.ratio_sum;
    frames += o.frames;
    return *this;
  }
};

/// One rollout's contribution to a group loss, as a function of its logits.
/// `norm` is the group's pooled trainable-frame count. When `dlogits` is
/// non-null it receives d(loss)/d(logits) (vocab x frames, zero on context
/// frames).
template <typename Scalar, typename DerivedZ, typename DerivedR>
LossStats rollout_objective(Objective objective, const Eigen::MatrixBase<DerivedZ>& logits,
                            const Eigen::MatrixBase<DerivedR>& ref_logits, const Rollout& rollout,
                            double advantage, double beta, double norm, const VocabPartition& partition,
                            Matrix<Scalar>* dlogits) {
  const int T = rollout.size();
  if (logits.cols() != T || ref_logits.cols() != T || logits.rows() != partition.vocab_size() ||
      ref_logits.rows() != partition.vocab_size()) {
    throw ShapeError("rollout logits do not match the rollout length or vocabulary");
  }
  if (dlogits) *dlogits = Matrix<Scalar>::Zero(logits.rows(), T);
  const Scalar A = static_cast<Scalar>(advantage);
  const Scalar b = static_cast<Scalar>(beta);
  const Scalar inv_norm = Scalar(1) / static_cast<Scalar>(norm);
  LossStats stats;
  for (int t = rollout.context_frames; t < T; ++t) {
    const auto z = logits.col(t);
    const auto zr = ref_logits.col(t);
    if (!z.allFinite() || !zr.allFinite()) throw NumericError("non-finite logits at frame " + std::to_string(t));
    const auto ti = static_cast<std::size_t>(t);
    Scalar ratio, kl;
    if (objective == Objective::kProjected) {
      const State s = rollout.states[ti];
      const auto cur = state_distribution(project_logits(z, partition));
      const auto ref = state_distribution(project_logits(zr, partition));
      ratio = std::exp(cur.log_prob(s) - static_cast<Scalar>(rollout.state_logprobs_old[ti]));
      kl = binary_kl(cur, ref);
      if (dlogits) {
        const Scalar p1 = cur.p_active(), p0 = cur.p_inactive();
        const Scalar d_ratio = ratio * ((s == kSpeech ? Scalar(1) : Scalar(0)) - p1);
        const Scalar d_kl = p1 * p0 * ((cur.log_active - ref.log_active) - (cur.log_inactive - ref.log_inactive));
        // The loss depends on z only through the two set sums, so every id in
        // a set receives the same gradient.
        const Scalar d_margin = -(A * d_ratio - b * d_kl) * inv_norm;
        for (TokenId v = 0; v < partition.vocab_size(); ++v) {
          (*dlogits)(v, t) = partition.is_pad(v) ? -d_margin : d_margin;
        }
      }
    } else {
      const TokenId y = rollout.tokens[ti];
      const Vector<Scalar> lp = log_softmax(z);
      const Vector<Scalar> lq = log_softmax(zr);
      const Vector<Scalar> p = lp.array().exp();
      ratio = std::exp(lp(y) - static_cast<Scalar>(rollout.token_logprobs_old[ti]));
      const Scalar kl_raw = (p.array() * (lp - lq).array()).sum();
      kl = kl_raw > Scalar(0) ? kl_raw : Scalar(0);
      if (dlogits) {
        Vector<Scalar> d_ratio = -ratio * p;
        d_ratio(y) += ratio;
        const Vector<Scalar> d_kl = p.array() * ((lp - lq).array() - kl_raw);
        dlogits->col(t) = -(A * d_ratio - b * d_kl) * inv_norm;
      }
    }
    if (!std::isfinite(static_cast<double>(ratio)) || !std::isfinite(static_cast<double>(kl))) {
      throw NumericError("non-finite ratio or KL at frame " + std::to_string(t));
    }
    stats.loss -= static_cast<double>((A * ratio - b * kl) * inv_norm);
    stats.kl_sum += static_cast<double>(kl);
    stats.ratio_sum += static_cast<double>(ratio);
    ++stats.frames;
  }
  return stats;
}

/// Pooled trainable-frame count of a group.
inline double group_norm(const RolloutGroup& group) {
  long n = 0;
  for (const auto& r : group.rollouts) n += r.trainable_frames();
  if (n <= 0) throw ShapeError("rollout group has no trainable frames");
  return static_cast<double>(n);
}

/// Full group loss. If `grad` is non-null the parameter gradient is added to
/// it. `current` optionally supplies decoders already run over each rollout
/// with the current parameters, and `ref_logits` the reference logits.
template <typename Scalar>
LossStats group_objective(Objective objective, const RolloutGroup& group, const Policy<Scalar>& policy,
                          const Policy<Scalar>& ref_policy, double beta, Vector<Scalar>* grad,
                          const std::vector<std::optional<Decoder<Scalar>>>* current = nullptr,
                          const std::vector<Matrix<Scalar>>* ref_logits = nullptr) {
  const std::size_t G = group.rollouts.size();
  if (G < 2 || group.advantages.advantages.size() != G) {
    throw ShapeError("rollout group needs at least 2 rollouts with one advantage each");
  }
  const double norm = group_norm(group);
  LossStats total;
  Matrix<Scalar> dlogits;
  for (std::size_t i = 0; i < G; ++i) {
    const auto& r = group.rollouts[i];
    std::optional<Decoder<Scalar>> fresh;
    const Decoder<Scalar>* dec = nullptr;
    if (current && (*current)[i]) {
      dec = &*(*current)[i];
    } else {
      fresh.emplace(forward(policy, group.episode, r.tokens));
      dec = &*fresh;
    }
    Matrix<Scalar> ref_z;
    if (ref_logits) {
      ref_z = (*ref_logits)[i];
    } else {
      ref_z = forward(ref_policy, group.episode, r.tokens).logits();
    }
    total += rollout_objective<Scalar>(objective, dec->logits(), ref_z, r, group.advantages.advantages[i], beta,
                                       norm, policy.partition(), grad ? &dlogits : nullptr);
    if (grad) dec->backward(dlogits, *grad);
  }
  return total;
}

template <typename Scalar>
double projected_grpo_loss(const RolloutGroup& group, const Policy<Scalar>& policy,
                           const Policy<Scalar>& ref_policy, double beta) {
  return group_objective(Objective::kProjected, group, policy, ref_policy, beta,
                         static_cast<Vector<Scalar>*>(nullptr))
      .loss;
}

template <typename Scalar>
double standard_grpo_loss(const RolloutGroup& group, const Policy<Scalar>& policy,
                          const Policy<Scalar>& ref_policy, double beta) {
  return group_objective(Objective::kStandard, group, policy, ref_policy, beta,
                         static_cast<Vector<Scalar>*>(nullptr))
      .loss;
}

}  // namespace fdrl
