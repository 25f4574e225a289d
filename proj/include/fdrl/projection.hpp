#pragma once

// Action space projection: collapse a logit vector over the token vocabulary
// onto two state logits (silence, speech) by summing raw logits per set, then
// normalise with a two-way softmax. Everything probability-valued is carried
// in log space.

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "fdrl/core.hpp"
#include "fdrl/error.hpp"

namespace fdrl {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct StateLogits {
  Scalar inactive;
  Scalar active;

  Scalar margin() const { return active - inactive; }
};

/// Two-way distribution over {silence, speech}. The log fields are the source
/// of truth; the linear fields are derived from them.
template <typename Scalar>
struct StateDistribution {
  Scalar log_inactive;
  Scalar log_active;

  Scalar p_inactive() const { return std::exp(log_inactive); }
  Scalar p_active() const { return std::exp(log_active); }
  Scalar log_prob(State s) const { return s == kSpeech ? log_active : log_inactive; }
};

/// log(sigmoid(x)) without overflow for large |x|.
template <typename Scalar>
Scalar log_sigmoid(Scalar x) {
  return x >= Scalar(0) ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Derived>
void check_logits(const Eigen::MatrixBase<Derived>& z, const VocabPartition& partition) {
  if (z.size() != partition.vocab_size()) {
    throw ShapeError("logit vector has " + std::to_string(z.size()) + " entries, vocabulary has " +
                     std::to_string(partition.vocab_size()));
  }
  if (!z.allFinite()) throw NumericError("non-finite logit");
}

/// Sums of raw logits over the pad and non-pad sets, in ascending id order.
template <typename Derived>
StateLogits<typename Derived::Scalar> project_logits(const Eigen::MatrixBase<Derived>& z,
                                                     const VocabPartition& partition) {
  using Scalar = typename Derived::Scalar;
  check_logits(z, partition);
  Scalar inactive(0), active(0);
  for (TokenId v = 0; v < partition.vocab_size(); ++v) {
    (partition.is_pad(v) ? inactive : active) += z(v);
  }
  return {inactive, active};
}

template <typename Scalar>
StateDistribution<Scalar> state_distribution(const StateLogits<Scalar>& sl) {
  const Scalar m = sl.margin();
  return {log_sigmoid(-m), log_sigmoid(m)};
}

template <typename Derived>
typename Derived::Scalar state_log_prob(const Eigen::MatrixBase<Derived>& z,
                                        const VocabPartition& partition, State s) {
  return state_distribution(project_logits(z, partition)).log_prob(s);
}

/// KL(p || q) for two-state distributions, exact closed form.
template <typename Scalar>
Scalar binary_kl(const StateDistribution<Scalar>& p, const StateDistribution<Scalar>& q) {
  const Scalar kl = p.p_inactive() * (p.log_inactive - q.log_inactive) +
                    p.p_active() * (p.log_active - q.log_active);
  // Rounding can leave a tiny negative residue near p == q.
  return kl > Scalar(0) ? kl : Scalar(0);
}

/// Numerically stable log-softmax.
template <typename Derived>
Vector<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  const Scalar mx = z.maxCoeff();
  const Scalar lse = mx + std::log((z.array() - mx).exp().sum());
  return (z.array() - lse).matrix();
}

/// KL(softmax(p) || softmax(q)) over the full vocabulary.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar categorical_kl(const Eigen::MatrixBase<DerivedP>& p_logits,
                                         const Eigen::MatrixBase<DerivedQ>& q_logits) {
  if (p_logits.size() != q_logits.size()) {
    throw ShapeError("categorical_kl: logit vectors differ in length (" +
                     std::to_string(p_logits.size()) + " vs " + std::to_string(q_logits.size()) + ")");
  }
  if (!p_logits.allFinite() || !q_logits.allFinite()) throw NumericError("non-finite logit");
  const auto lp = log_softmax(p_logits);
  const auto lq = log_softmax(q_logits);
  const auto kl = (lp.array().exp() * (lp - lq).array()).sum();
  return kl > 0 ? kl : decltype(kl)(0);
}

}  // namespace fdrl
