#pragma once

// Finite-difference verification of both objectives' analytic gradients on a
// small random instance where the current, sampling and reference parameters
// all differ.

#include <cstdint>
#include <string>
#include <vector>

#include "fdrl/objective.hpp"

namespace fdrl {

struct GradcheckConfig {
  std::uint64_t seed = 0;
  int samples = 64;          // parameters probed per objective
  double step = 1e-3;        // central-difference step
  double tolerance = 1e-4;   // max relative error
  double kl_beta = 0.05;
  // Relative errors use max(|analytic|, |numeric|, abs_floor) as denominator
  // so that near-zero entries are judged on an absolute scale.
  double abs_floor = 1e-6;
  // Scales the analytic gradient by 1.01 to prove the check can fail.
  bool corrupt = false;
};

struct GroupError {
  std::string group;  // parameter tensor name
  int checked = 0;
  double max_rel_error = 0.0;
};

struct ObjectiveCheck {
  Objective objective = Objective::kProjected;
  std::vector<GroupError> groups;
  double max_rel_error = 0.0;
  // Largest spread of d(loss)/d(logit) inside one vocabulary set at one frame.
  double max_within_set_spread = 0.0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<ObjectiveCheck> checks;
  double tolerance = 0.0;
  bool passed = false;
};

/// A random objective instance: rollouts sampled from `old`, scored with
/// distinct rewards, evaluated at `current` against `ref`.
struct ObjectiveFixture {
  PolicyCheckpoint current, old, ref;
  RolloutGroup group;
};

/// Tiny policy (6 tokens, pads {0, 5}), `group_size` rollouts of `horizon`
/// frames with a 2-frame forced context. Parameters of `current` and `old`
/// are Gaussian perturbations of `ref` with standard deviation `perturb`.
ObjectiveFixture make_objective_fixture(std::uint64_t seed, int group_size = 3, int horizon = 12,
                                        double perturb = 0.1);

GradcheckReport run_gradcheck(const GradcheckConfig& cfg);

/// Human-readable summary, one line per parameter group.
std::string format_gradcheck(const GradcheckReport& report);

/// Largest within-set spread of per-frame logit gradients of `objective` over
/// every rollout in `group`.
double within_set_spread(Objective objective, const RolloutGroup& group, const Policy<double>& policy,
                         const Policy<double>& ref_policy, double beta);

}  // namespace fdrl
