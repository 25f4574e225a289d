#include "fdrl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>

namespace fdrl {

namespace {

PolicyCheckpoint perturbed(const PolicyCheckpoint& base, std::uint64_t seed, double stddev) {
  PolicyCheckpoint out = base;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, stddev);
  for (float& v : out.parameters) v = static_cast<float>(v + noise(rng));
  return out;
}

}  // namespace

ObjectiveFixture make_objective_fixture(std::uint64_t seed, int group_size, int horizon, double perturb) {
  PolicyConfig pc;
  pc.vocab_size = 6;
  pc.pad_ids = {0, 5};
  pc.embed_dim = 8;
  pc.num_layers = 2;
  pc.num_heads = 2;
  pc.mlp_ratio = 2;
  pc.max_horizon = horizon;
  pc.seed = seed;
  ObjectiveFixture f;
  // Larger init scale than training so the logits are far from uniform.
  f.ref = perturbed(init_policy(pc), mix_seed(seed, 1), 0.3);
  f.old = perturbed(f.ref, mix_seed(seed, 2), perturb);
  f.current = perturbed(f.old, mix_seed(seed, 3), perturb);

  std::mt19937_64 rng(mix_seed(seed, 4));
  EpisodeInput ep;
  for (int t = 0; t < horizon; ++t) ep.user_bits.push_back(static_cast<State>(rng() & 1u));
  ep.content_seed = static_cast<int>(rng() % 1000);
  ep.forced_active_frames = 2;

  const Policy<double> old(f.old);
  f.group.episode = ep;
  std::vector<double> rewards;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < group_size; ++i) {
    f.group.rollouts.push_back(sample_rollout(old, ep, 1.0, mix_seed(seed, 10 + static_cast<std::uint64_t>(i))));
    rewards.push_back(unit(rng));
  }
  f.group.advantages = group_advantages(rewards);
  return f;
}

double within_set_spread(Objective objective, const RolloutGroup& group, const Policy<double>& policy,
                         const Policy<double>& ref_policy, double beta) {
  const double norm = group_norm(group);
  const auto& part = policy.partition();
  double spread = 0.0;
  Matrix<double> dlogits;
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    const auto& r = group.rollouts[i];
    const auto dec = forward(policy, group.episode, r.tokens);
    const Matrix<double> ref_z = forward(ref_policy, group.episode, r.tokens).logits();
    rollout_objective<double>(objective, dec.logits(), ref_z, r, group.advantages.advantages[i], beta, norm, part,
                              &dlogits);
    for (Eigen::Index t = 0; t < dlogits.cols(); ++t) {
      for (const auto* ids : {&part.pad_ids(), &part.non_pad_ids()}) {
        double lo = dlogits((*ids)[0], t), hi = lo;
        for (TokenId v : *ids) {
          lo = std::min(lo, dlogits(v, t));
          hi = std::max(hi, dlogits(v, t));
        }
        spread = std::max(spread, hi - lo);
      }
    }
  }
  return spread;
}

GradcheckReport run_gradcheck(const GradcheckConfig& cfg) {
  if (cfg.samples < 1) throw ConfigError("gradcheck needs at least one sample");
  if (!(cfg.step > 0.0)) throw ConfigError("gradcheck step must be positive");
  const ObjectiveFixture f = make_objective_fixture(cfg.seed);
  const Policy<double> ref(f.ref);
  Policy<double> policy(f.current);
  const auto& layout = policy.layout();

  std::vector<Matrix<double>> ref_logits;
  for (const auto& r : f.group.rollouts) ref_logits.push_back(forward(ref, f.group.episode, r.tokens).logits());

  // Probe every tensor in turn, at a random entry.
  std::mt19937_64 rng(mix_seed(cfg.seed, 99));
  std::vector<std::pair<std::size_t, Eigen::Index>> probes;
  for (int k = 0; k < cfg.samples; ++k) {
    const std::size_t tensor = static_cast<std::size_t>(k) % layout.count();
    const auto& info = layout[tensor];
    probes.emplace_back(tensor, info.offset + static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(info.size())));
  }

  GradcheckReport report;
  report.tolerance = cfg.tolerance;
  report.passed = true;
  for (Objective objective : {Objective::kProjected, Objective::kStandard}) {
    auto loss_at = [&](const Policy<double>& p) {
      return group_objective<double>(objective, f.group, p, ref, cfg.kl_beta, nullptr, nullptr, &ref_logits).loss;
    };
    Vector<double> grad = Vector<double>::Zero(layout.total_size());
    group_objective<double>(objective, f.group, policy, ref, cfg.kl_beta, &grad, nullptr, &ref_logits);
    if (cfg.corrupt) grad *= 1.01;

    ObjectiveCheck check;
    check.objective = objective;
    std::map<std::size_t, GroupError> groups;
    for (const auto& [tensor, idx] : probes) {
      const double saved = policy.parameters()(idx);
      policy.parameters()(idx) = saved + cfg.step;
      const double up = loss_at(policy);
      policy.parameters()(idx) = saved - cfg.step;
      const double down = loss_at(policy);
      policy.parameters()(idx) = saved;
      const double numeric = (up - down) / (2.0 * cfg.step);
      const double analytic = grad(idx);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), cfg.abs_floor});
      const double rel = std::abs(analytic - numeric) / denom;
      auto& g = groups[tensor];
      g.group = layout[tensor].name;
      ++g.checked;
      g.max_rel_error = std::max(g.max_rel_error, rel);
      check.max_rel_error = std::max(check.max_rel_error, rel);
    }
    for (auto& [tensor, g] : groups) check.groups.push_back(g);
    check.passed = check.max_rel_error < cfg.tolerance;
    if (objective == Objective::kProjected) {
      check.max_within_set_spread = within_set_spread(objective, f.group, policy, ref, cfg.kl_beta);
      check.passed = check.passed && check.max_within_set_spread <= 1e-9;
    }
    report.passed = report.passed && check.passed;
    report.checks.push_back(std::move(check));
  }
  return report;
}

std::string format_gradcheck(const GradcheckReport& report) {
  std::string out;
  char buf[160];
  for (const auto& c : report.checks) {
    std::snprintf(buf, sizeof buf, "%s: max relative error %.3e (tolerance %.1e) %s\n", to_string(c.objective).c_str(),
                  c.max_rel_error, report.tolerance, c.passed ? "ok" : "FAILED");
    out += buf;
    for (const auto& g : c.groups) {
      std::snprintf(buf, sizeof buf, "  %-24s n=%d max_rel=%.3e\n", g.group.c_str(), g.checked, g.max_rel_error);
      out += buf;
    }
    if (c.objective == Objective::kProjected) {
      std::snprintf(buf, sizeof buf, "  within-set logit gradient spread %.3e\n", c.max_within_set_spread);
      out += buf;
    }
  }
  out += report.passed ? "gradcheck passed\n" : "gradcheck FAILED\n";
  return out;
}

}  // namespace fdrl
