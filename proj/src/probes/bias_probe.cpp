#include "gpl/probes/bias_probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace gpl::probes {

std::string to_string(Correction c) {
  return c == Correction::raw ? "raw" : "entropy-corrected";
}

Correction parse_correction(const std::string& s) {
  if (s == "raw") return Correction::raw;
  if (s == "entropy-corrected" || s == "entropy") return Correction::entropy_corrected;
  throw std::invalid_argument("unknown bias correction '" + s +
                              "' (expected raw or entropy-corrected)");
}

void BiasProbeConfig::validate() const {
  if (episodes < 1) throw std::invalid_argument("bias probe: episodes must be >= 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("bias probe: gamma must lie in [0, 1)");
  }
}

std::vector<Rollout> collect_rollouts(policy::GaussianPolicy& policy, env::Environment& env,
                                      int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("collect_rollouts: episodes must be >= 1");
  const auto& spec = env.spec();
  Rng rng(seed);
  std::vector<Rollout> out;
  out.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    std::vector<Eigen::VectorXd> s, a;
    std::vector<double> r, lp;
    Eigen::VectorXd state = env.reset(rng.next_seed());
    for (;;) {
      policy::SampledAction act = policy.sample(state, rng);
      env::StepResult sr = env.step(act.action);
      s.push_back(state);
      a.push_back(std::move(act.action));
      r.push_back(sr.reward);
      lp.push_back(act.log_prob);
      if (sr.terminal || sr.truncated) break;
      state = std::move(sr.next_state);
    }
    const auto n = static_cast<Eigen::Index>(r.size());
    Rollout ro;
    ro.states.resize(n, spec.state_dim);
    ro.actions.resize(n, spec.action_dim);
    for (Eigen::Index t = 0; t < n; ++t) {
      ro.states.row(t) = s[static_cast<std::size_t>(t)].transpose();
      ro.actions.row(t) = a[static_cast<std::size_t>(t)].transpose();
    }
    ro.rewards = Eigen::Map<const Eigen::VectorXd>(r.data(), n);
    ro.log_probs = Eigen::Map<const Eigen::VectorXd>(lp.data(), n);
    out.push_back(std::move(ro));
  }
  return out;
}

namespace {

Eigen::VectorXd discount(const Eigen::VectorXd& x, double gamma) {
  Eigen::VectorXd g(x.size());
  double acc = 0.0;
  for (Eigen::Index t = x.size() - 1; t >= 0; --t) {
    acc = x(t) + gamma * acc;
    g(t) = acc;
  }
  return g;
}

}  // namespace

Eigen::VectorXd discounted_returns(const Rollout& r, double gamma, double alpha,
                                   Correction correction) {
  if (correction == Correction::raw) return discount(r.rewards, gamma);
  return discount(r.rewards - alpha * r.log_probs, gamma);
}

Eigen::VectorXd discounted_log_probs(const Rollout& r, double gamma) {
  return discount(r.log_probs, gamma);
}

BiasProbeResult bias_from_rollouts(const std::vector<Rollout>& rollouts, const ValueFn& value,
                                   double gamma, double alpha, Correction correction) {
  if (rollouts.empty()) throw std::invalid_argument("bias probe: no rollouts");
  BiasProbeResult res;
  double pred = 0.0, ret = 0.0, dlp = 0.0;
  for (const Rollout& r : rollouts) {
    const Eigen::VectorXd q = value(r.states, r.actions);
    if (q.size() != r.rewards.size()) {
      throw std::invalid_argument("bias probe: value function returned " +
                                  std::to_string(q.size()) + " predictions for " +
                                  std::to_string(r.rewards.size()) + " pairs");
    }
    pred += q.sum();
    ret += discounted_returns(r, gamma, alpha, correction).sum();
    dlp += discounted_log_probs(r, gamma).sum();
    res.pairs += r.rewards.size();
  }
  if (res.pairs == 0) throw std::invalid_argument("bias probe: empty rollouts");
  const auto n = static_cast<double>(res.pairs);
  res.mean_prediction = pred / n;
  res.mean_return = ret / n;
  res.mean_discounted_log_prob = dlp / n;
  res.estimate.value = res.mean_prediction - res.mean_return;
  if (!std::isfinite(res.estimate.value)) {
    throw critic::NonFiniteError("bias probe: non-finite estimate");
  }
  return res;
}

ValueFn critic_mean(critic::EnsembleCritic& critic) {
  return [&critic](const Eigen::MatrixXd& s, const Eigen::MatrixXd& a) -> Eigen::VectorXd {
    return critic.values(s, a, critic::Network::online).rowwise().mean();
  };
}

BiasProbeResult rollout_bias_probe(agent::Agent& agent, const BiasProbeConfig& config) {
  config.validate();
  auto env = agent.make_env();
  const auto rollouts = collect_rollouts(agent.policy(), *env, config.episodes, config.seed);
  return bias_from_rollouts(rollouts, critic_mean(agent.critic()), config.gamma, agent.alpha(),
                            config.correction);
}

std::string arm_label(const BetaArm& arm) {
  if (!arm) return "dual";
  char buf[40];
  std::snprintf(buf, sizeof buf, "fixed_%g", *arm);
  return buf;
}

agent::AgentConfig arm_config(agent::AgentConfig base, const BetaArm& arm, std::uint64_t seed) {
  base.seed = seed;
  if (arm) {
    base.penalty.beta_source = critic::BetaSource::fixed;
    base.penalty.beta = *arm;
  } else {
    base.penalty.beta_source = critic::BetaSource::dual;
  }
  return base;
}

BiasTrajectory tracked_run(const agent::AgentConfig& config, const ProbeSchedule& schedule,
                           const std::string& label, agent::RunMetrics* metrics) {
  if (schedule.interval < 1) throw std::invalid_argument("probe interval must be >= 1");
  schedule.probe.validate();
  BiasTrajectory traj;
  traj.label = label;
  traj.seed = config.seed;
  agent::Agent ag(config);
  agent::RunMetrics local;
  ag.train(metrics ? *metrics : local, [&](agent::Agent& a) {
    const std::int64_t step = a.steps_done();
    if (step % schedule.interval != 0) return;
    BiasProbeConfig pc = schedule.probe;
    pc.seed = schedule.probe.seed + static_cast<std::uint64_t>(step);
    traj.steps.push_back(step);
    traj.bias.push_back(rollout_bias_probe(a, pc).estimate.value);
  });
  double sum = 0.0, abs_sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    if (traj.steps[i] <= config.warmup_steps) continue;
    sum += traj.bias[i];
    abs_sum += std::abs(traj.bias[i]);
    ++n;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  traj.time_average = n ? sum / n : nan;
  traj.time_average_abs = n ? abs_sum / n : nan;
  return traj;
}

void FixedBetaExperiment::validate() const {
  const auto has = [&](double b) {
    return std::any_of(arms.begin(), arms.end(), [b](const BetaArm& a) { return a && *a == b; });
  };
  if (!has(0.0) || !has(0.5)) {
    throw std::invalid_argument("fixed-beta experiment: arms must include fixed 0 and 0.5");
  }
  if (seeds.empty()) throw std::invalid_argument("fixed-beta experiment: no seeds");
  if (steps < 1) throw std::invalid_argument("fixed-beta experiment: steps must be >= 1");
}

std::vector<BiasTrajectory> fixed_beta_bias_experiment(const FixedBetaExperiment& e) {
  e.validate();
  std::vector<BiasTrajectory> out;
  for (const BetaArm& arm : e.arms) {
    for (std::uint64_t seed : e.seeds) {
      agent::AgentConfig c = arm_config(e.base, arm, seed);
      c.total_steps = e.steps;
      out.push_back(tracked_run(c, e.schedule, arm_label(arm)));
    }
  }
  return out;
}

}  // namespace gpl::probes
