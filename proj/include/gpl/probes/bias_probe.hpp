#pragma once

#include "gpl/agent/agent.hpp"
#include "gpl/pessimism/pessimism.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace gpl::probes {

enum class Correction { entropy_corrected, raw };

std::string to_string(Correction c);
Correction parse_correction(const std::string& s);

struct BiasProbeConfig {
  int episodes = 10;
  double gamma = 0.99;
  Correction correction = Correction::entropy_corrected;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One evaluation episode: row t holds s_t and a_t.
struct Rollout {
  Eigen::MatrixXd states;
  Eigen::MatrixXd actions;
  Eigen::VectorXd rewards;
  Eigen::VectorXd log_probs;
};

/// Stochastic-policy episodes; episode i resets with the i-th seed of
/// Rng(seed) and action noise comes from the same stream.
std::vector<Rollout> collect_rollouts(policy::GaussianPolicy& policy, env::Environment& env,
                                      int episodes, std::uint64_t seed);

/// G_t = sum_{k>=t} gamma^(k-t) (r_k - alpha log pi_k), truncated at the
/// episode end; raw mode drops the log-prob term.
Eigen::VectorXd discounted_returns(const Rollout& r, double gamma, double alpha,
                                   Correction correction);

/// sum_{k>=t} gamma^(k-t) log pi_k.
Eigen::VectorXd discounted_log_probs(const Rollout& r, double gamma);

/// Q-hat(states, actions) -> one prediction per row.
using ValueFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&, const Eigen::MatrixXd&)>;

struct BiasProbeResult {
  pessimism::BiasEstimate estimate{0.0, pessimism::BiasSource::rollout};
  double mean_prediction = 0.0;
  double mean_return = 0.0;
  /// Mean of discounted_log_probs over visited pairs; the entropy-corrected
  /// bias exceeds the raw one by alpha times this.
  double mean_discounted_log_prob = 0.0;
  std::int64_t pairs = 0;
};

/// Mean of Q-hat(s_t, a_t) - G_t over every visited pair.
BiasProbeResult bias_from_rollouts(const std::vector<Rollout>& rollouts, const ValueFn& value,
                                   double gamma, double alpha, Correction correction);

/// Unpenalized online member mean of the agent's critic, as a ValueFn.
ValueFn critic_mean(critic::EnsembleCritic& critic);

/// Rolls out the agent's policy on a fresh copy of its environment. Leaves
/// every piece of training state untouched.
BiasProbeResult rollout_bias_probe(agent::Agent& agent, const BiasProbeConfig& config);

/// One arm of the fixed-beta experiment: a fixed beta, or nullopt for dual
/// TD-learning from the configured initial value.
using BetaArm = std::optional<double>;
std::string arm_label(const BetaArm& arm);

struct ProbeSchedule {
  std::int64_t interval = 1000;
  BiasProbeConfig probe;
};

struct BiasTrajectory {
  std::string label;
  std::uint64_t seed = 0;
  std::vector<std::int64_t> steps;
  std::vector<double> bias;
  /// Mean of the probes taken strictly after warmup.
  double time_average = 0.0;
  /// Mean of |bias| over the same probes.
  double time_average_abs = 0.0;
};

/// Applies an arm to a base config.
agent::AgentConfig arm_config(agent::AgentConfig base, const BetaArm& arm, std::uint64_t seed);

/// Trains one agent, probing every `schedule.interval` steps. Step and eval
/// records go to `metrics` when given.
BiasTrajectory tracked_run(const agent::AgentConfig& config, const ProbeSchedule& schedule,
                           const std::string& label, agent::RunMetrics* metrics = nullptr);

struct FixedBetaExperiment {
  agent::AgentConfig base;
  std::vector<BetaArm> arms;
  std::int64_t steps = 30000;
  std::vector<std::uint64_t> seeds;
  ProbeSchedule schedule;

  /// Requires fixed arms 0.0 and 0.5, at least one seed and positive steps.
  void validate() const;
};

/// Trajectories ordered by arm, then seed.
std::vector<BiasTrajectory> fixed_beta_bias_experiment(const FixedBetaExperiment& e);

}  // namespace gpl::probes
