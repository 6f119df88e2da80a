#pragma once

#include "gpl/agent/config.hpp"
#include "gpl/agent/metrics.hpp"
#include "gpl/critic/ensemble_critic.hpp"
#include "gpl/env/environment.hpp"
#include "gpl/pessimism/pessimism.hpp"
#include "gpl/policy/gaussian_policy.hpp"
#include "gpl/replay/replay_buffer.hpp"
#include "gpl/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>

namespace gpl::agent {

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct UpdateCounters {
  std::int64_t critic = 0;
  std::int64_t beta = 0;
  std::int64_t policy = 0;
  std::int64_t alpha = 0;
};

enum class EvalMode { stochastic, mean_action };

struct EvalResult {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> returns;
};

/// Runs full episodes without touching any training state. Episode i resets
/// with the i-th seed drawn from Rng(seed); stochastic mode draws action
/// noise from the same stream.
EvalResult evaluate(policy::GaussianPolicy& policy, env::Environment& env, int episodes,
                    std::uint64_t seed, EvalMode mode);

/// Soft actor-critic with an ensemble critic and a learned pessimism weight.
class Agent {
 public:
  explicit Agent(AgentConfig config);

  /// One environment step and, after warmup, the full update cadence.
  StepRecord step();
  /// Runs until total_steps, appending step and evaluation records.
  /// `on_step` (optional) is called after every step, e.g. for probes.
  void train(RunMetrics& metrics, const std::function<void(Agent&)>& on_step = {});

  EvalResult evaluate(int episodes, std::uint64_t seed, EvalMode mode);

  void save_checkpoint(const std::filesystem::path& path) const;
  /// Rebuilds an agent from the config stored in the checkpoint.
  static Agent load_checkpoint(const std::filesystem::path& path);
  /// Restores state into this agent; the checkpoint's config must match.
  void restore(const std::filesystem::path& path);

  const AgentConfig& config() const { return config_; }
  /// Allows extending a run, e.g. after resuming.
  void set_total_steps(std::int64_t n) { config_.total_steps = n; }
  std::int64_t steps_done() const { return step_; }
  bool done() const { return step_ >= config_.total_steps; }
  const UpdateCounters& counters() const { return counters_; }

  double beta() const { return beta_.beta(); }
  double alpha() const { return alpha_.alpha(); }
  double target_entropy() const { return alpha_.target_entropy(); }
  double lambda() const { return config_.anneal.lambda(step_); }

  critic::EnsembleCritic& critic() { return critic_; }
  policy::GaussianPolicy& policy() { return policy_; }
  replay::ReplayBuffer& replay() { return replay_; }
  env::Environment& environment() { return *env_; }
  /// Fresh environment instance with this run's dynamics.
  std::unique_ptr<env::Environment> make_env() const;

  /// Bitwise hash of all learnable and optimizer state.
  std::uint64_t state_hash() const;

 private:
  void update(StepRecord& rec);
  void begin_episode();

  AgentConfig config_;
  std::unique_ptr<env::Environment> env_;
  std::unique_ptr<env::Environment> eval_env_;
  critic::EnsembleCritic critic_;
  policy::GaussianPolicy policy_;
  pessimism::DualBeta beta_;
  pessimism::EntropyAlpha alpha_;
  replay::ReplayBuffer replay_;
  Rng update_rng_;
  Rng act_rng_;
  Rng env_rng_;
  Eigen::VectorXd state_;
  std::int64_t step_ = 0;
  std::int64_t episode_ = 0;
  double episode_return_ = 0.0;
  std::int64_t episode_length_ = 0;
  UpdateCounters counters_;
};

}  // namespace gpl::agent
