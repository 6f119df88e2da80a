#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace gpl::env {

struct EnvSpec {
  std::string name;
  int state_dim = 0;
  int action_dim = 0;
  Eigen::VectorXd action_low;
  Eigen::VectorXd action_high;
  int max_episode_steps = 0;
  double reward_min = 0.0;
  double reward_max = 0.0;

  void validate() const;
};

struct StepResult {
  Eigen::VectorXd next_state;
  double reward = 0.0;
  bool terminal = false;
  bool truncated = false;
};

/// Deterministic continuous-control task. Only reset() consumes randomness;
/// step() is a pure function of the internal state and the action.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual Eigen::VectorXd reset(std::uint64_t seed) = 0;
  /// Out-of-bounds actions are clipped (with a one-time warning); non-finite
  /// actions throw std::invalid_argument.
  virtual StepResult step(const Eigen::VectorXd& action) = 0;
  virtual Eigen::VectorXd observation() const = 0;
  /// Human-readable equations and constants.
  virtual std::string describe_dynamics() const = 0;

  /// Full internal state, for checkpoints.
  virtual std::vector<double> save_state() const = 0;
  virtual void load_state(const std::vector<double>& state) = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;

  int elapsed_steps() const { return steps_; }

 protected:
  /// Validates and clips to the action box.
  Eigen::VectorXd sanitize_action(const Eigen::VectorXd& action);

  int steps_ = 0;
  bool warned_clip_ = false;
};

/// Constant overrides by name, e.g. {"max_torque", 1.5}.
using DynamicsOverrides = std::map<std::string, double>;

std::unique_ptr<Environment> make_environment(const std::string& name,
                                              const DynamicsOverrides& overrides = {});
std::vector<std::string> environment_names();

}  // namespace gpl::env
