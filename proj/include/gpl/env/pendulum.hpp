#pragma once

#include "gpl/env/environment.hpp"

namespace gpl::env {

struct PendulumParams {
  double gravity = 10.0;
  double mass = 1.0;
  double length = 1.0;
  double dt = 0.05;
  double max_torque = 2.0;
  double max_speed = 8.0;
  double init_max_speed = 1.0;
  int max_episode_steps = 200;
};

/// Torque-limited swing-up. The angle is measured from upright (theta = 0),
/// the observation is [cos theta, sin theta, theta_dot] and the reward is the
/// negated quadratic cost of the pre-step state and the applied torque.
class Pendulum final : public Environment {
 public:
  explicit Pendulum(PendulumParams params = {});

  const EnvSpec& spec() const override { return spec_; }
  Eigen::VectorXd reset(std::uint64_t seed) override;
  StepResult step(const Eigen::VectorXd& action) override;
  Eigen::VectorXd observation() const override;
  std::string describe_dynamics() const override;
  std::vector<double> save_state() const override;
  void load_state(const std::vector<double>& state) override;
  std::unique_ptr<Environment> clone() const override;

  /// Places the pendulum at an arbitrary state (angle wrapped to [-pi, pi)).
  void set_state(double theta, double theta_dot);
  double theta() const { return theta_; }
  double theta_dot() const { return theta_dot_; }
  const PendulumParams& params() const { return params_; }

  static double wrap_angle(double x);

 private:
  PendulumParams params_;
  EnvSpec spec_;
  double theta_ = 0.0;
  double theta_dot_ = 0.0;
};

}  // namespace gpl::env
