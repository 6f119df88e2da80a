#pragma once

#include "gpl/env/environment.hpp"

namespace gpl::env {

struct PointMassParams {
  double dt = 0.1;
  double max_force = 1.0;
  double damping = 1.0;
  double arena = 1.0;
  double start_x = -0.4;
  double start_y = -0.4;
  double start_spread = 0.05;
  double goal_x = 0.4;
  double goal_y = 0.4;
  double goal_radius = 0.2;
  int max_episode_steps = 100;
};

/// Damped 2-D point mass in a walled square arena with a sparse goal reward
/// (+1 while the post-step position is inside the goal disc, 0 otherwise).
/// Observation: [x, y, vx, vy].
class PointMass final : public Environment {
 public:
  explicit PointMass(PointMassParams params = {});

  const EnvSpec& spec() const override { return spec_; }
  Eigen::VectorXd reset(std::uint64_t seed) override;
  StepResult step(const Eigen::VectorXd& action) override;
  Eigen::VectorXd observation() const override;
  std::string describe_dynamics() const override;
  std::vector<double> save_state() const override;
  void load_state(const std::vector<double>& state) override;
  std::unique_ptr<Environment> clone() const override;

  void set_state(const Eigen::Vector2d& position, const Eigen::Vector2d& velocity);
  const Eigen::Vector2d& position() const { return position_; }
  const Eigen::Vector2d& velocity() const { return velocity_; }
  const PointMassParams& params() const { return params_; }
  bool in_goal(const Eigen::Vector2d& p) const;

 private:
  PointMassParams params_;
  EnvSpec spec_;
  Eigen::Vector2d position_ = Eigen::Vector2d::Zero();
  Eigen::Vector2d velocity_ = Eigen::Vector2d::Zero();
};

}  // namespace gpl::env
