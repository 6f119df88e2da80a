#include "gpl/env/point_mass.hpp"

#include <algorithm>
#include <random>
#include <sstream>
#include <stdexcept>

namespace gpl::env {

PointMass::PointMass(PointMassParams params) : params_(params) {
  if (!(params_.dt > 0) || !(params_.max_force > 0) || params_.damping < 0 ||
      !(params_.arena > 0) || !(params_.goal_radius > 0) || params_.start_spread < 0) {
    throw std::invalid_argument("point_mass: invalid dynamics constants");
  }
  spec_.name = "point_mass";
  spec_.state_dim = 4;
  spec_.action_dim = 2;
  spec_.action_low = Eigen::VectorXd::Constant(2, -params_.max_force);
  spec_.action_high = Eigen::VectorXd::Constant(2, params_.max_force);
  spec_.max_episode_steps = params_.max_episode_steps;
  spec_.reward_min = 0.0;
  spec_.reward_max = 1.0;
  spec_.validate();
}

bool PointMass::in_goal(const Eigen::Vector2d& p) const {
  return (p - Eigen::Vector2d(params_.goal_x, params_.goal_y)).norm() <= params_.goal_radius;
}

Eigen::VectorXd PointMass::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-params_.start_spread, params_.start_spread);
  position_ = Eigen::Vector2d(params_.start_x + jitter(rng), params_.start_y + jitter(rng));
  velocity_.setZero();
  steps_ = 0;
  return observation();
}

StepResult PointMass::step(const Eigen::VectorXd& action) {
  const Eigen::Vector2d force = sanitize_action(action);
  const double dt = params_.dt;
  velocity_ += dt * (force - params_.damping * velocity_);
  position_ += dt * velocity_;
  for (int i = 0; i < 2; ++i) {
    if (std::abs(position_(i)) > params_.arena) {
      position_(i) = std::clamp(position_(i), -params_.arena, params_.arena);
      velocity_(i) = 0.0;
    }
  }
  ++steps_;

  StepResult r;
  r.next_state = observation();
  r.reward = in_goal(position_) ? 1.0 : 0.0;
  r.terminal = false;
  r.truncated = steps_ >= params_.max_episode_steps;
  return r;
}

Eigen::VectorXd PointMass::observation() const {
  Eigen::VectorXd o(4);
  o << position_, velocity_;
  return o;
}

std::string PointMass::describe_dynamics() const {
  std::ostringstream os;
  os.precision(17);
  os << "environment: point_mass (sparse-reward reacher)\n"
     << "state/observation: [x, y, vx, vy]\n"
     << "action: force a in [" << -params_.max_force << ", " << params_.max_force << "]^2\n"
     << "integration: semi-implicit Euler\n"
     << "  v' = v + dt * (a - damping * v)\n"
     << "  p' = p + dt * v'\n"
     << "  walls: if |p'_i| > arena then p'_i = clip(p'_i, -arena, arena), v'_i = 0\n"
     << "reward: 1 if |p' - goal| <= goal_radius else 0 (post-step position)\n"
     << "reward range: [0, 1]\n"
     << "reset: p = start + U[-start_spread, start_spread]^2, v = 0\n"
     << "episode: " << params_.max_episode_steps << " steps, truncated (never terminal)\n"
     << "constants:\n"
     << "  dt = " << params_.dt << "\n"
     << "  max_force = " << params_.max_force << "\n"
     << "  damping = " << params_.damping << "\n"
     << "  arena = " << params_.arena << "\n"
     << "  start_x = " << params_.start_x << "\n"
     << "  start_y = " << params_.start_y << "\n"
     << "  start_spread = " << params_.start_spread << "\n"
     << "  goal_x = " << params_.goal_x << "\n"
     << "  goal_y = " << params_.goal_y << "\n"
     << "  goal_radius = " << params_.goal_radius << "\n"
     << "  max_episode_steps = " << params_.max_episode_steps << "\n";
  return os.str();
}

std::vector<double> PointMass::save_state() const {
  return {position_(0), position_(1), velocity_(0), velocity_(1), static_cast<double>(steps_)};
}

void PointMass::load_state(const std::vector<double>& state) {
  if (state.size() != 5) throw std::invalid_argument("point_mass: bad saved state");
  position_ = Eigen::Vector2d(state[0], state[1]);
  velocity_ = Eigen::Vector2d(state[2], state[3]);
  steps_ = static_cast<int>(state[4]);
}

std::unique_ptr<Environment> PointMass::clone() const {
  return std::make_unique<PointMass>(*this);
}

void PointMass::set_state(const Eigen::Vector2d& position, const Eigen::Vector2d& velocity) {
  position_ = position;
  velocity_ = velocity;
}

}  // namespace gpl::env
