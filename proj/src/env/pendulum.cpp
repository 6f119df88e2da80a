#include "gpl/env/pendulum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace gpl::env {

Pendulum::Pendulum(PendulumParams params) : params_(params) {
  if (!(params_.dt > 0) || !(params_.max_torque > 0) || !(params_.max_speed > 0) ||
      !(params_.mass > 0) || !(params_.length > 0) || params_.init_max_speed < 0 ||
      params_.init_max_speed > params_.max_speed) {
    throw std::invalid_argument("pendulum: invalid dynamics constants");
  }
  spec_.name = "pendulum";
  spec_.state_dim = 3;
  spec_.action_dim = 1;
  spec_.action_low = Eigen::VectorXd::Constant(1, -params_.max_torque);
  spec_.action_high = Eigen::VectorXd::Constant(1, params_.max_torque);
  spec_.max_episode_steps = params_.max_episode_steps;
  const double pi = std::numbers::pi;
  spec_.reward_min = -(pi * pi + 0.1 * params_.max_speed * params_.max_speed +
                       0.001 * params_.max_torque * params_.max_torque);
  spec_.reward_max = 0.0;
  spec_.validate();
}

double Pendulum::wrap_angle(double x) {
  const double two_pi = 2.0 * std::numbers::pi;
  return x - two_pi * std::floor((x + std::numbers::pi) / two_pi);
}

Eigen::VectorXd Pendulum::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> speed(-params_.init_max_speed, params_.init_max_speed);
  theta_ = angle(rng);
  theta_dot_ = speed(rng);
  steps_ = 0;
  return observation();
}

StepResult Pendulum::step(const Eigen::VectorXd& action) {
  const double u = sanitize_action(action)(0);
  const double g = params_.gravity, m = params_.mass, l = params_.length, dt = params_.dt;

  const double cost = theta_ * theta_ + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u;
  const double accel = 3.0 * g / (2.0 * l) * std::sin(theta_) + 3.0 / (m * l * l) * u;
  theta_dot_ = std::clamp(theta_dot_ + accel * dt, -params_.max_speed, params_.max_speed);
  theta_ = wrap_angle(theta_ + theta_dot_ * dt);
  ++steps_;

  StepResult r;
  r.next_state = observation();
  r.reward = -cost;
  r.terminal = false;
  r.truncated = steps_ >= params_.max_episode_steps;
  return r;
}

Eigen::VectorXd Pendulum::observation() const {
  Eigen::VectorXd o(3);
  o << std::cos(theta_), std::sin(theta_), theta_dot_;
  return o;
}

std::string Pendulum::describe_dynamics() const {
  std::ostringstream os;
  os.precision(17);
  os << "environment: pendulum (swing-up, angle measured from upright)\n"
     << "state: theta in [-pi, pi), theta_dot\n"
     << "observation: [cos(theta), sin(theta), theta_dot]\n"
     << "action: torque u in [" << -params_.max_torque << ", " << params_.max_torque << "]\n"
     << "reward: r = -(theta^2 + 0.1 * theta_dot^2 + 0.001 * u^2)  (pre-step state)\n"
     << "reward range: [" << spec_.reward_min << ", " << spec_.reward_max << "]\n"
     << "integration: semi-implicit Euler\n"
     << "  theta_ddot = 3 g / (2 l) * sin(theta) + 3 / (m l^2) * u\n"
     << "  theta_dot' = clip(theta_dot + theta_ddot * dt, -max_speed, max_speed)\n"
     << "  theta'     = wrap(theta + theta_dot' * dt)\n"
     << "reset: theta ~ U[-pi, pi), theta_dot ~ U[-init_max_speed, init_max_speed]\n"
     << "episode: " << params_.max_episode_steps
     << " steps, truncated (never terminal)\n"
     << "constants:\n"
     << "  gravity = " << params_.gravity << "\n"
     << "  mass = " << params_.mass << "\n"
     << "  length = " << params_.length << "\n"
     << "  dt = " << params_.dt << "\n"
     << "  max_torque = " << params_.max_torque << "\n"
     << "  max_speed = " << params_.max_speed << "\n"
     << "  init_max_speed = " << params_.init_max_speed << "\n"
     << "  max_episode_steps = " << params_.max_episode_steps << "\n";
  return os.str();
}

std::vector<double> Pendulum::save_state() const {
  return {theta_, theta_dot_, static_cast<double>(steps_)};
}

void Pendulum::load_state(const std::vector<double>& state) {
  if (state.size() != 3) throw std::invalid_argument("pendulum: bad saved state");
  theta_ = state[0];
  theta_dot_ = state[1];
  steps_ = static_cast<int>(state[2]);
}

std::unique_ptr<Environment> Pendulum::clone() const { return std::make_unique<Pendulum>(*this); }

void Pendulum::set_state(double theta, double theta_dot) {
  theta_ = wrap_angle(theta);
  theta_dot_ = theta_dot;
}

}  // namespace gpl::env
