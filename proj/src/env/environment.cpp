#include "gpl/env/environment.hpp"

#include "gpl/env/pendulum.hpp"
#include "gpl/env/point_mass.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace gpl::env {

void EnvSpec::validate() const {
  if (state_dim <= 0 || action_dim <= 0) throw std::invalid_argument("EnvSpec: empty spaces");
  if (action_low.size() != action_dim || action_high.size() != action_dim) {
    throw std::invalid_argument("EnvSpec: action bounds do not match action dimension");
  }
  for (int i = 0; i < action_dim; ++i) {
    if (!(action_low(i) < action_high(i))) {
      throw std::invalid_argument("EnvSpec: action low must be below high");
    }
  }
  if (max_episode_steps <= 0) throw std::invalid_argument("EnvSpec: max episode steps <= 0");
  if (!(reward_min <= reward_max)) throw std::invalid_argument("EnvSpec: bad reward range");
}

Eigen::VectorXd Environment::sanitize_action(const Eigen::VectorXd& action) {
  const EnvSpec& s = spec();
  if (action.size() != s.action_dim) {
    throw std::invalid_argument(s.name + ": action has " + std::to_string(action.size()) +
                                " entries, expected " + std::to_string(s.action_dim));
  }
  if (!action.allFinite()) throw std::invalid_argument(s.name + ": non-finite action");
  Eigen::VectorXd clipped = action.cwiseMax(s.action_low).cwiseMin(s.action_high);
  if (clipped != action && !warned_clip_) {
    warned_clip_ = true;
    std::cerr << "warning: " << s.name << ": action outside bounds was clipped\n";
  }
  return clipped;
}

namespace {

double take(DynamicsOverrides& o, const std::string& key, double fallback) {
  auto it = o.find(key);
  if (it == o.end()) return fallback;
  const double v = it->second;
  o.erase(it);
  return v;
}

void reject_leftovers(const std::string& env, const DynamicsOverrides& o) {
  if (o.empty()) return;
  throw std::invalid_argument("unknown dynamics constant '" + o.begin()->first +
                              "' for environment '" + env + "'");
}

}  // namespace

std::unique_ptr<Environment> make_environment(const std::string& name,
                                              const DynamicsOverrides& overrides) {
  DynamicsOverrides o = overrides;
  if (name == "pendulum") {
    PendulumParams p;
    p.gravity = take(o, "gravity", p.gravity);
    p.mass = take(o, "mass", p.mass);
    p.length = take(o, "length", p.length);
    p.dt = take(o, "dt", p.dt);
    p.max_torque = take(o, "max_torque", p.max_torque);
    p.max_speed = take(o, "max_speed", p.max_speed);
    p.init_max_speed = take(o, "init_max_speed", p.init_max_speed);
    p.max_episode_steps =
        static_cast<int>(take(o, "max_episode_steps", p.max_episode_steps));
    reject_leftovers(name, o);
    return std::make_unique<Pendulum>(p);
  }
  if (name == "point_mass") {
    PointMassParams p;
    p.dt = take(o, "dt", p.dt);
    p.max_force = take(o, "max_force", p.max_force);
    p.damping = take(o, "damping", p.damping);
    p.arena = take(o, "arena", p.arena);
    p.start_x = take(o, "start_x", p.start_x);
    p.start_y = take(o, "start_y", p.start_y);
    p.start_spread = take(o, "start_spread", p.start_spread);
    p.goal_x = take(o, "goal_x", p.goal_x);
    p.goal_y = take(o, "goal_y", p.goal_y);
    p.goal_radius = take(o, "goal_radius", p.goal_radius);
    p.max_episode_steps =
        static_cast<int>(take(o, "max_episode_steps", p.max_episode_steps));
    reject_leftovers(name, o);
    return std::make_unique<PointMass>(p);
  }
  throw std::invalid_argument("unknown environment '" + name + "' (known: pendulum, point_mass)");
}

std::vector<std::string> environment_names() { return {"pendulum", "point_mass"}; }

}  // namespace gpl::env
