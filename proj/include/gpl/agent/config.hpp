#pragma once

#include "gpl/critic/penalty.hpp"
#include "gpl/env/environment.hpp"
#include "gpl/nn/mlp.hpp"
#include "gpl/pessimism/pessimism.hpp"

#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpl::agent {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Which inner-loop TD errors feed the dual beta step.
enum class BetaErrors { last_batch, mean_over_batches };

struct AgentConfig {
  std::string env = "pendulum";
  env::DynamicsOverrides dynamics;
  std::uint64_t seed = 0;

  int members = 5;
  int utd = 4;
  double gamma = 0.99;
  double rho = 0.995;
  int batch_size = 128;
  std::int64_t warmup_steps = 1000;
  std::int64_t min_data = 1000;
  std::int64_t total_steps = 30000;
  std::int64_t replay_capacity = 100000;

  std::vector<nn::Index> critic_hidden{32, 32};
  nn::MlpVariant critic_variant = nn::MlpVariant::plain;
  std::vector<nn::Index> policy_hidden{32, 32};

  critic::PenaltySpec penalty;
  bool beta_nonnegative = false;
  BetaErrors beta_errors = BetaErrors::last_batch;
  pessimism::AnnealSchedule anneal;

  double critic_lr = 3e-4;
  double policy_lr = 3e-4;
  double adam_beta1 = 0.9;
  double beta_lr = 0.1;
  double beta_beta1 = 0.5;
  double alpha_lr = 1e-4;
  double alpha_beta1 = 0.5;
  double alpha_init = 1.0;
  /// NaN selects minus the action dimension.
  double target_entropy = std::numeric_limits<double>::quiet_NaN();

  std::int64_t eval_interval = 1000;
  int eval_episodes = 5;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Flat key=value view of a config. Every key produced here is accepted by
/// apply_setting, and vice versa (plus "dynamics.<name>" overrides).
std::map<std::string, std::string> to_settings(const AgentConfig& c);

/// Sets one key. Throws ConfigError on unknown keys or malformed values.
void apply_setting(AgentConfig& c, const std::string& key, const std::string& value);

/// Stable, sorted "key = value" lines.
std::string serialize(const AgentConfig& c);
AgentConfig deserialize(const std::string& text);

std::vector<std::string> setting_keys();

}  // namespace gpl::agent
