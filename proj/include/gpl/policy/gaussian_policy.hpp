#pragma once

#include "gpl/critic/ensemble_critic.hpp"
#include "gpl/env/environment.hpp"
#include "gpl/nn/adam.hpp"
#include "gpl/nn/checkpoint.hpp"
#include "gpl/nn/mlp.hpp"
#include "gpl/rng.hpp"

#include <cstdint>
#include <vector>

namespace gpl::policy {

using Matrix = nn::Matrix<double>;
using Tape = nn::Tape<double>;
using Var = nn::Var<double>;

inline constexpr double kLogStdMin = -10.0;
inline constexpr double kLogStdMax = 2.0;

struct PolicyConfig {
  int state_dim = 0;
  int action_dim = 0;
  Eigen::VectorXd action_low;
  Eigen::VectorXd action_high;
  std::vector<nn::Index> hidden{64, 64};
  std::uint64_t seed = 0;
  nn::AdamOptions adam{3e-4, 0.9, 0.999, 1e-8};
};

struct TapeSample {
  Var actions;    // B x A
  Var log_probs;  // B x 1
  Matrix pre_squash;
};

struct SampledAction {
  Eigen::VectorXd action;
  double log_prob = 0.0;
  Eigen::VectorXd pre_squash;
};

/// Tanh-squashed diagonal Gaussian scaled to the action bounds. The network
/// emits the mean and the (clamped) log standard deviation per dimension.
class GaussianPolicy {
 public:
  explicit GaussianPolicy(const PolicyConfig& config);

  const PolicyConfig& config() const { return config_; }
  nn::EnsembleMlp<double>& network() { return net_; }
  const nn::EnsembleMlp<double>& network() const { return net_; }
  nn::AdamState<double>& optimizer() { return adam_; }
  const nn::AdamState<double>& optimizer() const { return adam_; }

  /// Reparameterized sample; gradients flow to the policy parameters when
  /// `track_params` is set.
  TapeSample sample(Tape& tape, const Matrix& states, Rng& rng, bool track_params = true);
  /// Batched sample without recording gradients: actions B x A, log-probs B.
  std::pair<Matrix, Eigen::VectorXd> sample(const Matrix& states, Rng& rng);
  SampledAction sample(const Eigen::VectorXd& state, Rng& rng);
  /// Squashed mean of the Gaussian (the deterministic evaluation action).
  Eigen::VectorXd mean_action(const Eigen::VectorXd& state);
  /// Log-density of an action strictly inside the bounds.
  double log_prob(const Eigen::VectorXd& state, const Eigen::VectorXd& action);

  void save(nn::Checkpoint& ckpt, const std::string& prefix) const;
  void load(const nn::Checkpoint& ckpt, const std::string& prefix);

 private:
  struct Heads {
    Var mean;
    Var log_std;
  };
  Heads heads(Tape& tape, const Matrix& states, bool track_params);
  /// Log-density given pre-squash u = mean + std * eps.
  Var log_prob_of(const Var& u, const Var& log_std, const Matrix& eps) const;
  void check_states(const Matrix& states) const;

  PolicyConfig config_;
  Eigen::RowVectorXd center_;
  Eigen::RowVectorXd half_;
  double log_half_sum_ = 0.0;
  nn::EnsembleMlp<double> net_;
  nn::AdamState<double> adam_;
};

/// log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u)), exact for all u.
Var log_one_minus_tanh_sq(const Var& u);

struct PolicyLossResult {
  Var loss;
  Eigen::VectorXd log_probs;
  /// -mean(log pi) over the batch.
  double entropy = 0.0;
};

/// mean_b(alpha * log pi(a_b|s_b) - regularized online value(s_b, a_b)) with
/// freshly sampled actions. Critic parameters are constants on the tape.
PolicyLossResult policy_loss(Tape& tape, GaussianPolicy& policy, critic::EnsembleCritic& critic,
                             const Matrix& states, critic::PenaltyKind kind,
                             double effective_beta, double alpha, Rng& rng);

}  // namespace gpl::policy
