#pragma once

#include "gpl/critic/penalty.hpp"
#include "gpl/nn/adam.hpp"
#include "gpl/nn/checkpoint.hpp"
#include "gpl/nn/mlp.hpp"
#include "gpl/replay/replay_buffer.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gpl::critic {

using Matrix = nn::Matrix<double>;
using Tape = nn::Tape<double>;

struct CriticConfig {
  int state_dim = 0;
  int action_dim = 0;
  int members = 5;
  std::vector<nn::Index> hidden{64, 64};
  nn::MlpVariant variant = nn::MlpVariant::plain;
  std::uint64_t seed = 0;
  nn::AdamOptions adam{3e-4, 0.9, 0.999, 1e-8};
};

enum class Network { online, target };

/// N action-value members in one batched network plus a polyak-averaged
/// target copy, initialized as an exact copy of the online network.
class EnsembleCritic {
 public:
  explicit EnsembleCritic(const CriticConfig& config);

  int members() const { return config_.members; }
  const CriticConfig& config() const { return config_; }
  nn::EnsembleMlp<double>& network(Network which) {
    return which == Network::online ? online_ : target_;
  }
  const nn::EnsembleMlp<double>& network(Network which) const {
    return which == Network::online ? online_ : target_;
  }
  nn::AdamState<double>& optimizer() { return adam_; }
  const nn::AdamState<double>& optimizer() const { return adam_; }

  /// Member values, B x N, recorded on the tape. `actions` may carry gradient.
  Var values(Tape& tape, const Matrix& states, const Var& actions, Network which,
             bool track_params, bool refine_spectral);

  /// Member values without recording gradients.
  Matrix values(const Matrix& states, const Matrix& actions, Network which);

  /// phi' <- rho * phi' + (1 - rho) * phi for every parameter.
  void polyak_update(double rho);

  void save(nn::Checkpoint& ckpt, const std::string& prefix) const;
  void load(const nn::Checkpoint& ckpt, const std::string& prefix);

 private:
  CriticConfig config_;
  nn::EnsembleMlp<double> online_;
  nn::EnsembleMlp<double> target_;
  nn::AdamState<double> adam_;
};

/// Elementwise convex combination target <- rho * target + (1 - rho) * online.
void polyak_update(std::span<double> target, std::span<const double> online, double rho);

struct TargetResult {
  Eigen::VectorXd targets;
  /// Batch mean of the penalty subtracted from the member mean.
  double penalty_mean = 0.0;
};

/// y = r + mask * gamma * (regularized target value at (s', a') - alpha * log pi(a'|s')).
/// `next_actions` and `next_log_probs` must come from the current policy at
/// the batch's next states. Throws NonFiniteError on non-finite targets.
TargetResult td_targets(const replay::Batch& batch, const Matrix& next_actions,
                        const Eigen::VectorXd& next_log_probs, EnsembleCritic& critic,
                        PenaltyKind kind, double beta, double alpha, double gamma);

struct TdBatchResult {
  Eigen::VectorXd targets;
  /// errors(i, b) = Q_i(s_b, a_b) - y_b
  Matrix errors;
  /// Mean over members and rows of the squared errors.
  Var loss;
};

/// Records the TD loss of the online critic against detached targets.
TdBatchResult td_loss_and_errors(Tape& tape, EnsembleCritic& critic, const replay::Batch& batch,
                                 const Eigen::VectorXd& targets, bool refine_spectral = true);

}  // namespace gpl::critic
