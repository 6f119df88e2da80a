#pragma once

#include "gpl/critic/ensemble_critic.hpp"
#include "gpl/nn/adam.hpp"
#include "gpl/nn/checkpoint.hpp"

#include <cstdint>

namespace gpl::pessimism {

using Matrix = nn::Matrix<double>;

enum class BiasSource { td_errors, rollout };

struct BiasEstimate {
  double value = 0.0;
  BiasSource source = BiasSource::td_errors;
};

/// Target bias from TD errors e = Q - y (members x batch): -mean(e).
BiasEstimate estimate_bias_from_errors(const Matrix& errors);

/// d/dbeta of beta * sum_i e_i, averaged over the batch: the column sums of
/// `errors` (members x batch), averaged.
double dual_beta_gradient(const Matrix& errors);

inline nn::AdamOptions default_beta_adam() { return {0.1, 0.5, 0.999, 1e-8}; }
inline nn::AdamOptions default_alpha_adam() { return {1e-4, 0.5, 0.999, 1e-8}; }

/// Pessimism weight learned as a dual variable on the estimated target bias.
/// The same state also backs the end-to-end variant, which feeds it a
/// different gradient.
class DualBeta {
 public:
  explicit DualBeta(double initial = 0.5, nn::AdamOptions opts = default_beta_adam(),
                    bool nonnegative = false);

  double beta() const { return beta_; }
  bool nonnegative() const { return nonnegative_; }
  const nn::AdamState<double>& optimizer() const { return adam_; }

  /// One Adam step on J(beta) = beta * sum_i e_i. Returns false (and leaves
  /// the state untouched) on non-finite errors.
  bool step(const Matrix& errors);
  /// One Adam step with an externally computed gradient.
  bool step_with_gradient(double grad);

  void save(nn::Checkpoint& ckpt, const std::string& prefix) const;
  void load(const nn::Checkpoint& ckpt, const std::string& prefix);

 private:
  double beta_;
  bool nonnegative_;
  nn::AdamState<double> adam_;
};

/// Entropy temperature parameterized through log(alpha).
class EntropyAlpha {
 public:
  EntropyAlpha(double initial_alpha, double target_entropy,
               nn::AdamOptions opts = default_alpha_adam());

  double alpha() const;
  double log_alpha() const { return log_alpha_; }
  double target_entropy() const { return target_entropy_; }
  const nn::AdamState<double>& optimizer() const { return adam_; }

  /// Gradient of J = alpha * mean(-log pi - target) w.r.t. log(alpha).
  double gradient(const Eigen::VectorXd& log_probs) const;
  bool step(const Eigen::VectorXd& log_probs);

  void save(nn::Checkpoint& ckpt, const std::string& prefix) const;
  void load(const nn::Checkpoint& ckpt, const std::string& prefix);

 private:
  double log_alpha_;
  double target_entropy_;
  nn::AdamState<double> adam_;
};

/// Optimistic shift decaying linearly from `start` to `end` over
/// `decay_steps` environment steps, then held at `end`.
struct AnnealSchedule {
  double start = 0.0;
  double end = 0.0;
  std::int64_t decay_steps = 0;

  void validate() const;
  double lambda(std::int64_t step) const;
  bool disabled() const { return start == 0.0 && end == 0.0; }
};

enum class BetaRole { target, policy };

/// Targets always use beta; the policy objective uses beta - lambda(step).
double effective_beta(double beta, const AnnealSchedule& schedule, std::int64_t step,
                      BetaRole role);

/// Squared estimated target bias, mean_b (y_b(beta) - mean_i Q_i(s_b, a_b))^2,
/// differentiable in the 1 x 1 node `beta`. Online predictions are constants.
nn::Var<double> e2e_beta_loss(nn::Tape<double>& tape, const replay::Batch& batch,
                              const Matrix& next_actions, const Eigen::VectorXd& next_log_probs,
                              critic::EnsembleCritic& critic, critic::PenaltyKind kind,
                              const nn::Var<double>& beta, double alpha, double gamma);

}  // namespace gpl::pessimism
