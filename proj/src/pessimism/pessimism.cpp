#include "gpl/pessimism/pessimism.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <span>
#include <stdexcept>

namespace gpl::pessimism {

BiasEstimate estimate_bias_from_errors(const Matrix& errors) {
  if (errors.size() == 0) throw std::invalid_argument("estimate_bias_from_errors: no errors");
  return {-errors.mean(), BiasSource::td_errors};
}

double dual_beta_gradient(const Matrix& errors) {
  if (errors.size() == 0) throw std::invalid_argument("dual_beta_gradient: no errors");
  return errors.colwise().sum().mean();
}

DualBeta::DualBeta(double initial, nn::AdamOptions opts, bool nonnegative)
    : beta_(initial), nonnegative_(nonnegative), adam_(1, opts) {
  if (!std::isfinite(initial)) throw std::invalid_argument("DualBeta: initial beta not finite");
  if (nonnegative && initial < 0) {
    throw std::invalid_argument("DualBeta: negative initial beta with nonnegativity enforced");
  }
}

bool DualBeta::step(const Matrix& errors) {
  if (!errors.allFinite()) {
    std::cerr << "warning: dual beta step skipped, non-finite TD errors\n";
    return false;
  }
  return step_with_gradient(dual_beta_gradient(errors));
}

bool DualBeta::step_with_gradient(double grad) {
  double g[1] = {grad};
  double p[1] = {beta_};
  if (!nn::adam_step<double>(std::span<double>(p), std::span<const double>(g), adam_)) {
    std::cerr << "warning: beta step skipped, non-finite gradient\n";
    return false;
  }
  beta_ = nonnegative_ ? std::max(0.0, p[0]) : p[0];
  return true;
}

void DualBeta::save(nn::Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.put_scalar(prefix + "/beta", beta_);
  ckpt.put_adam(prefix + "/adam", adam_);
}

void DualBeta::load(const nn::Checkpoint& ckpt, const std::string& prefix) {
  beta_ = ckpt.scalar(prefix + "/beta");
  ckpt.get_adam(prefix + "/adam", adam_);
}

EntropyAlpha::EntropyAlpha(double initial_alpha, double target_entropy, nn::AdamOptions opts)
    : log_alpha_(0.0), target_entropy_(target_entropy), adam_(1, opts) {
  if (!(initial_alpha > 0) || !std::isfinite(initial_alpha)) {
    throw std::invalid_argument("EntropyAlpha: initial alpha must be positive and finite");
  }
  log_alpha_ = std::log(initial_alpha);
}

double EntropyAlpha::alpha() const { return std::exp(log_alpha_); }

double EntropyAlpha::gradient(const Eigen::VectorXd& log_probs) const {
  if (log_probs.size() == 0) throw std::invalid_argument("EntropyAlpha: no log-probs");
  return alpha() * (-log_probs.array() - target_entropy_).mean();
}

bool EntropyAlpha::step(const Eigen::VectorXd& log_probs) {
  double g[1] = {gradient(log_probs)};
  double p[1] = {log_alpha_};
  if (!nn::adam_step<double>(std::span<double>(p), std::span<const double>(g), adam_)) {
    std::cerr << "warning: alpha step skipped, non-finite log-probs\n";
    return false;
  }
  log_alpha_ = p[0];
  return true;
}

void EntropyAlpha::save(nn::Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.put_vector(prefix + "/log_alpha_target", std::vector<double>{log_alpha_, target_entropy_});
  ckpt.put_adam(prefix + "/adam", adam_);
}

void EntropyAlpha::load(const nn::Checkpoint& ckpt, const std::string& prefix) {
  const auto v = ckpt.vector(prefix + "/log_alpha_target");
  if (v.size() != 2) throw nn::CheckpointError("entropy alpha entry '" + prefix + "' malformed");
  log_alpha_ = v[0];
  target_entropy_ = v[1];
  ckpt.get_adam(prefix + "/adam", adam_);
}

void AnnealSchedule::validate() const {
  if (!(start >= 0) || !(end >= 0)) {
    throw std::invalid_argument("anneal schedule: lambda start/end must be >= 0");
  }
  if (decay_steps < 0) throw std::invalid_argument("anneal schedule: decay steps must be >= 0");
}

double AnnealSchedule::lambda(std::int64_t step) const {
  if (step >= decay_steps) return end;
  if (step <= 0) return start;
  const double frac = static_cast<double>(step) / static_cast<double>(decay_steps);
  return start + (end - start) * frac;
}

double effective_beta(double beta, const AnnealSchedule& schedule, std::int64_t step,
                      BetaRole role) {
  return role == BetaRole::target ? beta : beta - schedule.lambda(step);
}

nn::Var<double> e2e_beta_loss(nn::Tape<double>& tape, const replay::Batch& batch,
                              const Matrix& next_actions, const Eigen::VectorXd& next_log_probs,
                              critic::EnsembleCritic& critic, critic::PenaltyKind kind,
                              const nn::Var<double>& beta, double alpha, double gamma) {
  if (kind != critic::PenaltyKind::wasserstein && kind != critic::PenaltyKind::popstd) {
    throw std::invalid_argument("e2e_beta_loss: penalty '" + critic::to_string(kind) +
                                "' is not differentiable in beta");
  }
  const auto b = batch.size();
  if (next_actions.rows() != b || next_log_probs.size() != b) {
    throw nn::ShapeError("e2e_beta_loss: next actions/log-probs do not match the batch size");
  }
  using critic::Network;
  nn::Var<double> next_q = critic.values(tape, batch.next_states, tape.constant(next_actions),
                             Network::target, false, false);
  nn::Var<double> reg = critic::regularized_value(next_q, kind, beta);
  const Matrix q = critic.values(batch.states, batch.actions, Network::online);
  Matrix base = batch.rewards - q.rowwise().mean() -
                (batch.masks.array() * gamma * alpha * next_log_probs.array()).matrix();
  Matrix coef = batch.masks * gamma;
  nn::Var<double> bias = nn::cwise_product(reg, tape.constant(std::move(coef))) + tape.constant(std::move(base));
  return nn::mean(nn::square(bias));
}

}  // namespace gpl::pessimism
