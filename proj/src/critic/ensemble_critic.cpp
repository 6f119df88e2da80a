#include "gpl/critic/ensemble_critic.hpp"

namespace gpl::critic {

namespace {

nn::MlpSpec critic_spec(const CriticConfig& c) {
  nn::MlpSpec s;
  s.input_width = c.state_dim + c.action_dim;
  s.hidden_widths = c.hidden;
  s.output_width = 1;
  s.variant = c.variant;
  return s;
}

std::vector<std::uint64_t> member_seeds(const CriticConfig& c) {
  std::vector<std::uint64_t> s(static_cast<std::size_t>(c.members));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = c.seed * 1000003ULL + i;
  return s;
}

}  // namespace

EnsembleCritic::EnsembleCritic(const CriticConfig& config)
    : config_(config),
      online_(critic_spec(config), config.members, member_seeds(config)),
      target_(online_),
      adam_(online_.params().size(), config.adam) {
  if (config.members < 1) throw std::invalid_argument("EnsembleCritic: needs >= 1 member");
}

Var EnsembleCritic::values(Tape& tape, const Matrix& states, const Var& actions, Network which,
                           bool track_params, bool refine_spectral) {
  if (states.cols() != config_.state_dim || actions.cols() != config_.action_dim ||
      states.rows() != actions.rows()) {
    throw nn::ShapeError("EnsembleCritic::values: got states " + nn::shape_str(states) +
                         " and actions " + nn::shape_str(actions.value()) + ", expected widths " +
                         std::to_string(config_.state_dim) + " and " +
                         std::to_string(config_.action_dim));
  }
  Var input = nn::concat_cols(tape.constant(states), actions);
  return network(which).forward(tape, input, track_params, refine_spectral);
}

Matrix EnsembleCritic::values(const Matrix& states, const Matrix& actions, Network which) {
  Tape tape;
  return values(tape, states, tape.constant(actions), which, false, false).value();
}

void polyak_update(std::span<double> target, std::span<const double> online, double rho) {
  if (target.size() != online.size()) {
    throw std::invalid_argument("polyak_update: parameter counts differ");
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    target[i] = rho * target[i] + (1.0 - rho) * online[i];
  }
}

void EnsembleCritic::polyak_update(double rho) {
  critic::polyak_update(target_.params().values(), online_.params().values(), rho);
}

void EnsembleCritic::save(nn::Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.put_mlp(prefix + "/online", online_);
  ckpt.put_mlp(prefix + "/target", target_);
  ckpt.put_adam(prefix + "/adam", adam_);
}

void EnsembleCritic::load(const nn::Checkpoint& ckpt, const std::string& prefix) {
  ckpt.get_mlp(prefix + "/online", online_);
  ckpt.get_mlp(prefix + "/target", target_);
  ckpt.get_adam(prefix + "/adam", adam_);
}

TargetResult td_targets(const replay::Batch& batch, const Matrix& next_actions,
                        const Eigen::VectorXd& next_log_probs, EnsembleCritic& critic,
                        PenaltyKind kind, double beta, double alpha, double gamma) {
  const auto b = batch.size();
  if (next_actions.rows() != b || next_log_probs.size() != b) {
    throw nn::ShapeError("td_targets: next actions/log-probs do not match the batch size");
  }
  Tape tape;
  // The target network refines its own spectral state; nothing here is tracked.
  Var q = critic.values(tape, batch.next_states, tape.constant(next_actions), Network::target,
                        false, true);
  Var beta_node = tape.constant(beta);
  Var reg = regularized_value(q, kind, beta_node);
  const Eigen::VectorXd mean = q.value().rowwise().mean();
  TargetResult r;
  r.targets = batch.rewards.array() +
              batch.masks.array() * gamma *
                  (reg.value().col(0).array() - alpha * next_log_probs.array());
  r.penalty_mean = (mean - reg.value().col(0)).mean();
  if (!r.targets.allFinite()) {
    throw NonFiniteError("td_targets: non-finite TD targets (beta=" + std::to_string(beta) +
                         ", alpha=" + std::to_string(alpha) + ")");
  }
  return r;
}

TdBatchResult td_loss_and_errors(Tape& tape, EnsembleCritic& critic, const replay::Batch& batch,
                                 const Eigen::VectorXd& targets, bool refine_spectral) {
  if (targets.size() != batch.size()) {
    throw nn::ShapeError("td_loss_and_errors: " + std::to_string(targets.size()) +
                         " targets for a batch of " + std::to_string(batch.size()));
  }
  Var q = critic.values(tape, batch.states, tape.constant(batch.actions), Network::online, true,
                        refine_spectral);
  const nn::Index n = q.cols();
  Matrix y = targets.replicate(1, n);
  Var err = q - tape.constant(y);
  TdBatchResult r;
  r.targets = targets;
  r.errors = err.value().transpose();
  r.loss = nn::mean(nn::square(err));
  return r;
}

}  // namespace gpl::critic
