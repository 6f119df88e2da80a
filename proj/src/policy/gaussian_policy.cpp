#include "gpl/policy/gaussian_policy.hpp"

#include <cmath>
#include <numbers>

namespace gpl::policy {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
// tanh rounds to +-1 for |u| > ~19; keep squashed actions strictly inside the box.
const double kTanhMax = 1.0 - 0x1p-50;

nn::MlpSpec policy_spec(const PolicyConfig& c) {
  nn::MlpSpec s;
  s.input_width = c.state_dim;
  s.hidden_widths = c.hidden;
  s.output_width = 2 * c.action_dim;
  return s;
}

double log_one_minus_tanh_sq(double u) {
  // softplus(-2u) computed stably
  const double x = -2.0 * u;
  const double sp = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return 2.0 * (std::numbers::ln2 - u - sp);
}

}  // namespace

Var log_one_minus_tanh_sq(const Var& u) {
  return (nn::softplus(u * -2.0) + u) * -2.0 + 2.0 * std::numbers::ln2;
}

GaussianPolicy::GaussianPolicy(const PolicyConfig& config)
    : config_(config),
      net_(policy_spec(config), 1, std::vector<std::uint64_t>{config.seed * 7919ULL + 17ULL}),
      adam_(net_.params().size(), config.adam) {
  const auto a = config.action_dim;
  if (config.action_low.size() != a || config.action_high.size() != a) {
    throw std::invalid_argument("GaussianPolicy: action bounds do not match the action width");
  }
  if (!(config.action_low.array() < config.action_high.array()).all()) {
    throw std::invalid_argument("GaussianPolicy: action low must be below high");
  }
  center_ = (0.5 * (config.action_high + config.action_low)).transpose();
  half_ = (0.5 * (config.action_high - config.action_low)).transpose();
  log_half_sum_ = half_.array().log().sum();
}

void GaussianPolicy::check_states(const Matrix& states) const {
  if (states.cols() != config_.state_dim) {
    throw nn::ShapeError("GaussianPolicy: state width " + std::to_string(states.cols()) +
                         " does not match " + std::to_string(config_.state_dim));
  }
}

GaussianPolicy::Heads GaussianPolicy::heads(Tape& tape, const Matrix& states, bool track_params) {
  check_states(states);
  Var out = net_.forward(tape, tape.constant(states), track_params, false);
  const nn::Index a = config_.action_dim;
  return {nn::slice_cols(out, 0, a), nn::clamp(nn::slice_cols(out, a, a), kLogStdMin, kLogStdMax)};
}

Var GaussianPolicy::log_prob_of(const Var& u, const Var& log_std, const Matrix& eps) const {
  Tape& tape = u.tape();
  const double a = static_cast<double>(config_.action_dim);
  Matrix c = (-0.5 * eps.array().square().rowwise().sum()).matrix();
  c.array() -= a * kHalfLog2Pi + log_half_sum_;
  return nn::row_sum(-log_std) + tape.constant(std::move(c)) -
         nn::row_sum(log_one_minus_tanh_sq(u));
}

TapeSample GaussianPolicy::sample(Tape& tape, const Matrix& states, Rng& rng, bool track_params) {
  Heads h = heads(tape, states, track_params);
  Matrix eps(states.rows(), config_.action_dim);
  for (nn::Index i = 0; i < eps.size(); ++i) eps.data()[i] = rng.normal();
  Var u = h.mean + nn::cwise_product(nn::exp(h.log_std), tape.constant(eps));
  Var act = nn::cwise_affine(nn::clamp(nn::tanh(u), -kTanhMax, kTanhMax), half_, center_);
  return {act, log_prob_of(u, h.log_std, eps), u.value()};
}

std::pair<Matrix, Eigen::VectorXd> GaussianPolicy::sample(const Matrix& states, Rng& rng) {
  Tape tape;
  TapeSample s = sample(tape, states, rng, false);
  return {s.actions.value(), s.log_probs.value().col(0)};
}

SampledAction GaussianPolicy::sample(const Eigen::VectorXd& state, Rng& rng) {
  Tape tape;
  TapeSample s = sample(tape, state.transpose(), rng, false);
  return {s.actions.value().row(0).transpose(), s.log_probs.scalar(),
          s.pre_squash.row(0).transpose()};
}

Eigen::VectorXd GaussianPolicy::mean_action(const Eigen::VectorXd& state) {
  Tape tape;
  Heads h = heads(tape, state.transpose(), false);
  return (center_.array() +
          half_.array() * h.mean.value().row(0).array().tanh().cwiseMin(kTanhMax).cwiseMax(-kTanhMax))
      .matrix()
      .transpose();
}

double GaussianPolicy::log_prob(const Eigen::VectorXd& state, const Eigen::VectorXd& action) {
  if (action.size() != config_.action_dim) {
    throw nn::ShapeError("GaussianPolicy::log_prob: action width mismatch");
  }
  Tape tape;
  Heads h = heads(tape, state.transpose(), false);
  double lp = -log_half_sum_;
  for (nn::Index j = 0; j < action.size(); ++j) {
    const double t = (action(j) - center_(j)) / half_(j);
    if (!(std::abs(t) < 1.0)) {
      throw std::domain_error("GaussianPolicy::log_prob: action on or outside the bounds");
    }
    const double u = std::atanh(t);
    const double ls = h.log_std.value()(0, j);
    const double z = (u - h.mean.value()(0, j)) / std::exp(ls);
    lp += -0.5 * z * z - ls - kHalfLog2Pi - log_one_minus_tanh_sq(u);
  }
  return lp;
}

void GaussianPolicy::save(nn::Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.put_mlp(prefix + "/net", net_);
  ckpt.put_adam(prefix + "/adam", adam_);
}

void GaussianPolicy::load(const nn::Checkpoint& ckpt, const std::string& prefix) {
  ckpt.get_mlp(prefix + "/net", net_);
  ckpt.get_adam(prefix + "/adam", adam_);
}

PolicyLossResult policy_loss(Tape& tape, GaussianPolicy& policy, critic::EnsembleCritic& critic,
                             const Matrix& states, critic::PenaltyKind kind,
                             double effective_beta, double alpha, Rng& rng) {
  TapeSample s = policy.sample(tape, states, rng, true);
  Var q = critic.values(tape, states, s.actions, critic::Network::online, false, false);
  Var reg = critic::regularized_value(q, kind, tape.constant(effective_beta));
  PolicyLossResult r;
  r.loss = nn::mean(s.log_probs * alpha - reg);
  r.log_probs = s.log_probs.value().col(0);
  r.entropy = -r.log_probs.mean();
  return r;
}

}  // namespace gpl::policy
