#include "gpl/agent/agent.hpp"

#include "gpl/alloc.hpp"

#include <cmath>
#include <cstring>

namespace gpl::agent {

using Matrix = nn::Matrix<double>;

namespace {

critic::CriticConfig critic_config(const AgentConfig& c, const env::EnvSpec& s) {
  critic::CriticConfig cc;
  cc.state_dim = s.state_dim;
  cc.action_dim = s.action_dim;
  cc.members = c.members;
  cc.hidden = c.critic_hidden;
  cc.variant = c.critic_variant;
  cc.seed = c.seed;
  cc.adam = {c.critic_lr, c.adam_beta1, 0.999, 1e-8};
  return cc;
}

policy::PolicyConfig policy_config(const AgentConfig& c, const env::EnvSpec& s) {
  policy::PolicyConfig pc;
  pc.state_dim = s.state_dim;
  pc.action_dim = s.action_dim;
  pc.action_low = s.action_low;
  pc.action_high = s.action_high;
  pc.hidden = c.policy_hidden;
  pc.seed = c.seed;
  pc.adam = {c.policy_lr, c.adam_beta1, 0.999, 1e-8};
  return pc;
}

const AgentConfig& validated(const AgentConfig& c) {
  c.validate();
  return c;
}

std::unique_ptr<env::Environment> build_env(const AgentConfig& c) {
  return env::make_environment(c.env, c.dynamics);
}

// Config identity for resuming: everything but the run length.
std::string resume_key(AgentConfig c) {
  c.total_steps = 0;
  return serialize(c);
}

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv(std::uint64_t& h, std::span<const double> xs) {
  for (double x : xs) {
    unsigned char b[sizeof(double)];
    std::memcpy(b, &x, sizeof b);
    for (unsigned char c : b) h = (h ^ c) * kFnvPrime;
  }
}

}  // namespace

EvalResult evaluate(policy::GaussianPolicy& policy, env::Environment& env, int episodes,
                    std::uint64_t seed, EvalMode mode) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  Rng rng(seed);
  EvalResult r;
  for (int e = 0; e < episodes; ++e) {
    Eigen::VectorXd s = env.reset(rng.next_seed());
    double ret = 0.0;
    for (;;) {
      const Eigen::VectorXd a =
          mode == EvalMode::mean_action ? policy.mean_action(s) : policy.sample(s, rng).action;
      env::StepResult sr = env.step(a);
      ret += sr.reward;
      if (sr.terminal || sr.truncated) break;
      s = std::move(sr.next_state);
    }
    r.returns.push_back(ret);
  }
  const Eigen::Map<const Eigen::VectorXd> v(r.returns.data(), episodes);
  r.mean = v.mean();
  r.std = std::sqrt((v.array() - r.mean).square().mean());
  return r;
}

Agent::Agent(AgentConfig config)
    : config_(validated(config)),
      env_(build_env(config_)),
      eval_env_(build_env(config_)),
      critic_(critic_config(config_, env_->spec())),
      policy_(policy_config(config_, env_->spec())),
      beta_(config_.penalty.beta, {config_.beta_lr, config_.beta_beta1, 0.999, 1e-8},
            config_.beta_nonnegative),
      alpha_(config_.alpha_init,
             std::isnan(config_.target_entropy) ? -static_cast<double>(env_->spec().action_dim)
                                                : config_.target_entropy,
             {config_.alpha_lr, config_.alpha_beta1, 0.999, 1e-8}),
      replay_(static_cast<std::size_t>(config_.replay_capacity), env_->spec().state_dim,
              env_->spec().action_dim) {
  configure_allocator();
  Rng master(config_.seed);
  update_rng_ = Rng(master.next_seed());
  act_rng_ = Rng(master.next_seed());
  env_rng_ = Rng(master.next_seed());
  begin_episode();
}

std::unique_ptr<env::Environment> Agent::make_env() const { return build_env(config_); }

void Agent::begin_episode() {
  state_ = env_->reset(env_rng_.next_seed());
  episode_return_ = 0.0;
  episode_length_ = 0;
}

StepRecord Agent::step() {
  if (done()) throw std::logic_error("Agent::step: run already complete");
  const env::EnvSpec& spec = env_->spec();
  Eigen::VectorXd action(spec.action_dim);
  if (step_ < config_.warmup_steps) {
    for (int j = 0; j < spec.action_dim; ++j) {
      action(j) = act_rng_.uniform(spec.action_low(j), spec.action_high(j));
    }
  } else {
    action = policy_.sample(state_, act_rng_).action;
  }
  env::StepResult sr = env_->step(action);
  replay_.push(replay::Transition{state_, action, sr.reward, sr.next_state,
                                  sr.terminal ? 0.0 : 1.0});

  StepRecord rec;
  rec.step = step_ + 1;
  rec.reward = sr.reward;
  episode_return_ += sr.reward;
  ++episode_length_;
  if (sr.terminal || sr.truncated) {
    rec.episode_return = episode_return_;
    ++episode_;
    begin_episode();
  } else {
    state_ = std::move(sr.next_state);
  }

  rec.lambda = config_.anneal.lambda(step_);
  if (step_ >= config_.warmup_steps &&
      replay_.size() >= static_cast<std::size_t>(config_.min_data)) {
    update(rec);
  }
  ++step_;
  rec.beta = beta_.beta();
  rec.alpha = alpha_.alpha();
  rec.critic_updates = counters_.critic;
  rec.beta_updates = counters_.beta;
  rec.policy_updates = counters_.policy;
  rec.alpha_updates = counters_.alpha;
  return rec;
}

void Agent::update(StepRecord& rec) {
  const auto kind = config_.penalty.kind;
  const auto b = static_cast<std::size_t>(config_.batch_size);
  replay::Batch batch;
  Matrix errors;
  std::vector<Matrix> all_errors;
  double td_loss = 0.0, penalty_mean = 0.0;

  for (int k = 0; k < config_.utd; ++k) {
    batch = replay_.sample(b, update_rng_);
    auto [next_a, next_lp] = policy_.sample(batch.next_states, update_rng_);
    critic::TargetResult tr;
    try {
      tr = critic::td_targets(batch, next_a, next_lp, critic_, kind, beta_.beta(),
                              alpha_.alpha(), config_.gamma);
    } catch (const critic::NonFiniteError& e) {
      throw TrainingAborted(std::string(e.what()) + " at env step " + std::to_string(step_));
    }
    critic::Tape tape;
    critic::TdBatchResult td = critic::td_loss_and_errors(tape, critic_, batch, tr.targets);
    td_loss = td.loss.scalar();
    if (!std::isfinite(td_loss)) {
      throw TrainingAborted("non-finite critic loss at env step " + std::to_string(step_));
    }
    auto& params = critic_.network(critic::Network::online).params();
    params.zero_grad();
    tape.backward(td.loss);
    if (!nn::adam_step(params, critic_.optimizer())) {
      throw TrainingAborted("non-finite critic gradient at env step " + std::to_string(step_));
    }
    critic_.polyak_update(config_.rho);
    ++counters_.critic;
    penalty_mean = tr.penalty_mean;
    errors = std::move(td.errors);
    if (config_.beta_errors == BetaErrors::mean_over_batches) all_errors.push_back(errors);
  }
  rec.td_loss = td_loss;
  rec.penalty_mean = penalty_mean;
  rec.bias = pessimism::estimate_bias_from_errors(errors).value;

  switch (config_.penalty.beta_source) {
    case critic::BetaSource::fixed: break;
    case critic::BetaSource::dual: {
      if (config_.beta_errors == BetaErrors::mean_over_batches) {
        Matrix stacked(errors.rows(), errors.cols() * static_cast<nn::Index>(all_errors.size()));
        for (std::size_t i = 0; i < all_errors.size(); ++i) {
          stacked.middleCols(static_cast<nn::Index>(i) * errors.cols(), errors.cols()) =
              all_errors[i];
        }
        beta_.step(stacked);
      } else {
        beta_.step(errors);
      }
      ++counters_.beta;
      break;
    }
    case critic::BetaSource::end_to_end: {
      auto [next_a, next_lp] = policy_.sample(batch.next_states, update_rng_);
      nn::Tape<double> tape;
      auto beta_var = tape.variable(beta_.beta());
      auto loss = pessimism::e2e_beta_loss(tape, batch, next_a, next_lp, critic_, kind, beta_var,
                                           alpha_.alpha(), config_.gamma);
      tape.backward(loss);
      beta_.step_with_gradient(tape.grad(beta_var)(0, 0));
      ++counters_.beta;
      break;
    }
  }

  const double eff = pessimism::effective_beta(beta_.beta(), config_.anneal, step_,
                                               pessimism::BetaRole::policy);
  {
    nn::Tape<double> tape;
    policy::PolicyLossResult pl = policy::policy_loss(tape, policy_, critic_, batch.states, kind,
                                                      eff, alpha_.alpha(), update_rng_);
    auto& params = policy_.network().params();
    params.zero_grad();
    tape.backward(pl.loss);
    if (!std::isfinite(pl.loss.scalar()) || !nn::adam_step(params, policy_.optimizer())) {
      throw TrainingAborted("non-finite policy loss or gradient at env step " +
                            std::to_string(step_));
    }
    ++counters_.policy;
    rec.entropy = pl.entropy;
    alpha_.step(pl.log_probs);
    ++counters_.alpha;
  }
}

void Agent::train(RunMetrics& metrics, const std::function<void(Agent&)>& on_step) {
  while (!done()) {
    StepRecord rec = step();
    metrics.add(rec);
    if (rec.step % config_.eval_interval == 0) {
      const EvalResult ev = evaluate(config_.eval_episodes, config_.seed + 1000003ULL,
                                     EvalMode::mean_action);
      metrics.add(EvalRecord{rec.step, ev.mean, ev.std, config_.eval_episodes});
    }
    if (on_step) on_step(*this);
  }
  metrics.flush();
}

EvalResult Agent::evaluate(int episodes, std::uint64_t seed, EvalMode mode) {
  return agent::evaluate(policy_, *eval_env_, episodes, seed, mode);
}

void Agent::save_checkpoint(const std::filesystem::path& path) const {
  nn::Checkpoint ckpt;
  ckpt.put_text("config", serialize(config_));
  critic_.save(ckpt, "critic");
  policy_.save(ckpt, "policy");
  beta_.save(ckpt, "beta");
  alpha_.save(ckpt, "alpha");
  replay_.save(ckpt, "replay");
  ckpt.put_text("rng/update", update_rng_.state());
  ckpt.put_text("rng/act", act_rng_.state());
  ckpt.put_text("rng/env", env_rng_.state());
  ckpt.put_vector("env/state", env_->save_state());
  ckpt.put_vector("agent/observation", std::vector<double>(state_.data(),
                                                           state_.data() + state_.size()));
  ckpt.put_vector("agent/progress",
                  std::vector<double>{static_cast<double>(step_), static_cast<double>(episode_),
                                      episode_return_, static_cast<double>(episode_length_),
                                      static_cast<double>(counters_.critic),
                                      static_cast<double>(counters_.beta),
                                      static_cast<double>(counters_.policy),
                                      static_cast<double>(counters_.alpha)});
  ckpt.save(path);
}

Agent Agent::load_checkpoint(const std::filesystem::path& path) {
  const nn::Checkpoint ckpt = nn::Checkpoint::load(path);
  Agent a(deserialize(ckpt.text("config")));
  a.restore(path);
  return a;
}

void Agent::restore(const std::filesystem::path& path) {
  const nn::Checkpoint ckpt = nn::Checkpoint::load(path);
  const AgentConfig stored = deserialize(ckpt.text("config"));
  if (resume_key(stored) != resume_key(config_)) {
    throw nn::CheckpointError("checkpoint " + path.string() +
                              " was written with a different configuration");
  }
  critic_.load(ckpt, "critic");
  policy_.load(ckpt, "policy");
  beta_.load(ckpt, "beta");
  alpha_.load(ckpt, "alpha");
  replay_.load(ckpt, "replay");
  update_rng_.set_state(ckpt.text("rng/update"));
  act_rng_.set_state(ckpt.text("rng/act"));
  env_rng_.set_state(ckpt.text("rng/env"));
  env_->load_state(ckpt.vector("env/state"));
  const auto obs = ckpt.vector("agent/observation");
  state_ = Eigen::Map<const Eigen::VectorXd>(obs.data(), static_cast<Eigen::Index>(obs.size()));
  const auto p = ckpt.vector("agent/progress");
  if (p.size() != 8) throw nn::CheckpointError("checkpoint progress entry is malformed");
  step_ = static_cast<std::int64_t>(p[0]);
  episode_ = static_cast<std::int64_t>(p[1]);
  episode_return_ = p[2];
  episode_length_ = static_cast<std::int64_t>(p[3]);
  counters_ = {static_cast<std::int64_t>(p[4]), static_cast<std::int64_t>(p[5]),
               static_cast<std::int64_t>(p[6]), static_cast<std::int64_t>(p[7])};
}

std::uint64_t Agent::state_hash() const {
  std::uint64_t h = kFnvOffset;
  for (auto which : {critic::Network::online, critic::Network::target}) {
    fnv(h, critic_.network(which).params().values());
  }
  fnv(h, critic_.optimizer().first_moment);
  fnv(h, critic_.optimizer().second_moment);
  fnv(h, policy_.network().params().values());
  fnv(h, policy_.optimizer().first_moment);
  fnv(h, policy_.optimizer().second_moment);
  const double scalars[] = {beta_.beta(), alpha_.log_alpha()};
  fnv(h, scalars);
  return h;
}

}  // namespace gpl::agent
