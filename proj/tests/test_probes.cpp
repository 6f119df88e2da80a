#include "doctest.h"

#include "test_util.hpp"

#include "gpl/probes/bias_probe.hpp"
#include "gpl/probes/penalty_stats.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>

using namespace gpl;
using namespace gpl::probes;

namespace {

agent::AgentConfig tiny(std::uint64_t seed = 1) {
  agent::AgentConfig c;
  c.seed = seed;
  c.members = 3;
  c.utd = 1;
  c.batch_size = 16;
  c.warmup_steps = 50;
  c.min_data = 50;
  c.total_steps = 200;
  c.replay_capacity = 500;
  c.critic_hidden = {8, 8};
  c.policy_hidden = {8, 8};
  c.eval_interval = 100;
  c.eval_episodes = 1;
  return c;
}

/// Value oracle built from recorded trajectories: the exact discounted
/// return of each visited pair, looked up by (episode, step).
ValueFn oracle(const std::vector<Rollout>& rollouts, double gamma, double alpha,
               Correction corr, double offset) {
  return [&rollouts, gamma, alpha, corr, offset](const Eigen::MatrixXd& s,
                                                const Eigen::MatrixXd&) -> Eigen::VectorXd {
    for (const Rollout& r : rollouts) {
      if (r.states.rows() == s.rows() && r.states == s) {
        // Independent backward recursion, not discounted_returns().
        Eigen::VectorXd g(r.rewards.size());
        for (Eigen::Index t = 0; t < g.size(); ++t) {
          double acc = 0.0, disc = 1.0;
          for (Eigen::Index k = t; k < g.size(); ++k) {
            const double lp = corr == Correction::raw ? 0.0 : r.log_probs(k);
            acc += disc * (r.rewards(k) - alpha * lp);
            disc *= gamma;
          }
          g(t) = acc + offset;
        }
        return g;
      }
    }
    throw std::logic_error("unknown rollout");
  };
}

}  // namespace

TEST_CASE("half-integer gamma recurrence matches boost") {
  for (int k = 1; k <= 40; ++k) {
    CHECK(gamma_half(k) == doctest::Approx(boost::math::tgamma(k / 2.0)).epsilon(1e-13));
  }
  CHECK(gamma_half(3) == doctest::Approx(std::sqrt(std::numbers::pi) / 2.0));
  CHECK_THROWS(gamma_half(0));
}

TEST_CASE("reference closed forms") {
  CHECK(wasserstein_reference(0.5, 1.0) == doctest::Approx(0.31831).epsilon(1e-5));
  CHECK(wasserstein_reference(0.5, 1.0) == doctest::Approx(1.0 / std::numbers::pi));
  CHECK(popstd_reference(2, 1.0, 1.0) == doctest::Approx(std::sqrt(2.0 * std::numbers::pi) / 4.0));
  CHECK(popstd_reference(2, 1.0, 1.0) == doctest::Approx(0.62666).epsilon(1e-5));
  // Reference does not depend on N for the pairwise penalty.
  PenaltyStatsConfig a, b;
  a.members = 2;
  b.members = 10;
  a.samples = b.samples = 10000;
  CHECK(wasserstein_expectation_mc(a).reference == wasserstein_expectation_mc(b).reference);
  // Exact forms: folded normal of a difference, and a chi with N - 1 degrees of freedom.
  CHECK(wasserstein_exact(0.5, 1.0) == doctest::Approx(1.0 / std::sqrt(std::numbers::pi)));
  CHECK(popstd_exact(2, 1.0, 1.0) == doctest::Approx(1.0 / std::sqrt(std::numbers::pi)));
}

TEST_CASE("degenerate configurations give exactly zero") {
  PenaltyStatsConfig c;
  c.samples = 10000;
  c.beta = 0.0;
  CHECK(wasserstein_expectation_mc(c).estimate == 0.0);
  c.beta = 1.0;
  c.sigma = 0.0;
  CHECK(popstd_expectation_mc(c).estimate == 0.0);
  CHECK(wasserstein_expectation_mc(c).estimate == 0.0);
  c.samples = 100;
  CHECK_THROWS(wasserstein_expectation_mc(c));
  c.samples = 10000;
  c.members = 1;
  CHECK_THROWS(popstd_expectation_mc(c));
}

TEST_CASE("estimators track the exact expectations within 4 standard errors") {
  for (int n : {2, 5, 10}) {
    PenaltyStatsConfig c;
    c.members = n;
    c.beta = 0.5;
    c.sigma = 1.3;
    c.samples = 200000;
    c.seed = static_cast<std::uint64_t>(n);
    const auto w = wasserstein_expectation_mc(c);
    CHECK(std::abs(w.estimate - w.exact_reference) < 4.0 * w.standard_error);
    const auto p = popstd_expectation_mc(c);
    CHECK(std::abs(p.estimate - p.exact_reference) < 4.0 * p.standard_error);
    CHECK(w.samples == 200000);
  }
}

TEST_CASE("standard error halves when samples quadruple") {
  PenaltyStatsConfig c;
  c.members = 5;
  c.samples = 50000;
  const double se1 = wasserstein_expectation_mc(c).standard_error;
  c.samples = 200000;
  c.seed = 1;
  const double se4 = wasserstein_expectation_mc(c).standard_error;
  CHECK(se1 / se4 == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("N = 2, beta = 0.5 estimate equals the pathwise mean minus min") {
  PenaltyStatsConfig c;
  c.members = 2;
  c.beta = 0.5;
  c.samples = 20000;
  c.seed = 4;
  double sum = 0.0;
  std::int64_t n = 0;
  for_each_value_set(c, [&](std::span<const double> q) {
    const double mean = 0.5 * (q[0] + q[1]);
    const double p = critic::wasserstein_penalty(q, c.beta);
    CHECK(std::abs(p - (mean - std::min(q[0], q[1]))) < 1e-12);
    sum += mean - std::min(q[0], q[1]);
    ++n;
  });
  CHECK(wasserstein_expectation_mc(c).estimate == doctest::Approx(sum / n).epsilon(1e-12));
}

TEST_CASE("rollout bias: oracle critic gives zero, offset critic gives the offset") {
  agent::Agent a(tiny());
  for (int i = 0; i < 120; ++i) a.step();
  auto env = a.make_env();
  const auto rollouts = collect_rollouts(a.policy(), *env, 3, 17);
  CHECK(rollouts.size() == 3);
  CHECK(rollouts[0].rewards.size() == env->spec().max_episode_steps);
  const double alpha = a.alpha(), gamma = 0.99;
  for (auto corr : {Correction::entropy_corrected, Correction::raw}) {
    const auto zero = bias_from_rollouts(rollouts, oracle(rollouts, gamma, alpha, corr, 0.0), gamma,
                                         alpha, corr);
    CHECK(std::abs(zero.estimate.value) < 1e-9);
    const auto one = bias_from_rollouts(rollouts, oracle(rollouts, gamma, alpha, corr, 1.0), gamma,
                                        alpha, corr);
    CHECK(one.estimate.value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(one.estimate.source == pessimism::BiasSource::rollout);
    CHECK(one.pairs == 3 * env->spec().max_episode_steps);
  }
}

TEST_CASE("raw and entropy-corrected bias differ by alpha times the discounted log-prob") {
  agent::Agent a(tiny(2));
  for (int i = 0; i < 120; ++i) a.step();
  BiasProbeConfig c;
  c.episodes = 2;
  c.seed = 5;
  const auto corrected = rollout_bias_probe(a, c);
  c.correction = Correction::raw;
  const auto raw = rollout_bias_probe(a, c);
  CHECK(corrected.estimate.value - raw.estimate.value ==
        doctest::Approx(a.alpha() * raw.mean_discounted_log_prob).epsilon(1e-9));
  CHECK(corrected.mean_prediction == raw.mean_prediction);
}

TEST_CASE("probe rejects zero episodes and leaves the agent untouched") {
  agent::Agent a(tiny(3)), b(tiny(3));
  for (int i = 0; i < 80; ++i) {
    a.step();
    b.step();
  }
  BiasProbeConfig c;
  c.episodes = 0;
  CHECK_THROWS(rollout_bias_probe(a, c));
  c.episodes = 2;
  const auto h = a.state_hash();
  rollout_bias_probe(a, c);
  CHECK(a.state_hash() == h);
  for (int i = 0; i < 20; ++i) CHECK(a.step() == b.step());
}

TEST_CASE("fixed-beta experiment: validation, labels, determinism") {
  FixedBetaExperiment e;
  e.base = tiny();
  e.arms = {0.0, std::nullopt};
  e.seeds = {1};
  e.steps = 150;
  e.schedule.interval = 50;
  e.schedule.probe.episodes = 1;
  CHECK_THROWS(e.validate());
  e.arms = {0.0, 0.5, std::nullopt};
  const auto t1 = fixed_beta_bias_experiment(e);
  const auto t2 = fixed_beta_bias_experiment(e);
  REQUIRE(t1.size() == 3);
  CHECK(t1[0].label == "fixed_0");
  CHECK(t1[1].label == "fixed_0.5");
  CHECK(t1[2].label == "dual");
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(t1[i].steps == std::vector<std::int64_t>{50, 100, 150});
    CHECK(t1[i].bias == t2[i].bias);
    CHECK(t1[i].time_average == doctest::Approx((t1[i].bias[1] + t1[i].bias[2]) / 2.0));
  }
}
