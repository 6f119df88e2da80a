#include "doctest.h"

#include "test_util.hpp"

#include "gpl/nn/gradient_check.hpp"
#include "gpl/pessimism/pessimism.hpp"

using namespace gpl;
using namespace gpl::pessimism;
using gpl::testing::random_batch;
using gpl::testing::random_matrix;
using gpl::testing::random_vector;
using Mat = nn::Matrix<double>;

namespace {

critic::CriticConfig small_critic(std::uint64_t seed = 3) {
  critic::CriticConfig c;
  c.state_dim = 3;
  c.action_dim = 1;
  c.members = 4;
  c.hidden = {8, 8};
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("bias from td errors") {
  CHECK(estimate_bias_from_errors(Mat::Zero(3, 4)).value == 0.0);
  CHECK(estimate_bias_from_errors(Mat::Ones(3, 4)).value == -1.0);
  Mat sym(1, 2);
  sym << 1.0, -1.0;
  CHECK(estimate_bias_from_errors(sym).value == 0.0);
  CHECK(estimate_bias_from_errors(sym).source == BiasSource::td_errors);
  CHECK_THROWS(estimate_bias_from_errors(Mat(0, 0)));
}

TEST_CASE("dual beta gradient: member sum, batch mean") {
  Mat e(2, 3);
  e << 1.0, 2.0, 3.0,
       -1.0, 0.5, 0.5;
  // column sums 0, 2.5, 3.5 -> mean 2
  CHECK(dual_beta_gradient(e) == doctest::Approx(2.0));
  // Plain gradient descent with lr 0.1 on a summed error of +2 lowers beta by 0.2.
  const double beta = 0.5;
  CHECK(beta - 0.1 * dual_beta_gradient(e) == doctest::Approx(0.3));
}

TEST_CASE("dual beta: zero errors leave beta unchanged; non-finite skipped") {
  DualBeta d(0.5);
  CHECK(d.step(Mat::Zero(5, 8)));
  CHECK(d.beta() == 0.5);
  Mat bad = Mat::Ones(2, 2);
  bad(1, 1) = std::nan("");
  CHECK_FALSE(d.step(bad));
  CHECK(d.beta() == 0.5);
  CHECK(d.optimizer().step == 1);
}

TEST_CASE("dual update direction: 100/100 sign test on fresh optimizers") {
  Rng rng(7);
  int pass = 0;
  for (int k = 0; k < 100; ++k) {
    Mat e = random_matrix(5, 32, 1000 + k);
    const double shift = rng.uniform(0.01, 2.0) * (k % 2 == 0 ? 1.0 : -1.0);
    e.array() += shift - e.mean();
    DualBeta d(0.5);
    d.step(e);
    if ((shift > 0 && d.beta() < 0.5) || (shift < 0 && d.beta() > 0.5)) ++pass;
  }
  CHECK(pass == 100);
}

TEST_CASE("dual beta: determinism, nonnegativity, checkpoint") {
  DualBeta a(0.5), b(0.5), nn(0.05, default_beta_adam(), true);
  for (int k = 0; k < 30; ++k) {
    const Mat e = random_matrix(3, 16, 50 + k);
    a.step(e);
    b.step(e);
    nn.step((e.array() + 3.0).matrix());
    CHECK(nn.beta() >= 0.0);
  }
  CHECK(a.beta() == b.beta());
  CHECK(nn.beta() == 0.0);
  CHECK_THROWS(DualBeta(-1.0, default_beta_adam(), true));

  nn::Checkpoint c;
  a.save(c, "beta");
  DualBeta r(0.0);
  r.load(c, "beta");
  const Mat e = random_matrix(3, 16, 99);
  a.step(e);
  r.step(e);
  CHECK(a.beta() == r.beta());
}

TEST_CASE("beta is stationary when targets are unbiased") {
  DualBeta d(0.37);
  for (int k = 0; k < 100; ++k) d.step(Mat::Zero(5, 64));
  CHECK(d.beta() == 0.37);
}

TEST_CASE("alpha: zero gradient at target entropy, increases when entropy is low") {
  EntropyAlpha a(1.0, -1.0);
  const Eigen::VectorXd at_target = Eigen::VectorXd::Constant(10, 1.0);  // -log pi = -1
  CHECK(a.gradient(at_target) == 0.0);
  a.step(at_target);
  CHECK(a.alpha() == 1.0);

  EntropyAlpha b(0.3, -1.0);
  const Eigen::VectorXd low = Eigen::VectorXd::Constant(10, 2.0);  // entropy -2 < -1
  CHECK(b.gradient(low) < 0.0);
  b.step(low);
  CHECK(b.alpha() > 0.3);

  EntropyAlpha c(0.3, -1.0);
  c.step(Eigen::VectorXd::Constant(10, -1.0));  // entropy 1 > -1
  CHECK(c.alpha() < 0.3);
  CHECK_THROWS(EntropyAlpha(0.0, -1.0));
}

TEST_CASE("alpha stays positive and deterministic under arbitrary updates") {
  EntropyAlpha a(1.0, -1.0, {0.5, 0.5, 0.999, 1e-8}), b(1.0, -1.0, {0.5, 0.5, 0.999, 1e-8});
  for (int k = 0; k < 500; ++k) {
    const Eigen::VectorXd lp = random_vector(8, 700 + k, 20.0);
    a.step(lp);
    b.step(lp);
    CHECK(a.alpha() > 0.0);
  }
  CHECK(a.log_alpha() == b.log_alpha());
}

TEST_CASE("anneal schedule and effective beta") {
  const AnnealSchedule s{0.5, 0.0, 100};
  CHECK(s.lambda(0) == 0.5);
  CHECK(s.lambda(50) == doctest::Approx(0.25));
  CHECK(s.lambda(100) == 0.0);
  CHECK(s.lambda(10000) == 0.0);
  CHECK(effective_beta(0.7, s, 0, BetaRole::policy) == doctest::Approx(0.2));
  CHECK(effective_beta(0.7, s, 100, BetaRole::policy) == 0.7);
  for (std::int64_t t : {0, 1, 37, 99, 100, 5000}) {
    CHECK(effective_beta(0.7, s, t, BetaRole::target) == 0.7);
  }
  const AnnealSchedule off{};
  CHECK(off.disabled());
  CHECK(effective_beta(0.7, off, 0, BetaRole::policy) == 0.7);
  CHECK(effective_beta(0.7, off, 0, BetaRole::target) == 0.7);
  CHECK_THROWS(AnnealSchedule{-0.1, 0.0, 10}.validate());
  CHECK_THROWS(AnnealSchedule{0.5, 0.0, -1}.validate());
  CHECK_NOTHROW(AnnealSchedule{0.5, 0.1, 0}.validate());
  CHECK(AnnealSchedule{0.5, 0.1, 0}.lambda(0) == 0.1);
}

TEST_CASE("e2e beta loss: gradient matches finite differences at 20 random points") {
  for (auto kind : {critic::PenaltyKind::wasserstein, critic::PenaltyKind::popstd}) {
    for (int k = 0; k < 20; ++k) {
      critic::EnsembleCritic c(small_critic(10 + k));
      const auto batch = random_batch(6, 3, 1, 100 + k);
      const Mat na = random_matrix(6, 1, 200 + k);
      const Eigen::VectorXd lp = random_vector(6, 300 + k);
      auto loss = [&](nn::Tape<double>& t, nn::Var<double> b) {
        return e2e_beta_loss(t, batch, na, lp, c, kind, b, 0.2, 0.99);
      };
      CHECK(nn::gradient_check<double>(loss, Mat::Constant(1, 1, -1.0 + 0.15 * k))
                .max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("e2e beta loss: zero at the unbiased beta, beta-free when gamma is 0") {
  critic::EnsembleCritic c(small_critic());
  auto batch = random_batch(1, 3, 1, 5);
  batch.masks(0) = 1.0;
  const Mat na = random_matrix(1, 1, 6);
  const Eigen::VectorXd lp = random_vector(1, 7);
  const double alpha = 0.2, gamma = 0.99;
  const Mat qn = c.values(batch.next_states, na, critic::Network::target);
  const Mat q = c.values(batch.states, batch.actions, critic::Network::online);
  const std::vector<double> row(qn.data(), qn.data() + qn.size());
  const double disp = critic::wasserstein_penalty(row, 1.0);
  // r + gamma (mean' - beta disp - alpha lp) - mean(Q) = 0
  const double beta_star =
      (batch.rewards(0) + gamma * (qn.mean() - alpha * lp(0)) - q.mean()) / (gamma * disp);
  nn::Tape<double> t;
  nn::Var<double> b = t.variable(beta_star);
  nn::Var<double> l =
      e2e_beta_loss(t, batch, na, lp, c, critic::PenaltyKind::wasserstein, b, alpha, gamma);
  t.backward(l);
  CHECK(l.scalar() < 1e-20);
  CHECK(std::abs(t.grad(b)(0, 0)) < 1e-9);

  const auto many = random_batch(8, 3, 1, 8);
  const Mat na8 = random_matrix(8, 1, 9);
  const Eigen::VectorXd lp8 = random_vector(8, 10);
  nn::Tape<double> t0;
  nn::Var<double> b0 = t0.variable(0.3);
  nn::Var<double> l0 =
      e2e_beta_loss(t0, many, na8, lp8, c, critic::PenaltyKind::wasserstein, b0, alpha, 0.0);
  t0.backward(l0);
  CHECK(t0.grad(b0)(0, 0) == 0.0);
  nn::Tape<double> t1;
  CHECK(e2e_beta_loss(t1, many, na8, lp8, c, critic::PenaltyKind::wasserstein,
                      t1.constant(5.0), alpha, 0.0)
            .scalar() == l0.scalar());

  nn::Tape<double> t2;
  CHECK_THROWS(e2e_beta_loss(t2, many, na8, lp8, c, critic::PenaltyKind::minclip,
                             t2.variable(0.5), alpha, gamma));
}
