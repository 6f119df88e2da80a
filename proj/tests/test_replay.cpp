#include "doctest.h"

#include "gpl/replay/replay_buffer.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <filesystem>

using namespace gpl;
using namespace gpl::replay;

namespace {

Transition make(double k) {
  Transition t;
  t.state = Eigen::Vector2d(k, -k);
  t.action = Eigen::VectorXd::Constant(1, k / 10.0);
  t.reward = k * 0.5;
  t.next_state = Eigen::Vector2d(k + 1.0, 1.0 / 3.0 + k);
  t.bootstrap_mask = static_cast<int>(k) % 2 == 0 ? 1.0 : 0.0;
  return t;
}

bool same(const Transition& a, const Transition& b) {
  return a.state == b.state && a.action == b.action && a.reward == b.reward &&
         a.next_state == b.next_state && a.bootstrap_mask == b.bootstrap_mask;
}

}  // namespace

TEST_CASE("push grows size; payload reads back bit-exactly") {
  ReplayBuffer buf(5, 2, 1);
  CHECK(buf.size() == 0);
  buf.push(make(1.0));
  CHECK(buf.size() == 1);
  CHECK(same(buf.at(0), make(1.0)));
}

TEST_CASE("FIFO overwrite: after k > capacity pushes the last capacity remain") {
  ReplayBuffer two(2, 2, 1);
  for (int k = 1; k <= 3; ++k) two.push(make(k));
  CHECK(two.size() == 2);
  CHECK(same(two.at(0), make(2)));
  CHECK(same(two.at(1), make(3)));

  ReplayBuffer buf(7, 2, 1);
  for (int k = 1; k <= 23; ++k) {
    buf.push(make(k));
    CHECK(buf.size() == static_cast<std::size_t>(std::min(k, 7)));
  }
  for (std::size_t i = 0; i < 7; ++i) CHECK(same(buf.at(i), make(23 - 7 + 1 + static_cast<int>(i))));
}

TEST_CASE("width mismatch and bad masks are rejected; empty sample rejected") {
  ReplayBuffer buf(4, 2, 1);
  Transition t = make(1);
  t.state = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(buf.push(t), std::invalid_argument);
  t = make(1);
  t.bootstrap_mask = 0.5;
  CHECK_THROWS_AS(buf.push(t), std::invalid_argument);
  Rng rng(0);
  CHECK_THROWS(buf.sample(3, rng));
  CHECK_THROWS(ReplayBuffer(0, 2, 1));
}

TEST_CASE("size-1 buffer yields copies of its only transition") {
  ReplayBuffer buf(3, 2, 1);
  buf.push(make(4));
  Rng rng(1);
  const Batch b = buf.sample(16, rng);
  CHECK(b.size() == 16);
  for (Eigen::Index r = 0; r < 16; ++r) {
    CHECK(b.states.row(r) == make(4).state.transpose());
    CHECK(b.rewards(r) == make(4).reward);
    CHECK(b.masks(r) == 1.0);
  }
}

TEST_CASE("sampling is deterministic given rng state") {
  ReplayBuffer buf(10, 2, 1);
  for (int k = 0; k < 10; ++k) buf.push(make(k));
  Rng a(77), b(77);
  const Batch x = buf.sample(32, a), y = buf.sample(32, b);
  CHECK(x.states == y.states);
  CHECK(x.next_states == y.next_states);
  CHECK(a == b);
}

TEST_CASE("chi-square uniformity over 1e5 draws from a 10-element buffer") {
  ReplayBuffer buf(10, 2, 1);
  for (int k = 0; k < 10; ++k) buf.push(make(k));
  Rng rng(2024);
  std::vector<double> counts(10, 0.0);
  const int draws = 100000;
  for (int i = 0; i < draws / 100; ++i) {
    const Batch b = buf.sample(100, rng);
    for (Eigen::Index r = 0; r < b.size(); ++r) counts[static_cast<std::size_t>(b.states(r, 0))] += 1;
  }
  double stat = 0.0;
  const double expected = draws / 10.0;
  for (double c : counts) stat += (c - expected) * (c - expected) / expected;
  const boost::math::chi_squared dist(9);
  const double p = boost::math::cdf(boost::math::complement(dist, stat));
  CHECK(p > 0.01);
}

TEST_CASE("checkpoint round trip preserves contents and order") {
  ReplayBuffer buf(4, 2, 1);
  for (int k = 0; k < 6; ++k) buf.push(make(k));
  nn::Checkpoint c;
  buf.save(c, "replay");
  ReplayBuffer back(4, 2, 1);
  back.load(c, "replay");
  CHECK(back.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(same(back.at(i), buf.at(i)));
  back.push(make(99));
  buf.push(make(99));
  for (std::size_t i = 0; i < 4; ++i) CHECK(same(back.at(i), buf.at(i)));
  ReplayBuffer wrong(5, 3, 1);
  CHECK_THROWS(wrong.load(c, "replay"));
}
