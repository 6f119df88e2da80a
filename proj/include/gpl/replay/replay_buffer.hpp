#pragma once

#include "gpl/nn/checkpoint.hpp"
#include "gpl/nn/types.hpp"
#include "gpl/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>

namespace gpl::replay {

using Matrix = nn::Matrix<double>;

struct Transition {
  Eigen::VectorXd state;
  Eigen::VectorXd action;
  double reward = 0.0;
  Eigen::VectorXd next_state;
  /// 1.0 unless the transition ended in a true terminal state. Time-limit
  /// truncation keeps 1.0 so targets bootstrap through it.
  double bootstrap_mask = 1.0;
};

/// One transition per row.
struct Batch {
  Matrix states;
  Matrix actions;
  Eigen::VectorXd rewards;
  Matrix next_states;
  Eigen::VectorXd masks;

  Eigen::Index size() const { return states.rows(); }
};

/// Fixed-capacity FIFO ring of transitions with uniform, with-replacement
/// sampling.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int state_dim, int action_dim);

  void push(const Transition& t);
  Batch sample(std::size_t batch_size, Rng& rng) const;

  /// i-th oldest stored transition, 0 <= i < size().
  Transition at(std::size_t i) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }

  void save(nn::Checkpoint& ckpt, const std::string& prefix) const;
  void load(const nn::Checkpoint& ckpt, const std::string& prefix);

 private:
  std::size_t physical(std::size_t logical) const;

  std::size_t capacity_;
  int state_dim_;
  int action_dim_;
  Matrix states_;
  Matrix actions_;
  Eigen::VectorXd rewards_;
  Matrix next_states_;
  Eigen::VectorXd masks_;
  std::size_t cursor_ = 0;
  std::size_t size_ = 0;
};

}  // namespace gpl::replay
