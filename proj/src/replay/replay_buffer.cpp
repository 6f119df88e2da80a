#include "gpl/replay/replay_buffer.hpp"

#include <stdexcept>
#include <string>

namespace gpl::replay {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim, int action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
  if (capacity == 0 || state_dim <= 0 || action_dim <= 0) {
    throw std::invalid_argument("ReplayBuffer: capacity and widths must be positive");
  }
  const auto n = static_cast<Eigen::Index>(capacity);
  states_.resize(n, state_dim);
  actions_.resize(n, action_dim);
  rewards_.resize(n);
  next_states_.resize(n, state_dim);
  masks_.resize(n);
}

void ReplayBuffer::push(const Transition& t) {
  if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_ ||
      t.action.size() != action_dim_) {
    throw std::invalid_argument(
        "ReplayBuffer::push: transition widths (state " + std::to_string(t.state.size()) +
        ", action " + std::to_string(t.action.size()) + ", next state " +
        std::to_string(t.next_state.size()) + ") do not match buffer (" +
        std::to_string(state_dim_) + ", " + std::to_string(action_dim_) + ")");
  }
  if (t.bootstrap_mask != 0.0 && t.bootstrap_mask != 1.0) {
    throw std::invalid_argument("ReplayBuffer::push: bootstrap mask must be 0 or 1");
  }
  const auto r = static_cast<Eigen::Index>(cursor_);
  states_.row(r) = t.state.transpose();
  actions_.row(r) = t.action.transpose();
  rewards_(r) = t.reward;
  next_states_.row(r) = t.next_state.transpose();
  masks_(r) = t.bootstrap_mask;
  cursor_ = (cursor_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

std::size_t ReplayBuffer::physical(std::size_t logical) const {
  const std::size_t oldest = size_ < capacity_ ? 0 : cursor_;
  return (oldest + logical) % capacity_;
}

Transition ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("ReplayBuffer::at: index out of range");
  const auto r = static_cast<Eigen::Index>(physical(i));
  return Transition{states_.row(r).transpose(), actions_.row(r).transpose(), rewards_(r),
                    next_states_.row(r).transpose(), masks_(r)};
}

Batch ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("ReplayBuffer::sample: buffer is empty");
  const auto b = static_cast<Eigen::Index>(batch_size);
  Batch out{Matrix(b, state_dim_), Matrix(b, action_dim_), Eigen::VectorXd(b),
            Matrix(b, state_dim_), Eigen::VectorXd(b)};
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto r = static_cast<Eigen::Index>(physical(rng.index(size_)));
    out.states.row(i) = states_.row(r);
    out.actions.row(i) = actions_.row(r);
    out.rewards(i) = rewards_(r);
    out.next_states.row(i) = next_states_.row(r);
    out.masks(i) = masks_(r);
  }
  return out;
}

void ReplayBuffer::save(nn::Checkpoint& ckpt, const std::string& prefix) const {
  // Stored oldest-first so the layout does not depend on the cursor.
  const auto n = static_cast<Eigen::Index>(size_);
  Matrix s(n, state_dim_), a(n, action_dim_), ns(n, state_dim_), rm(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(physical(static_cast<std::size_t>(i)));
    s.row(i) = states_.row(r);
    a.row(i) = actions_.row(r);
    ns.row(i) = next_states_.row(r);
    rm(i, 0) = rewards_(r);
    rm(i, 1) = masks_(r);
  }
  ckpt.put_vector(prefix + "/meta",
                  std::vector<double>{static_cast<double>(capacity_), static_cast<double>(size_),
                                      static_cast<double>(state_dim_),
                                      static_cast<double>(action_dim_)});
  if (n == 0) return;
  ckpt.put_matrix(prefix + "/states", s);
  ckpt.put_matrix(prefix + "/actions", a);
  ckpt.put_matrix(prefix + "/next_states", ns);
  ckpt.put_matrix(prefix + "/rewards_masks", rm);
}

void ReplayBuffer::load(const nn::Checkpoint& ckpt, const std::string& prefix) {
  const auto meta = ckpt.vector(prefix + "/meta");
  if (meta.size() != 4 || static_cast<int>(meta[2]) != state_dim_ ||
      static_cast<int>(meta[3]) != action_dim_) {
    throw nn::CheckpointError("replay buffer '" + prefix + "' does not match the environment");
  }
  *this = ReplayBuffer(static_cast<std::size_t>(meta[0]), state_dim_, action_dim_);
  const auto n = static_cast<std::size_t>(meta[1]);
  if (n == 0) return;
  const Matrix s = ckpt.matrix(prefix + "/states");
  const Matrix a = ckpt.matrix(prefix + "/actions");
  const Matrix ns = ckpt.matrix(prefix + "/next_states");
  const Matrix rm = ckpt.matrix(prefix + "/rewards_masks");
  if (static_cast<std::size_t>(s.rows()) != n || a.rows() != s.rows() ||
      ns.rows() != s.rows() || rm.rows() != s.rows()) {
    throw nn::CheckpointError("replay buffer '" + prefix + "' is inconsistent");
  }
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    push(Transition{s.row(i).transpose(), a.row(i).transpose(), rm(i, 0), ns.row(i).transpose(),
                    rm(i, 1)});
  }
}

}  // namespace gpl::replay
