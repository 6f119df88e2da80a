#pragma once

#include "gpl/nn/param_store.hpp"
#include "gpl/nn/types.hpp"

#include <functional>
#include <initializer_list>
#include <vector>

namespace gpl::nn {

template <typename Scalar>
class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive and not cleared.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix<Scalar>& value() const { return tape_->value(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Scalar scalar() const {
    if (rows() != 1 || cols() != 1) {
      throw ShapeError("scalar() on non-scalar node of shape " + shape_str(value()));
    }
    return value()(0, 0);
  }
  bool requires_grad() const { return tape_->requires_grad(id_); }
  std::size_t id() const { return id_; }
  Tape<Scalar>& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order, so
/// the recording order is already topological; backward() walks it in reverse.
template <typename Scalar>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(Matrix<Scalar> value) { return push(std::move(value), false, {}); }

  Var<Scalar> constant(Scalar value) {
    Matrix<Scalar> m(1, 1);
    m(0, 0) = value;
    return constant(std::move(m));
  }

  /// Leaf whose gradient is read back through grad() after backward().
  Var<Scalar> variable(Matrix<Scalar> value) { return push(std::move(value), true, {}); }

  Var<Scalar> variable(Scalar value) {
    Matrix<Scalar> m(1, 1);
    m(0, 0) = value;
    return variable(std::move(m));
  }

  /// Leaf mirroring a stored parameter. With track = false the parameter is
  /// treated as a constant and never receives gradient.
  Var<Scalar> parameter(ParamStore<Scalar>& store, std::size_t param_id, bool track = true) {
    Var<Scalar> v = push(Matrix<Scalar>(store.value(param_id)), track, {});
    if (track) nodes_[v.id()].sink = Sink{&store, param_id};
    return v;
  }

  /// Records an op output. The backward function is kept only when at least
  /// one input needs a gradient.
  Var<Scalar> record(Matrix<Scalar> value, std::initializer_list<Var<Scalar>> inputs,
                     BackwardFn backward) {
    bool needs = false;
    for (const Var<Scalar>& in : inputs) needs = needs || requires_grad(in.id());
    return push(std::move(value), needs, needs ? std::move(backward) : BackwardFn{});
  }

  /// Reverse sweep from a scalar loss. Parameter gradients are accumulated
  /// (added) into their stores; call ParamStore::zero_grad() beforehand.
  void backward(Var<Scalar> loss) {
    const Matrix<Scalar>& lv = value(loss.id());
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ShapeError("backward() needs a scalar loss, got shape " + shape_str(lv));
    }
    for (Node& n : nodes_) n.grad.resize(0, 0);
    grad_buffer(loss.id())(0, 0) = Scalar(1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, i);
      if (n.sink.store != nullptr) n.sink.store->grad(n.sink.id) += n.grad;
    }
  }

  const Matrix<Scalar>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Gradient of the last backward() loss w.r.t. a node; zeros if the node
  /// did not participate.
  Matrix<Scalar> grad(Var<Scalar> v) const {
    const Node& n = nodes_.at(v.id());
    if (n.grad.size() == 0) return Matrix<Scalar>::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Output gradient of the node currently being processed.
  const Matrix<Scalar>& out_grad(std::size_t id) const { return nodes_[id].grad; }

  /// Accumulation buffer for an input's gradient, zero-allocated on first use.
  Matrix<Scalar>& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Matrix<Scalar>::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Whether a gradient contribution has already reached the node.
  bool has_grad(std::size_t id) const { return nodes_[id].grad.size() != 0; }

  /// Gradient storage sized like the value but left uninitialized when the
  /// node has no contribution yet; the caller must overwrite every entry.
  Matrix<Scalar>& raw_grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad.resize(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// grad(id) += e, assigning instead when nothing has been accumulated yet.
  template <typename Expr>
  void accumulate(std::size_t id, const Expr& e) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) {
      n.grad = e;
    } else {
      n.grad += e;
    }
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Sink {
    ParamStore<Scalar>* store = nullptr;
    std::size_t id = 0;
  };
  struct Node {
    Matrix<Scalar> value;
    Matrix<Scalar> grad;
    bool requires_grad = false;
    BackwardFn backward;
    Sink sink;
  };

  Var<Scalar> push(Matrix<Scalar> value, bool requires_grad, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), {}, requires_grad, std::move(backward), {}});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

}  // namespace gpl::nn
