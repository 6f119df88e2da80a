#pragma once

#include "gpl/nn/tape.hpp"

#include <algorithm>
#include <cmath>

namespace gpl::nn {

template <typename S>
struct GradientCheckResult {
  /// max_i |g_ad - g_fd| / max(1, |g_ad|, |g_fd|)
  S max_relative_error = 0;
  Vector<S> autodiff;
  Vector<S> finite_difference;
};

namespace detail {

template <typename S>
S relative_error(const Vector<S>& ad, const Vector<S>& fd) {
  S worst = 0;
  for (Index i = 0; i < ad.size(); ++i) {
    const S denom = std::max({S(1), std::abs(ad(i)), std::abs(fd(i))});
    worst = std::max(worst, std::abs(ad(i) - fd(i)) / denom);
  }
  return worst;
}

}  // namespace detail

/// Compares reverse-mode gradients against central finite differences for a
/// scalar function of one matrix argument. `loss(tape, x)` must build a 1 x 1
/// node from the leaf `x`.
template <typename S, typename Loss>
GradientCheckResult<S> gradient_check(Loss&& loss, const Matrix<S>& point, S step = S(1e-6)) {
  GradientCheckResult<S> r;
  {
    Tape<S> tape;
    Var<S> x = tape.variable(point);
    Var<S> l = loss(tape, x);
    tape.backward(l);
    const Matrix<S> g = tape.grad(x);
    r.autodiff = Eigen::Map<const Vector<S>>(g.data(), g.size());
  }
  r.finite_difference.resize(point.size());
  Matrix<S> probe = point;
  auto eval = [&](const Matrix<S>& at) {
    Tape<S> tape;
    return loss(tape, tape.constant(at)).scalar();
  };
  for (Index i = 0; i < point.size(); ++i) {
    const S orig = probe.data()[i];
    probe.data()[i] = orig + step;
    const S up = eval(probe);
    probe.data()[i] = orig - step;
    const S down = eval(probe);
    probe.data()[i] = orig;
    r.finite_difference(i) = (up - down) / (S(2) * step);
  }
  r.max_relative_error = detail::relative_error(r.autodiff, r.finite_difference);
  return r;
}

/// Same comparison for every entry of a parameter store. `loss(tape)` must
/// read the store's parameters through tape.parameter(store, ...).
template <typename S, typename Loss>
GradientCheckResult<S> gradient_check(ParamStore<S>& store, Loss&& loss, S step = S(1e-6)) {
  GradientCheckResult<S> r;
  store.zero_grad();
  {
    Tape<S> tape;
    tape.backward(loss(tape));
  }
  auto grads = store.grads();
  r.autodiff = Eigen::Map<const Vector<S>>(grads.data(), static_cast<Index>(grads.size()));
  auto values = store.values();
  r.finite_difference.resize(static_cast<Index>(values.size()));
  auto eval = [&] {
    Tape<S> tape;
    return loss(tape).scalar();
  };
  for (std::size_t i = 0; i < values.size(); ++i) {
    const S orig = values[i];
    values[i] = orig + step;
    const S up = eval();
    values[i] = orig - step;
    const S down = eval();
    values[i] = orig;
    r.finite_difference(static_cast<Index>(i)) = (up - down) / (S(2) * step);
  }
  r.max_relative_error = detail::relative_error(r.autodiff, r.finite_difference);
  return r;
}

}  // namespace gpl::nn
