#pragma once

#include "gpl/nn/param_store.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace gpl::nn {

struct AdamOptions {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename S>
struct AdamState {
  std::vector<S> first_moment;
  std::vector<S> second_moment;
  std::int64_t step = 0;
  AdamOptions options;

  AdamState() = default;
  AdamState(std::size_t size, AdamOptions opts)
      : first_moment(size, S(0)), second_moment(size, S(0)), options(opts) {
    if (!(opts.lr > 0) || !(opts.beta1 > 0) || !(opts.beta2 > 0) || !(opts.epsilon > 0)) {
      throw std::invalid_argument("AdamState: hyperparameters must be positive");
    }
  }

  std::size_t size() const { return first_moment.size(); }
};

/// Bias-corrected Adam update. Returns false and leaves everything untouched
/// when any gradient entry is non-finite.
template <typename S>
bool adam_step(std::span<S> params, std::span<const S> grads, AdamState<S>& state) {
  if (params.size() != grads.size() || params.size() != state.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and state sizes disagree (" +
                                std::to_string(params.size()) + ", " +
                                std::to_string(grads.size()) + ", " +
                                std::to_string(state.size()) + ")");
  }
  for (S g : grads) {
    if (!std::isfinite(g)) return false;
  }
  const AdamOptions& o = state.options;
  ++state.step;
  const S b1 = static_cast<S>(o.beta1), b2 = static_cast<S>(o.beta2);
  const S c1 = S(1) - std::pow(b1, static_cast<S>(state.step));
  const S c2 = S(1) - std::pow(b2, static_cast<S>(state.step));
  const S lr = static_cast<S>(o.lr), eps = static_cast<S>(o.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const S g = grads[i];
    S& m = state.first_moment[i];
    S& v = state.second_moment[i];
    m = b1 * m + (S(1) - b1) * g;
    v = b2 * v + (S(1) - b2) * g * g;
    params[i] -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
  }
  return true;
}

template <typename S>
bool adam_step(ParamStore<S>& store, AdamState<S>& state) {
  return adam_step<S>(store.values(), std::span<const S>(store.grads()), state);
}

}  // namespace gpl::nn
