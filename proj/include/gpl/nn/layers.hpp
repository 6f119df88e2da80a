#pragma once

#include "gpl/nn/ops.hpp"

#include <random>
#include <vector>

namespace gpl::nn {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kSpectralNormEps = 1e-12;

/// Normalizes each contiguous group of `x.cols() / groups` columns of every row
/// to zero mean and unit variance, then applies the per-column affine map
/// `gain * xhat + bias`. With groups > 1 every ensemble member is normalized
/// on its own block.
template <typename S>
Var<S> layer_norm(const Var<S>& x, const Var<S>& gain, const Var<S>& bias, Index groups = 1,
                  S eps = S(kLayerNormEps)) {
  detail::same_tape(x, gain, "layer_norm");
  detail::same_tape(x, bias, "layer_norm");
  const Index cols = x.cols();
  if (gain.rows() != 1 || gain.cols() != cols || bias.rows() != 1 || bias.cols() != cols) {
    throw ShapeError("layer_norm: gain and bias must be " + shape_str(1, cols) + ", got " +
                     shape_str(gain.value()) + " and " + shape_str(bias.value()));
  }
  if (groups <= 0 || cols % groups != 0) {
    throw ShapeError("layer_norm: " + std::to_string(cols) + " columns do not split into " +
                     std::to_string(groups) + " groups");
  }
  const Index width = cols / groups;
  const Matrix<S>& xv = x.value();
  Matrix<S> xhat(xv.rows(), cols);
  Matrix<S> inv_std(xv.rows(), groups);
  for (Index r = 0; r < xv.rows(); ++r) {
    for (Index g = 0; g < groups; ++g) {
      const auto seg = xv.row(r).segment(g * width, width);
      const S mu = seg.mean();
      const S var = (seg.array() - mu).square().mean();
      const S is = S(1) / std::sqrt(var + eps);
      inv_std(r, g) = is;
      xhat.row(r).segment(g * width, width) = (seg.array() - mu) * is;
    }
  }
  Matrix<S> y = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
                bias.value().row(0).array();
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape().record(
      std::move(y), {x, gain, bias},
      [ix, ig, ib, groups, width, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape<S>& t, std::size_t self) {
        const Matrix<S>& g = t.out_grad(self);
        if (t.requires_grad(ig)) t.grad_buffer(ig) += g.cwiseProduct(xhat).colwise().sum();
        if (t.requires_grad(ib)) t.grad_buffer(ib) += g.colwise().sum();
        if (!t.requires_grad(ix)) return;
        const auto gain_row = t.value(ig).row(0);
        Matrix<S>& gx = t.grad_buffer(ix);
        for (Index r = 0; r < g.rows(); ++r) {
          for (Index k = 0; k < groups; ++k) {
            const Index off = k * width;
            const auto dxhat = (g.row(r).segment(off, width).array() *
                                gain_row.segment(off, width).array())
                                   .eval();
            const auto xh = xhat.row(r).segment(off, width).array();
            const S m1 = dxhat.mean();
            const S m2 = (dxhat * xh).mean();
            gx.row(r).segment(off, width).array() += inv_std(r, k) * (dxhat - m1 - xh * m2);
          }
        }
      });
}

/// N independent affine maps evaluated as one batched layer.
///
/// `weight` is in x (N * out), the horizontal stack [W_1 | ... | W_N], and
/// `bias` is 1 x (N * out). With a shared input, x is B x in and the whole
/// ensemble is a single matmul. Otherwise x is B x (N * in), member i reading
/// its own column block; the off-diagonal blocks of the equivalent
/// block-diagonal matrix are never materialized.
template <typename S>
Var<S> ensemble_linear(const Var<S>& x, const Var<S>& weight, const Var<S>& bias, Index members,
                       bool shared_input) {
  detail::same_tape(x, weight, "ensemble_linear");
  detail::same_tape(x, bias, "ensemble_linear");
  if (members <= 0 || weight.cols() % members != 0) {
    throw ShapeError("ensemble_linear: weight width " + std::to_string(weight.cols()) +
                     " is not a multiple of " + std::to_string(members) + " members");
  }
  const Index in = weight.rows();
  const Index out = weight.cols() / members;
  const Index expected_in = shared_input ? in : in * members;
  if (x.cols() != expected_in) {
    throw ShapeError("ensemble_linear: input width " + std::to_string(x.cols()) +
                     " does not match expected " + std::to_string(expected_in));
  }
  if (bias.rows() != 1 || bias.cols() != weight.cols()) {
    throw ShapeError("ensemble_linear: bias must be " + shape_str(1, weight.cols()) + ", got " +
                     shape_str(bias.value()));
  }
  const Matrix<S>& xv = x.value();
  const Matrix<S>& wv = weight.value();
  Matrix<S> y(xv.rows(), wv.cols());
  if (shared_input) {
    y.noalias() = xv * wv;
  } else {
    for (Index m = 0; m < members; ++m) {
      y.middleCols(m * out, out).noalias() =
          xv.middleCols(m * in, in) * wv.middleCols(m * out, out);
    }
  }
  y.rowwise() += bias.value().row(0);
  const std::size_t ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape().record(
      std::move(y), {x, weight, bias},
      [ix, iw, ib, members, in, out, shared_input](Tape<S>& t, std::size_t self) {
        const Matrix<S>& g = t.out_grad(self);
        const Matrix<S>& xv = t.value(ix);
        const Matrix<S>& wv = t.value(iw);
        if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
        // Products write straight into fresh gradient storage (no zero fill).
        const bool fresh_w = t.requires_grad(iw) && !t.has_grad(iw);
        const bool fresh_x = t.requires_grad(ix) && !t.has_grad(ix);
        if (shared_input) {
          if (fresh_w) t.raw_grad(iw).noalias() = xv.transpose() * g;
          else if (t.requires_grad(iw)) t.raw_grad(iw).noalias() += xv.transpose() * g;
          if (fresh_x) t.raw_grad(ix).noalias() = g * wv.transpose();
          else if (t.requires_grad(ix)) t.raw_grad(ix).noalias() += g * wv.transpose();
          return;
        }
        for (Index m = 0; m < members; ++m) {
          const auto gm = g.middleCols(m * out, out);
          if (t.requires_grad(iw)) {
            auto dst = t.raw_grad(iw).middleCols(m * out, out);
            if (fresh_w) dst.noalias() = xv.middleCols(m * in, in).transpose() * gm;
            else dst.noalias() += xv.middleCols(m * in, in).transpose() * gm;
          }
          if (t.requires_grad(ix)) {
            auto dst = t.raw_grad(ix).middleCols(m * in, in);
            if (fresh_x) dst.noalias() = gm * wv.middleCols(m * out, out).transpose();
            else dst.noalias() += gm * wv.middleCols(m * out, out).transpose();
          }
        }
      });
}

/// Left singular-vector estimates for spectral normalization, one per
/// ensemble block.
template <typename S>
struct PowerIterationState {
  std::vector<Vector<S>> u;

  PowerIterationState() = default;

  /// Random unit vectors of length `rows` for each of `blocks` blocks.
  PowerIterationState(Index rows, Index blocks, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<S> normal(S(0), S(1));
    u.resize(static_cast<std::size_t>(blocks));
    for (auto& v : u) {
      v.resize(rows);
      for (Index i = 0; i < rows; ++i) v(i) = normal(rng);
      v /= v.norm();
    }
  }
};

namespace detail {

struct SpectralTerms {
  double sigma = 0;
  bool passthrough = true;
};

// Computes sigma = u' W v with v = normalize(W' u). With `refine`, performs one
// power-iteration step first (u <- normalize(W v)) and stores the new u.
template <typename S, typename Block>
SpectralTerms spectral_terms(const Block& w, Vector<S>& u, Vector<S>& v, bool refine, S eps) {
  Vector<S> wtu = w.transpose() * u;
  S n = wtu.norm();
  if (!(n > eps)) return {};
  v = wtu / n;
  if (refine) {
    Vector<S> wv = w * v;
    const S m = wv.norm();
    if (!(m > eps)) return {};
    u = wv / m;
    // v stays paired with the refined u so sigma = u' W v remains the estimate.
    wtu = w.transpose() * u;
    n = wtu.norm();
    if (!(n > eps)) return {};
    v = wtu / n;
  }
  const S sigma = u.dot(w * v);
  if (!(sigma > eps)) return {};
  return {static_cast<double>(sigma), false};
}

}  // namespace detail

/// Current top-singular-value estimate of `w` for the stored vector, without
/// refining it.
template <typename S>
S spectral_norm_estimate(const Matrix<S>& w, const Vector<S>& u, S eps = S(kSpectralNormEps)) {
  Vector<S> uu = u, v;
  const auto terms = detail::spectral_terms<S>(w, uu, v, false, eps);
  return terms.passthrough ? S(0) : static_cast<S>(terms.sigma);
}

/// One power-iteration refinement of `u`, then `w / sigma`. A (numerically)
/// zero matrix passes through unchanged.
template <typename S>
Matrix<S> spectral_normalize(const Matrix<S>& w, Vector<S>& u, S eps = S(kSpectralNormEps)) {
  if (u.size() != w.rows()) {
    throw ShapeError("spectral_normalize: vector length " + std::to_string(u.size()) +
                     " does not match " + std::to_string(w.rows()) + " rows");
  }
  Vector<S> v;
  const auto terms = detail::spectral_terms<S>(w, u, v, true, eps);
  if (terms.passthrough) return w;
  return w / static_cast<S>(terms.sigma);
}

/// Differentiable spectral normalization of each column block of a stacked
/// ensemble weight. The singular vectors are treated as constants, so
/// d(W/sigma) = dW/sigma - <G, W> u v' / sigma^2 per block.
template <typename S>
Var<S> spectral_normalize(const Var<S>& weight, Index members, PowerIterationState<S>& state,
                          bool refine, S eps = S(kSpectralNormEps)) {
  if (members <= 0 || weight.cols() % members != 0 ||
      static_cast<Index>(state.u.size()) != members) {
    throw ShapeError("spectral_normalize: state holds " + std::to_string(state.u.size()) +
                     " vectors for " + std::to_string(members) + " member blocks of " +
                     shape_str(weight.value()));
  }
  const Index out = weight.cols() / members;
  const Matrix<S>& wv = weight.value();
  Matrix<S> y(wv.rows(), wv.cols());
  std::vector<Vector<S>> us(static_cast<std::size_t>(members)), vs(us.size());
  std::vector<S> sigmas(us.size(), S(0));
  for (Index m = 0; m < members; ++m) {
    const auto k = static_cast<std::size_t>(m);
    if (state.u[k].size() != wv.rows()) {
      throw ShapeError("spectral_normalize: vector length mismatch for block " +
                       std::to_string(m));
    }
    const auto block = wv.middleCols(m * out, out);
    const auto terms = detail::spectral_terms<S>(block, state.u[k], vs[k], refine, eps);
    us[k] = state.u[k];
    if (terms.passthrough) {
      y.middleCols(m * out, out) = block;
    } else {
      sigmas[k] = static_cast<S>(terms.sigma);
      y.middleCols(m * out, out) = block / sigmas[k];
    }
  }
  const std::size_t iw = weight.id();
  return weight.tape().record(
      std::move(y), {weight},
      [iw, members, out, us = std::move(us), vs = std::move(vs), sigmas = std::move(sigmas)](
          Tape<S>& t, std::size_t self) {
        const Matrix<S>& g = t.out_grad(self);
        const Matrix<S>& wv = t.value(iw);
        Matrix<S>& gw = t.grad_buffer(iw);
        for (Index m = 0; m < members; ++m) {
          const auto k = static_cast<std::size_t>(m);
          const auto gm = g.middleCols(m * out, out);
          if (sigmas[k] == S(0)) {
            gw.middleCols(m * out, out) += gm;
            continue;
          }
          const S s = sigmas[k];
          const S inner = gm.cwiseProduct(wv.middleCols(m * out, out)).sum();
          gw.middleCols(m * out, out) += gm / s - (inner / (s * s)) * (us[k] * vs[k].transpose());
        }
      });
}

}  // namespace gpl::nn
