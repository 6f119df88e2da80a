#pragma once

#include "gpl/nn/tape.hpp"

#include <cmath>
#include <limits>

namespace gpl::nn {

namespace detail {

template <typename S>
void same_tape(const Var<S>& a, const Var<S>& b, const char* op) {
  if (&a.tape() != &b.tape()) {
    throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
  }
}

template <typename S>
void same_shape(const Var<S>& a, const Var<S>& b, const char* op) {
  same_tape(a, b, op);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " +
                     shape_str(b.value()));
  }
}

template <typename S>
void accumulate(Tape<S>& t, std::size_t id, const Matrix<S>& g) {
  if (t.requires_grad(id)) t.accumulate(id, g);
}

// Shared shape of every elementwise unary op: y = f(x), dx = dy * f'(x, y).
template <typename S, typename F, typename D>
Var<S> unary(const Var<S>& x, F f, D dfdx) {
  const std::size_t ix = x.id();
  Matrix<S> y = x.value().unaryExpr(f);
  return x.tape().record(std::move(y), {x}, [ix, dfdx](Tape<S>& t, std::size_t self) {
    const Matrix<S>& g = t.out_grad(self);
    const Matrix<S>& xv = t.value(ix);
    const Matrix<S>& yv = t.value(self);
    const bool fresh = !t.has_grad(ix);
    Matrix<S>& gx = t.raw_grad(ix);
    if (fresh) {
      for (Index i = 0; i < g.size(); ++i) gx.data()[i] = g.data()[i] * dfdx(xv.data()[i], yv.data()[i]);
    } else {
      for (Index i = 0; i < g.size(); ++i) gx.data()[i] += g.data()[i] * dfdx(xv.data()[i], yv.data()[i]);
    }
  });
}

}  // namespace detail

template <typename S>
Var<S> operator+(const Var<S>& a, const Var<S>& b) {
  detail::same_shape(a, b, "add");
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(a.value() + b.value(), {a, b}, [ia, ib](Tape<S>& t, std::size_t self) {
    detail::accumulate(t, ia, t.out_grad(self));
    detail::accumulate(t, ib, t.out_grad(self));
  });
}

template <typename S>
Var<S> operator-(const Var<S>& a, const Var<S>& b) {
  detail::same_shape(a, b, "sub");
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(a.value() - b.value(), {a, b}, [ia, ib](Tape<S>& t, std::size_t self) {
    detail::accumulate(t, ia, t.out_grad(self));
    if (t.requires_grad(ib)) t.accumulate(ib, -t.out_grad(self));
  });
}

template <typename S>
Var<S> operator-(const Var<S>& a) {
  const std::size_t ia = a.id();
  return a.tape().record(-a.value(), {a}, [ia](Tape<S>& t, std::size_t self) {
    t.accumulate(ia, -t.out_grad(self));
  });
}

template <typename S>
Var<S> operator*(const Var<S>& a, S c) {
  const std::size_t ia = a.id();
  return a.tape().record(a.value() * c, {a}, [ia, c](Tape<S>& t, std::size_t self) {
    t.accumulate(ia, c * t.out_grad(self));
  });
}

template <typename S>
Var<S> operator*(S c, const Var<S>& a) {
  return a * c;
}

template <typename S>
Var<S> operator+(const Var<S>& a, S c) {
  const std::size_t ia = a.id();
  Matrix<S> y = a.value().array() + c;
  return a.tape().record(std::move(y), {a}, [ia](Tape<S>& t, std::size_t self) {
    t.accumulate(ia, t.out_grad(self));
  });
}

template <typename S>
Var<S> operator-(const Var<S>& a, S c) {
  return a + (-c);
}

/// Elementwise (Hadamard) product.
template <typename S>
Var<S> cwise_product(const Var<S>& a, const Var<S>& b) {
  detail::same_shape(a, b, "cwise_product");
  const std::size_t ia = a.id(), ib = b.id();
  Matrix<S> y = a.value().cwiseProduct(b.value());
  return a.tape().record(std::move(y), {a, b}, [ia, ib](Tape<S>& t, std::size_t self) {
    const Matrix<S>& g = t.out_grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  detail::same_tape(a, b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.value()) + " x " +
                     shape_str(b.value()));
  }
  const std::size_t ia = a.id(), ib = b.id();
  Matrix<S> y = a.value() * b.value();
  return a.tape().record(std::move(y), {a, b}, [ia, ib](Tape<S>& t, std::size_t self) {
    const Matrix<S>& g = t.out_grad(self);
    if (t.requires_grad(ia)) t.grad_buffer(ia).noalias() += g * t.value(ib).transpose();
    if (t.requires_grad(ib)) t.grad_buffer(ib).noalias() += t.value(ia).transpose() * g;
  });
}

/// x + row, with a 1 x cols row broadcast over every row of x.
template <typename S>
Var<S> add_row(const Var<S>& x, const Var<S>& row) {
  detail::same_tape(x, row, "add_row");
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw ShapeError("add_row: expected row of shape " + shape_str(1, x.cols()) + ", got " +
                     shape_str(row.value()));
  }
  const std::size_t ix = x.id(), ir = row.id();
  Matrix<S> y = x.value().rowwise() + row.value().row(0);
  return x.tape().record(std::move(y), {x, row}, [ix, ir](Tape<S>& t, std::size_t self) {
    const Matrix<S>& g = t.out_grad(self);
    detail::accumulate(t, ix, g);
    if (t.requires_grad(ir)) t.accumulate(ir, g.colwise().sum());
  });
}

/// x * s for a 1 x 1 node s; gradients flow into both.
template <typename S>
Var<S> scale(const Var<S>& x, const Var<S>& s) {
  detail::same_tape(x, s, "scale");
  if (s.rows() != 1 || s.cols() != 1) {
    throw ShapeError("scale: factor must be 1 x 1, got " + shape_str(s.value()));
  }
  const std::size_t ix = x.id(), is = s.id();
  Matrix<S> y = x.value() * s.value()(0, 0);
  return x.tape().record(std::move(y), {x, s}, [ix, is](Tape<S>& t, std::size_t self) {
    const Matrix<S>& g = t.out_grad(self);
    if (t.requires_grad(ix)) t.accumulate(ix, g * t.value(is)(0, 0));
    if (t.requires_grad(is)) t.grad_buffer(is)(0, 0) += g.cwiseProduct(t.value(ix)).sum();
  });
}

/// Columnwise affine map with constant coefficients: y(:, j) = x(:, j) * a_j + b_j.
template <typename S>
Var<S> cwise_affine(const Var<S>& x, const RowVector<S>& a, const RowVector<S>& b) {
  if (a.size() != x.cols() || b.size() != x.cols()) {
    throw ShapeError("cwise_affine: coefficient width must equal " + std::to_string(x.cols()));
  }
  const std::size_t ix = x.id();
  Matrix<S> y = (x.value().array().rowwise() * a.array()).rowwise() + b.array();
  return x.tape().record(std::move(y), {x}, [ix, a](Tape<S>& t, std::size_t self) {
    t.grad_buffer(ix).array() += t.out_grad(self).array().rowwise() * a.array();
  });
}

template <typename S>
Var<S> relu(const Var<S>& x) {
  return detail::unary<S>(
      x, [](S v) { return v > S(0) ? v : S(0); }, [](S v, S) { return v > S(0) ? S(1) : S(0); });
}

template <typename S>
Var<S> tanh(const Var<S>& x) {
  return detail::unary<S>(
      x, [](S v) { return std::tanh(v); }, [](S, S y) { return S(1) - y * y; });
}

template <typename S>
Var<S> exp(const Var<S>& x) {
  return detail::unary<S>(
      x, [](S v) { return std::exp(v); }, [](S, S y) { return y; });
}

template <typename S>
Var<S> log(const Var<S>& x) {
  return detail::unary<S>(
      x, [](S v) { return std::log(v); }, [](S v, S) { return S(1) / v; });
}

template <typename S>
Var<S> square(const Var<S>& x) {
  return detail::unary<S>(
      x, [](S v) { return v * v; }, [](S v, S) { return S(2) * v; });
}

template <typename S>
Var<S> abs(const Var<S>& x) {
  return detail::unary<S>(
      x, [](S v) { return std::abs(v); },
      [](S v, S) { return v > S(0) ? S(1) : (v < S(0) ? S(-1) : S(0)); });
}

/// log(1 + e^x), evaluated without overflow.
template <typename S>
Var<S> softplus(const Var<S>& x) {
  return detail::unary<S>(
      x, [](S v) { return std::max(v, S(0)) + std::log1p(std::exp(-std::abs(v))); },
      [](S v, S) { return S(1) / (S(1) + std::exp(-v)); });
}

/// Clamp to [lo, hi]; zero gradient where the clamp is active.
template <typename S>
Var<S> clamp(const Var<S>& x, S lo, S hi) {
  return detail::unary<S>(
      x, [lo, hi](S v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](S v, S) { return (v < lo || v > hi) ? S(0) : S(1); });
}

template <typename S>
Var<S> sum(const Var<S>& x) {
  const std::size_t ix = x.id();
  Matrix<S> y(1, 1);
  y(0, 0) = x.value().sum();
  return x.tape().record(std::move(y), {x}, [ix](Tape<S>& t, std::size_t self) {
    t.grad_buffer(ix).array() += t.out_grad(self)(0, 0);
  });
}

template <typename S>
Var<S> mean(const Var<S>& x) {
  return sum(x) * (S(1) / static_cast<S>(x.value().size()));
}

/// Per-row sum, B x C -> B x 1.
template <typename S>
Var<S> row_sum(const Var<S>& x) {
  const std::size_t ix = x.id();
  Matrix<S> y = x.value().rowwise().sum();
  return x.tape().record(std::move(y), {x}, [ix](Tape<S>& t, std::size_t self) {
    t.grad_buffer(ix).colwise() += t.out_grad(self).col(0);
  });
}

template <typename S>
Var<S> row_mean(const Var<S>& x) {
  return row_sum(x) * (S(1) / static_cast<S>(x.cols()));
}

/// Per-row minimum; the gradient goes to the first minimizing column.
template <typename S>
Var<S> row_min(const Var<S>& x) {
  const std::size_t ix = x.id();
  const Matrix<S>& xv = x.value();
  Matrix<S> y(xv.rows(), 1);
  std::vector<Index> arg(static_cast<std::size_t>(xv.rows()));
  for (Index r = 0; r < xv.rows(); ++r) {
    Index c = 0;
    y(r, 0) = xv.row(r).minCoeff(&c);
    arg[static_cast<std::size_t>(r)] = c;
  }
  return x.tape().record(std::move(y), {x}, [ix, arg](Tape<S>& t, std::size_t self) {
    const Matrix<S>& g = t.out_grad(self);
    Matrix<S>& gx = t.grad_buffer(ix);
    for (Index r = 0; r < g.rows(); ++r) gx(r, arg[static_cast<std::size_t>(r)]) += g(r, 0);
  });
}

template <typename S>
Var<S> concat_cols(const Var<S>& a, const Var<S>& b) {
  detail::same_tape(a, b, "concat_cols");
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: row counts differ, " + shape_str(a.value()) + " vs " +
                     shape_str(b.value()));
  }
  const std::size_t ia = a.id(), ib = b.id();
  const Index ca = a.cols(), cb = b.cols();
  Matrix<S> y(a.rows(), ca + cb);
  y.leftCols(ca) = a.value();
  y.rightCols(cb) = b.value();
  return a.tape().record(std::move(y), {a, b}, [ia, ib, ca, cb](Tape<S>& t, std::size_t self) {
    const Matrix<S>& g = t.out_grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g.leftCols(ca));
    if (t.requires_grad(ib)) t.accumulate(ib, g.rightCols(cb));
  });
}

template <typename S>
Var<S> slice_cols(const Var<S>& x, Index start, Index count) {
  if (start < 0 || count <= 0 || start + count > x.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of range for " +
                     shape_str(x.value()));
  }
  const std::size_t ix = x.id();
  Matrix<S> y = x.value().middleCols(start, count);
  return x.tape().record(std::move(y), {x}, [ix, start, count](Tape<S>& t, std::size_t self) {
    t.grad_buffer(ix).middleCols(start, count) += t.out_grad(self);
  });
}

/// Mean absolute pairwise difference over ordered pairs i != j of each row:
/// (1 / (C^2 - C)) * sum_i sum_{j != i} |x_i - x_j|. Needs C >= 2.
template <typename S>
Var<S> pairwise_abs_mean(const Var<S>& x) {
  const Index n = x.cols();
  if (n < 2) throw std::invalid_argument("pairwise_abs_mean: needs at least 2 columns");
  const std::size_t ix = x.id();
  const S norm = S(1) / static_cast<S>(n * n - n);
  const Matrix<S>& xv = x.value();
  Matrix<S> y(xv.rows(), 1);
  for (Index r = 0; r < xv.rows(); ++r) {
    S acc = 0;
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) acc += std::abs(xv(r, i) - xv(r, j));
    }
    y(r, 0) = S(2) * acc * norm;
  }
  return x.tape().record(std::move(y), {x}, [ix, n, norm](Tape<S>& t, std::size_t self) {
    const Matrix<S>& g = t.out_grad(self);
    const Matrix<S>& xv = t.value(ix);
    Matrix<S>& gx = t.grad_buffer(ix);
    for (Index r = 0; r < xv.rows(); ++r) {
      const S w = S(2) * norm * g(r, 0);
      for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
          const S d = xv(r, i) - xv(r, j);
          const S s = d > S(0) ? S(1) : (d < S(0) ? S(-1) : S(0));
          gx(r, i) += w * s;
          gx(r, j) -= w * s;
        }
      }
    }
  });
}

/// Population (divisor C) standard deviation of each row. The gradient is
/// taken as zero on rows with zero spread.
template <typename S>
Var<S> row_population_std(const Var<S>& x) {
  const Index n = x.cols();
  const std::size_t ix = x.id();
  const Matrix<S>& xv = x.value();
  Matrix<S> y(xv.rows(), 1);
  for (Index r = 0; r < xv.rows(); ++r) {
    const S mu = xv.row(r).mean();
    y(r, 0) = std::sqrt((xv.row(r).array() - mu).square().sum() / static_cast<S>(n));
  }
  return x.tape().record(std::move(y), {x}, [ix, n](Tape<S>& t, std::size_t self) {
    const Matrix<S>& g = t.out_grad(self);
    const Matrix<S>& xv = t.value(ix);
    const Matrix<S>& yv = t.value(self);
    Matrix<S>& gx = t.grad_buffer(ix);
    for (Index r = 0; r < xv.rows(); ++r) {
      if (!(yv(r, 0) > S(0))) continue;
      const S mu = xv.row(r).mean();
      const S w = g(r, 0) / (static_cast<S>(n) * yv(r, 0));
      gx.row(r).array() += w * (xv.row(r).array() - mu);
    }
  });
}

}  // namespace gpl::nn
