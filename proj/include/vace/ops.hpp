// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

// Closed operation catalog with hand-written reverse-mode derivatives.
//
// Every forward `op(...)` has a matching `op_backward(...)` that maps the
// upstream gradient to gradients of the op's inputs. There is no tape: callers
// keep whatever forward values a backward needs.

#pragma once

#include <Eigen/Core>
#include <unsupported/Eigen/SpecialFunctions>
#include <cmath>
#include <cstring>
#include <numbers>
#include <string>
#include <type_traits>
#include <vector>

#include "vace/tensor.hpp"

namespace vace::ops {

template <typename T>
using MatrixR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<MatrixR<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const MatrixR<T>>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using ArrMap = Eigen::Map<std::conditional_t<std::is_const_v<T>, const Eigen::Array<std::remove_const_t<T>, Eigen::Dynamic, 1>,
                                             Eigen::Array<T, Eigen::Dynamic, 1>>>;

/// Eigen's packet erf/exp are accurate for float and double only; wider types
/// take the scalar library functions.
template <typename T>
inline constexpr bool kPacketMath = std::is_same_v<T, float> || std::is_same_v<T, double>;

[[noreturn]] inline void dim_error(const std::string& op, const Shape& a, const Shape& b) {
  throw DimensionError(op + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

[[noreturn]] inline void dim_error(const std::string& op, const Shape& a) {
  throw DimensionError(op + ": unsupported shape " + shape_str(a));
}

template <typename T>
ConstMatMap<T> as_matrix(const BasicTensor<T>& t, const char* op = "as_matrix") {
  if (t.rank() != 2) dim_error(op, t.shape());
  return ConstMatMap<T>(t.ptr(), t.dim(0), t.dim(1));
}

template <typename T>
MatMap<T> as_matrix(BasicTensor<T>& t, const char* op = "as_matrix") {
  if (t.rank() != 2) dim_error(op, t.shape());
  return MatMap<T>(t.ptr(), t.dim(0), t.dim(1));
}

/// Bitwise equality of shape and stored bytes (distinguishes -0 from +0).
template <typename T>
bool bitwise_equal(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.ptr(), b.ptr(), a.size() * sizeof(T)) == 0;
}

// ---------------------------------------------------------------- elementwise

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) dim_error("add", a.shape(), b.shape());
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) dim_error("sub", a.shape(), b.shape());
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) dim_error("mul", a.shape(), b.shape());
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s) {
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

template <typename T>
struct BinaryGrads {
  BasicTensor<T> da;
  BasicTensor<T> db;
};

template <typename T>
BinaryGrads<T> add_backward(const BasicTensor<T>& g) {
  return {g, g};
}

template <typename T>
BinaryGrads<T> sub_backward(const BasicTensor<T>& g) {
  return {g, scale(g, T(-1))};
}

template <typename T>
BinaryGrads<T> mul_backward(const BasicTensor<T>& a, const BasicTensor<T>& b, const BasicTensor<T>& g) {
  return {mul(g, b), mul(g, a)};
}

template <typename T>
BasicTensor<T> scale_backward(const BasicTensor<T>& g, T s) {
  return scale(g, s);
}

/// In-place a += b.
template <typename T>
void accumulate(BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) dim_error("accumulate", a.shape(), b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

template <typename T>
void accumulate(Buffer<T>& a, const BasicTensor<T>& b) {
  if (a.size() != b.size()) dim_error("accumulate", Shape{static_cast<std::int64_t>(a.size())}, b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

// ------------------------------------------------------------ row broadcasts

/// x (N,D) + b (D) broadcast over rows.
template <typename T>
BasicTensor<T> add_row(const BasicTensor<T>& x, const BasicTensor<T>& b) {
  if (x.rank() != 2 || b.size() != static_cast<std::size_t>(x.dim(1))) dim_error("add_row", x.shape(), b.shape());
  BasicTensor<T> out = x;
  const auto cols = static_cast<std::size_t>(x.dim(1));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i % cols];
  return out;
}

/// x (N,D) * s (D) broadcast over rows.
template <typename T>
BasicTensor<T> mul_row(const BasicTensor<T>& x, const BasicTensor<T>& s) {
  if (x.rank() != 2 || s.size() != static_cast<std::size_t>(x.dim(1))) dim_error("mul_row", x.shape(), s.shape());
  BasicTensor<T> out = x;
  const auto cols = static_cast<std::size_t>(x.dim(1));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s[i % cols];
  return out;
}

/// Column sums of a (N,D) matrix: the reverse of a row broadcast.
template <typename T>
BasicTensor<T> sum_rows(const BasicTensor<T>& x) {
  if (x.rank() != 2) dim_error("sum_rows", x.shape());
  BasicTensor<T> out(Shape{x.dim(1)});
  const auto cols = static_cast<std::size_t>(x.dim(1));
  for (std::size_t i = 0; i < x.size(); ++i) out[i % cols] += x[i];
  return out;
}

template <typename T>
BinaryGrads<T> add_row_backward(const BasicTensor<T>& g) {
  return {g, sum_rows(g)};
}

template <typename T>
BinaryGrads<T> mul_row_backward(const BasicTensor<T>& x, const BasicTensor<T>& s, const BasicTensor<T>& g) {
  return {mul_row(g, s), sum_rows(mul(g, x))};
}

// --------------------------------------------------------------------- matmul

/// op(a) @ op(b) for 2-D tensors, op = transpose when the flag is set.
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b, bool trans_a = false,
                      bool trans_b = false) {
  if (a.rank() != 2 || b.rank() != 2) dim_error("matmul", a.shape(), b.shape());
  const auto m = trans_a ? a.dim(1) : a.dim(0);
  const auto ka = trans_a ? a.dim(0) : a.dim(1);
  const auto kb = trans_b ? b.dim(1) : b.dim(0);
  const auto n = trans_b ? b.dim(0) : b.dim(1);
  if (ka != kb) dim_error("matmul", a.shape(), b.shape());
  BasicTensor<T> out(Shape{m, n});
  auto A = as_matrix(a);
  auto B = as_matrix(b);
  auto C = as_matrix(out);
  if (!trans_a && !trans_b) C.noalias() = A * B;
  else if (trans_a && !trans_b) C.noalias() = A.transpose() * B;
  else if (!trans_a && trans_b) C.noalias() = A * B.transpose();
  else C.noalias() = A.transpose() * B.transpose();
  return out;
}

/// Gradients of c = a @ b.
template <typename T>
BinaryGrads<T> matmul_backward(const BasicTensor<T>& a, const BasicTensor<T>& b, const BasicTensor<T>& g) {
  return {matmul(g, b, false, true), matmul(a, g, true, false)};
}

/// x (N,in) @ w (in,out) + bias (out).
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0) || bias.size() != static_cast<std::size_t>(w.dim(1))) {
    throw DimensionError("linear: incompatible shapes x" + shape_str(x.shape()) + " w" + shape_str(w.shape()) +
                         " b" + shape_str(bias.shape()));
  }
  BasicTensor<T> out(Shape{x.dim(0), w.dim(1)});
  auto Y = as_matrix(out);
  Y.noalias() = as_matrix(x) * as_matrix(w);
  Eigen::Map<const RowVec<T>> bv(bias.ptr(), w.dim(1));
  Y.rowwise() += bv;
  return out;
}

/// Gradient of linear wrt x; weight/bias gradients are accumulated into dw/db
/// when those pointers are non-null (frozen parameters pass nullptr).
template <typename T>
BasicTensor<T> linear_backward(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& g,
                               Buffer<T>* dw, Buffer<T>* db, bool need_dx = true) {
  if (dw) {
    MatMap<T> DW(dw->data(), w.dim(0), w.dim(1));
    DW.noalias() += as_matrix(x).transpose() * as_matrix(g);
  }
  if (db) {
    Eigen::Map<RowVec<T>> DB(db->data(), w.dim(1));
    DB += as_matrix(g).colwise().sum();
  }
  if (!need_dx) return {};
  BasicTensor<T> dx(x.shape());
  as_matrix(dx).noalias() = as_matrix(g) * as_matrix(w).transpose();
  return dx;
}

// ----------------------------------------------------------- shape operations

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, const Shape& shape) {
  return x.reshaped(shape);
}

template <typename T>
BasicTensor<T> reshape_backward(const BasicTensor<T>& g, const Shape& in_shape) {
  return g.reshaped(in_shape);
}

/// out.shape[i] = x.shape[axes[i]].
template <typename T>
BasicTensor<T> permute(const BasicTensor<T>& x, const std::vector<std::size_t>& axes) {
  const auto r = x.rank();
  if (axes.size() != r) dim_error("permute", x.shape());
  std::vector<bool> seen(r, false);
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (axes[i] >= r || seen[axes[i]]) dim_error("permute", x.shape());
    seen[axes[i]] = true;
    out_shape[i] = x.dim(axes[i]);
  }
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * static_cast<std::size_t>(x.dim(i));
  BasicTensor<T> out(out_shape);
  std::vector<std::int64_t> idx(r, 0);
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < r; ++i) src += static_cast<std::size_t>(idx[i]) * in_strides[axes[i]];
    out[flat] = x[src];
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

inline std::vector<std::size_t> inverse_axes(const std::vector<std::size_t>& axes) {
  std::vector<std::size_t> inv(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) inv[axes[i]] = i;
  return inv;
}

template <typename T>
BasicTensor<T> permute_backward(const BasicTensor<T>& g, const std::vector<std::size_t>& axes) {
  return permute(g, inverse_axes(axes));
}

namespace detail {
inline void outer_inner(const Shape& s, std::size_t axis, std::size_t& outer, std::size_t& inner) {
  outer = 1;
  inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(s[i]);
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= static_cast<std::size_t>(s[i]);
}
}  // namespace detail

/// x[..., begin:end, ...] along `axis`.
template <typename T>
BasicTensor<T> slice(const BasicTensor<T>& x, std::size_t axis, std::int64_t begin, std::int64_t end) {
  if (axis >= x.rank() || begin < 0 || end < begin || end > x.dim(axis)) {
    throw DimensionError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                         std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  BasicTensor<T> out(out_shape);
  std::size_t outer, inner;
  detail::outer_inner(x.shape(), axis, outer, inner);
  const auto src_run = static_cast<std::size_t>(x.dim(axis)) * inner;
  const auto dst_run = static_cast<std::size_t>(end - begin) * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(x.ptr() + o * src_run + static_cast<std::size_t>(begin) * inner, dst_run, out.ptr() + o * dst_run);
  }
  return out;
}

template <typename T>
BasicTensor<T> slice_backward(const BasicTensor<T>& g, const Shape& in_shape, std::size_t axis, std::int64_t begin) {
  BasicTensor<T> out(in_shape);
  std::size_t outer, inner;
  detail::outer_inner(in_shape, axis, outer, inner);
  const auto dst_run = static_cast<std::size_t>(in_shape[axis]) * inner;
  const auto src_run = static_cast<std::size_t>(g.dim(axis)) * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(g.ptr() + o * src_run, src_run, out.ptr() + o * dst_run + static_cast<std::size_t>(begin) * inner);
  }
  return out;
}

template <typename T>
BasicTensor<T> concat(const std::vector<const BasicTensor<T>*>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  Shape out_shape = parts.front()->shape();
  if (axis >= out_shape.size()) dim_error("concat", out_shape);
  out_shape[axis] = 0;
  for (const auto* p : parts) {
    Shape a = p->shape();
    Shape b = parts.front()->shape();
    if (a.size() != b.size()) dim_error("concat", a, b);
    a[axis] = b[axis] = 0;
    if (a != b) dim_error("concat", p->shape(), parts.front()->shape());
    out_shape[axis] += p->dim(axis);
  }
  BasicTensor<T> out(out_shape);
  std::size_t outer, inner;
  detail::outer_inner(out_shape, axis, outer, inner);
  const auto dst_run = static_cast<std::size_t>(out_shape[axis]) * inner;
  std::size_t at = 0;
  for (const auto* p : parts) {
    const auto run = static_cast<std::size_t>(p->dim(axis)) * inner;
    for (std::size_t o = 0; o < outer; ++o) std::copy_n(p->ptr() + o * run, run, out.ptr() + o * dst_run + at);
    at += run;
  }
  return out;
}

/// Owning-list form of concat.
template <typename T>
BasicTensor<T> concat_list(const std::vector<BasicTensor<T>>& parts, std::size_t axis) {
  std::vector<const BasicTensor<T>*> ptrs;
  ptrs.reserve(parts.size());
  for (const auto& p : parts) ptrs.push_back(&p);
  return concat(ptrs, axis);
}

/// Splits the upstream gradient of a concat back into its parts.
template <typename T>
std::vector<BasicTensor<T>> concat_backward(const BasicTensor<T>& g, const std::vector<std::int64_t>& sizes,
                                            std::size_t axis) {
  std::vector<BasicTensor<T>> out;
  std::int64_t at = 0;
  for (auto s : sizes) {
    out.push_back(slice(g, axis, at, at + s));
    at += s;
  }
  return out;
}

// -------------------------------------------------------------- nonlinearities

/// Softmax over the last axis, max-subtracted.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x) {
  if (x.rank() == 0) dim_error("softmax", x.shape());
  const auto cols = static_cast<std::size_t>(x.shape().back());
  BasicTensor<T> out(x.shape());
  if (cols == 0) return out;
  for (std::size_t r = 0; r < x.size() / cols; ++r) {
    const T* in = x.ptr() + r * cols;
    T* o = out.ptr() + r * cols;
    T mx = in[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, in[c]);
    if constexpr (kPacketMath<T>) {
      ArrMap<T>(o, static_cast<Eigen::Index>(cols)) = (ArrMap<const T>(in, static_cast<Eigen::Index>(cols)) - mx).exp();
    } else {
      for (std::size_t c = 0; c < cols; ++c) o[c] = std::exp(in[c] - mx);
    }
    T total = 0;
    for (std::size_t c = 0; c < cols; ++c) total += o[c];
    const T inv = T(1) / total;
    for (std::size_t c = 0; c < cols; ++c) o[c] *= inv;
  }
  return out;
}

/// dx = y * (g - <g, y>) per row, from the softmax output y.
template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& y, const BasicTensor<T>& g) {
  if (y.shape() != g.shape()) dim_error("softmax_backward", y.shape(), g.shape());
  const auto cols = static_cast<std::size_t>(y.shape().back());
  BasicTensor<T> dx(y.shape());
  if (cols == 0) return dx;
  for (std::size_t r = 0; r < y.size() / cols; ++r) {
    const T* yr = y.ptr() + r * cols;
    const T* gr = g.ptr() + r * cols;
    T dot = 0;
    for (std::size_t c = 0; c < cols; ++c) dot += yr[c] * gr[c];
    for (std::size_t c = 0; c < cols; ++c) dx[r * cols + c] = yr[c] * (gr[c] - dot);
  }
  return dx;
}

/// Exact GELU: 0.5 x (1 + erf(x / sqrt 2)).
template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  const T r = T(std::numbers::sqrt2_v<long double> / 2);
  if constexpr (kPacketMath<T>) {
    const auto n = static_cast<Eigen::Index>(x.size());
    ArrMap<const T> X(x.ptr(), n);
    ArrMap<T>(out.ptr(), n) = T(0.5) * X * (T(1) + (X * r).erf());
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = T(0.5) * x[i] * (T(1) + std::erf(x[i] * r));
  }
  return out;
}

template <typename T>
BasicTensor<T> gelu_backward(const BasicTensor<T>& x, const BasicTensor<T>& g) {
  if (x.shape() != g.shape()) dim_error("gelu_backward", x.shape(), g.shape());
  BasicTensor<T> dx(x.shape());
  const T r = T(std::numbers::sqrt2_v<long double> / 2);
  const T inv_sqrt_2pi = T(std::numbers::inv_sqrtpi_v<long double> * std::numbers::sqrt2_v<long double> / 2);
  if constexpr (kPacketMath<T>) {
    const auto n = static_cast<Eigen::Index>(x.size());
    ArrMap<const T> X(x.ptr(), n);
    ArrMap<const T> G(g.ptr(), n);
    const auto cdf = T(0.5) * (T(1) + (X * r).erf());
    const auto pdf = inv_sqrt_2pi * (T(-0.5) * X.square()).exp();
    ArrMap<T>(dx.ptr(), n) = G * (cdf + X * pdf);
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const T cdf = T(0.5) * (T(1) + std::erf(x[i] * r));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * x[i] * x[i]);
      dx[i] = g[i] * (cdf + x[i] * pdf);
    }
  }
  return dx;
}

// --------------------------------------------------------------- layer norm

template <typename T>
struct LayerNormCache {
  BasicTensor<T> normalized;  // (x - mean) * rstd, before scale/shift
  std::vector<T> rstd;
};

/// Normalizes each row over the last axis, then applies gamma/beta.
template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                          LayerNormCache<T>* cache = nullptr, T eps = T(1e-5)) {
  if (x.rank() == 0) dim_error("layer_norm", x.shape());
  const auto cols = static_cast<std::size_t>(x.shape().back());
  if (gamma.size() != cols || beta.size() != cols) dim_error("layer_norm", x.shape(), gamma.shape());
  const std::size_t rows = cols ? x.size() / cols : 0;
  BasicTensor<T> xhat(x.shape());
  BasicTensor<T> out(x.shape());
  std::vector<T> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.ptr() + r * cols;
    T mean = 0;
    for (std::size_t c = 0; c < cols; ++c) mean += in[c];
    mean /= T(cols);
    T var = 0;
    for (std::size_t c = 0; c < cols; ++c) var += (in[c] - mean) * (in[c] - mean);
    var /= T(cols);
    const T rs = T(1) / std::sqrt(var + eps);
    rstd[r] = rs;
    for (std::size_t c = 0; c < cols; ++c) {
      const T n = (in[c] - mean) * rs;
      xhat[r * cols + c] = n;
      out[r * cols + c] = n * gamma[c] + beta[c];
    }
  }
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return out;
}

/// Returns dx; accumulates dgamma/dbeta when non-null.
template <typename T>
BasicTensor<T> layer_norm_backward(const LayerNormCache<T>& cache, const BasicTensor<T>& gamma, const BasicTensor<T>& g,
                                   Buffer<T>* dgamma, Buffer<T>* dbeta) {
  const auto& xhat = cache.normalized;
  if (xhat.shape() != g.shape()) dim_error("layer_norm_backward", xhat.shape(), g.shape());
  const auto cols = static_cast<std::size_t>(g.shape().back());
  const std::size_t rows = cols ? g.size() / cols : 0;
  BasicTensor<T> dx(g.shape());
  std::vector<T> dn(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* gr = g.ptr() + r * cols;
    const T* nr = xhat.ptr() + r * cols;
    T sum_dn = 0, sum_dn_n = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      dn[c] = gr[c] * gamma[c];
      sum_dn += dn[c];
      sum_dn_n += dn[c] * nr[c];
      if (dgamma) (*dgamma)[c] += gr[c] * nr[c];
      if (dbeta) (*dbeta)[c] += gr[c];
    }
    const T inv_n = T(1) / T(cols);
    for (std::size_t c = 0; c < cols; ++c) {
      dx[r * cols + c] = cache.rstd[r] * (dn[c] - inv_n * sum_dn - nr[c] * inv_n * sum_dn_n);
    }
  }
  return dx;
}

// ----------------------------------------------------------------- reductions

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  T total = 0;
  for (auto v : x.data()) total += v;
  return BasicTensor<T>::scalar(total);
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  if (x.empty()) dim_error("mean", x.shape());
  return BasicTensor<T>::scalar(sum(x)[0] / T(x.size()));
}

template <typename T>
BasicTensor<T> sum_backward(T g, const Shape& in_shape) {
  return BasicTensor<T>(in_shape, g);
}

template <typename T>
BasicTensor<T> mean_backward(T g, const Shape& in_shape) {
  return BasicTensor<T>(in_shape, g / T(shape_numel(in_shape)));
}

// ------------------------------------------------------------------ embedding

/// Rows of `table` (V,D) selected by ids -> (len(ids), D).
template <typename T>
BasicTensor<T> embedding(const BasicTensor<T>& table, const std::vector<std::int64_t>& ids) {
  if (table.rank() != 2) dim_error("embedding", table.shape());
  const auto d = static_cast<std::size_t>(table.dim(1));
  BasicTensor<T> out(Shape{static_cast<std::int64_t>(ids.size()), table.dim(1)});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.dim(0)) {
      throw DimensionError("embedding: id " + std::to_string(ids[i]) + " outside table " + shape_str(table.shape()));
    }
    std::copy_n(table.ptr() + static_cast<std::size_t>(ids[i]) * d, d, out.ptr() + i * d);
  }
  return out;
}

/// Scatter-adds g rows into dtable (same layout as the table).
template <typename T>
void embedding_backward(const BasicTensor<T>& g, const std::vector<std::int64_t>& ids, Buffer<T>& dtable) {
  const auto d = static_cast<std::size_t>(g.dim(1));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    T* row = dtable.data() + static_cast<std::size_t>(ids[i]) * d;
    for (std::size_t c = 0; c < d; ++c) row[c] += g[i * d + c];
  }
}

}  // namespace vace::ops
