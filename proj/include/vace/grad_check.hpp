// Copyright 2026 The vace-toy Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "vace/tensor.hpp"

namespace vace {

/// A scalar-valued function together with its hand-written gradient.
template <typename T>
struct ScalarFunction {
  std::function<BasicTensor<T>(const BasicTensor<T>&)> value;
  std::function<BasicTensor<T>(const BasicTensor<T>&)> gradient;
};

struct GradCheckOptions {
  /// Coordinates where both |analytic| and |central| fall at or below this
  /// level are treated as agreeing (finite differences of a constant function
  /// are pure rounding noise). Zero keeps the plain relative metric.
  double zero_level = 0.0;
};

/// (f(x + eps e_i) - f(x - eps e_i)) / step_i for every coordinate, where
/// step_i is the realized (x + eps) - (x - eps) after rounding to T.
template <typename T>
BasicTensor<T> central_differences(const std::function<BasicTensor<T>(const BasicTensor<T>&)>& f,
                                   const BasicTensor<T>& input, double eps) {
  if (!(eps > 0)) throw ArgumentError("grad_check: eps must be positive");
  auto scalar_of = [&](const BasicTensor<T>& x) {
    const auto out = f(x);
    if (out.size() != 1) {
      throw ContractError("grad_check: function output has shape " + shape_str(out.shape()) +
                          ", expected a scalar");
    }
    return out[0];
  };
  scalar_of(input);
  BasicTensor<T> probe = input;
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const T orig = probe[i];
    const T hi = static_cast<T>(orig + static_cast<T>(eps));
    const T lo = static_cast<T>(orig - static_cast<T>(eps));
    probe[i] = hi;
    const T up = scalar_of(probe);
    probe[i] = lo;
    const T down = scalar_of(probe);
    probe[i] = orig;
    out[i] = (up - down) / (hi - lo);
  }
  return out;
}

/// max_i |a_i - c_i| / max(|a_i|, |c_i|, 1e-8).
template <typename T>
double max_relative_error(const BasicTensor<T>& analytic, const BasicTensor<T>& central, GradCheckOptions options = {}) {
  if (analytic.shape() != central.shape()) {
    throw DimensionError("grad_check: gradient shape " + shape_str(analytic.shape()) + " vs input " +
                         shape_str(central.shape()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = static_cast<double>(analytic[i]);
    const double c = static_cast<double>(central[i]);
    if (std::abs(a) <= options.zero_level && std::abs(c) <= options.zero_level) continue;
    const double denom = std::max({std::abs(a), std::abs(c), 1e-8});
    worst = std::max(worst, std::abs(a - c) / denom);
  }
  return worst;
}

/// max_i |analytic_i - central_i| / max(|analytic_i|, |central_i|, 1e-8),
/// with central_i = (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
template <typename T>
double grad_check(const ScalarFunction<T>& f, const BasicTensor<T>& input, double eps,
                  GradCheckOptions options = {}) {
  const auto central = central_differences<T>(f.value, input, eps);
  return max_relative_error(f.gradient(input), central, options);
}

}  // namespace vace
