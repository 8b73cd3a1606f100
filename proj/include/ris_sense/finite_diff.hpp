#pragma once

#include <functional>

#include "ris_sense/tensor.hpp"

namespace ris {

using ScalarFn = std::function<double(const Tensor&)>;

/// Central-difference gradient of f at x:
///   g[k] = (f(x + step e_k) - f(x - step e_k)) / (2 step)
/// Throws NumericError if any evaluation is non-finite.
Tensor finite_diff_grad(const ScalarFn& f, const Tensor& x, double step);

/// Scale below which gradient errors are judged on an absolute basis.
/// Structurally zero gradients (a conv bias feeding train-mode BatchNorm)
/// otherwise turn round-off into a relative error of 1.
inline constexpr double kRelativeErrorFloor = 1e-3;

/// max_k |a_k - b_k| / max(max_k |a_k|, max_k |b_k|, kRelativeErrorFloor).
double max_relative_error(const Tensor& analytic, const Tensor& numeric);

}  // namespace ris
