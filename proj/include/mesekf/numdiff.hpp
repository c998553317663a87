#pragma once

#include <Eigen/Core>

namespace mesekf {

inline constexpr double kJacobianStep = 1e-6;

/// Central-difference Jacobian of `f` at `x`. `f` must return a fixed-size Eigen
/// vector with `Rows` entries; `delta(x, i, h)` applies a perturbation of size `h`
/// along coordinate `i` and `diff(a, b)` measures `a - b` in the output space.
template <int Rows, int Cols, typename X, typename F, typename Delta, typename Diff>
Eigen::Matrix<double, Rows, Cols> central_jacobian(const X& x, F&& f, Delta&& delta, Diff&& diff,
                                                   double h = kJacobianStep) {
  Eigen::Matrix<double, Rows, Cols> j;
  for (int i = 0; i < Cols; ++i) {
    const auto plus = f(delta(x, i, h));
    const auto minus = f(delta(x, i, -h));
    j.col(i) = diff(plus, minus) / (2.0 * h);
  }
  return j;
}

}  // namespace mesekf
