#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mesekf/errors.hpp"

namespace mesekf {

/// Elevation and its partial derivatives up to second order at one chart point.
struct SurfacePartials {
  double z = 0.0;
  double z_u = 0.0;
  double z_v = 0.0;
  double z_uu = 0.0;
  double z_uv = 0.0;
  double z_vv = 0.0;
};

namespace bspline_detail {

inline constexpr int kMaxDegree = 5;
inline constexpr int kMaxOrder = kMaxDegree + 1;

/// Basis functions and derivatives, ders[k][j] = d^k N_{span-p+j,p} / du^k.
using BasisDerivs = std::array<std::array<double, kMaxOrder>, 3>;

/// Knot span index containing `x` for a clamped knot vector with `num_ctrl`
/// control points. The closed right end maps onto the last non-empty span.
inline int find_span(const std::vector<double>& knots, int degree, int num_ctrl, double x) {
  const int n = num_ctrl - 1;
  if (x >= knots[n + 1]) {
    return n;
  }
  if (x <= knots[degree]) {
    return degree;
  }
  // Last index i with knots[i] <= x.
  const auto it = std::upper_bound(knots.begin() + degree, knots.begin() + n + 2, x);
  return static_cast<int>(it - knots.begin()) - 1;
}

/// Derivatives of the nonzero basis functions up to `order` (<= 2).
inline BasisDerivs basis_derivs(const std::vector<double>& knots, int span, int degree, double x,
                                int order) {
  const int p = degree;
  std::array<std::array<double, kMaxOrder>, kMaxOrder> ndu{};
  std::array<double, kMaxOrder> left{};
  std::array<double, kMaxOrder> right{};
  ndu[0][0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - knots[span + 1 - j];
    right[j] = knots[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu[j][r] = right[r + 1] + left[j - r];
      const double temp = ndu[r][j - 1] / ndu[j][r];
      ndu[r][j] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu[j][j] = saved;
  }

  BasisDerivs ders{};
  for (int j = 0; j <= p; ++j) {
    ders[0][j] = ndu[j][p];
  }
  const int max_k = std::min(order, p);
  std::array<std::array<double, kMaxOrder>, 2> a{};
  for (int r = 0; r <= p; ++r) {
    int s1 = 0;
    int s2 = 1;
    a[0][0] = 1.0;
    for (int k = 1; k <= max_k; ++k) {
      double d = 0.0;
      const int rk = r - k;
      const int pk = p - k;
      if (r >= k) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
        d += a[s2][j] * ndu[rk + j][pk];
      }
      if (r <= pk) {
        a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
        d += a[s2][k] * ndu[r][pk];
      }
      ders[k][r] = d;
      std::swap(s1, s2);
    }
  }
  double scale = p;
  for (int k = 1; k <= max_k; ++k) {
    for (int j = 0; j <= p; ++j) {
      ders[k][j] *= scale;
    }
    scale *= (p - k);
  }
  return ders;
}

}  // namespace bspline_detail

/// Clamped knot vector with uniformly spaced interior knots on [lo, hi].
inline std::vector<double> clamped_uniform_knots(int degree, int num_ctrl, double lo, double hi) {
  const int num_knots = num_ctrl + degree + 1;
  const int segments = num_ctrl - degree;
  std::vector<double> knots(static_cast<std::size_t>(num_knots));
  for (int i = 0; i < num_knots; ++i) {
    if (i <= degree) {
      knots[i] = lo;
    } else if (i >= num_ctrl) {
      knots[i] = hi;
    } else {
      knots[i] = lo + (hi - lo) * static_cast<double>(i - degree) / segments;
    }
  }
  return knots;
}

/// Greville abscissae; control values sampled there reproduce linear functions exactly.
inline std::vector<double> greville_abscissae(const std::vector<double>& knots, int degree) {
  const std::size_t num_ctrl = knots.size() - static_cast<std::size_t>(degree) - 1;
  std::vector<double> g(num_ctrl);
  for (std::size_t i = 0; i < num_ctrl; ++i) {
    double s = 0.0;
    for (int k = 1; k <= degree; ++k) {
      s += knots[i + static_cast<std::size_t>(k)];
    }
    g[i] = s / degree;
  }
  return g;
}

/// Tensor-product b-spline elevation field z = S(u, v) over a closed parameter
/// rectangle. Control points are scalar elevations indexed (i along u, j along v).
class BSplineSurface {
 public:
  BSplineSurface(int degree_u, int degree_v, std::vector<double> knots_u,
                 std::vector<double> knots_v, Eigen::MatrixXd control_points)
      : degree_u_(degree_u),
        degree_v_(degree_v),
        knots_u_(std::move(knots_u)),
        knots_v_(std::move(knots_v)),
        control_(std::move(control_points)) {
    validate_axis("degree_u", "knots_u", degree_u_, knots_u_, control_.rows());
    validate_axis("degree_v", "knots_v", degree_v_, knots_v_, control_.cols());
    if (!control_.allFinite()) {
      throw ConfigError("control_points", "control points must be finite");
    }
  }

  /// Flat surface z = height over [u0,u1] x [v0,v1].
  static BSplineSurface flat(double u0, double u1, double v0, double v1, double height = 0.0,
                             int degree = 3, int num_ctrl = 4) {
    return planar(u0, u1, v0, v1, 0.0, 0.0, height, degree, num_ctrl);
  }

  /// Plane z = offset + slope_u * u + slope_v * v, reproduced exactly by the spline.
  static BSplineSurface planar(double u0, double u1, double v0, double v1, double slope_u,
                               double slope_v, double offset = 0.0, int degree = 3,
                               int num_ctrl = 4) {
    auto ku = clamped_uniform_knots(degree, num_ctrl, u0, u1);
    auto kv = clamped_uniform_knots(degree, num_ctrl, v0, v1);
    const auto gu = greville_abscissae(ku, degree);
    const auto gv = greville_abscissae(kv, degree);
    Eigen::MatrixXd cp(num_ctrl, num_ctrl);
    for (int i = 0; i < num_ctrl; ++i) {
      for (int j = 0; j < num_ctrl; ++j) {
        cp(i, j) = offset + slope_u * gu[i] + slope_v * gv[j];
      }
    }
    return {degree, degree, std::move(ku), std::move(kv), std::move(cp)};
  }

  int degree_u() const { return degree_u_; }
  int degree_v() const { return degree_v_; }
  const std::vector<double>& knots_u() const { return knots_u_; }
  const std::vector<double>& knots_v() const { return knots_v_; }
  const Eigen::MatrixXd& control_points() const { return control_; }

  double u_min() const { return knots_u_[degree_u_]; }
  double u_max() const { return knots_u_[knots_u_.size() - 1 - degree_u_]; }
  double v_min() const { return knots_v_[degree_v_]; }
  double v_max() const { return knots_v_[knots_v_.size() - 1 - degree_v_]; }

  bool contains(double u, double v) const {
    return std::isfinite(u) && std::isfinite(v) && u >= u_min() && u <= u_max() &&
           v >= v_min() && v <= v_max();
  }

  double elevation(double u, double v) const { return evaluate(u, v, 0).z; }

  Eigen::Vector2d gradient(double u, double v) const {
    const SurfacePartials d = evaluate(u, v, 1);
    return {d.z_u, d.z_v};
  }

  /// Elevation with derivatives up to `order` (0, 1 or 2); higher entries stay zero.
  SurfacePartials evaluate(double u, double v, int order = 2) const {
    if (!contains(u, v)) {
      throw OutOfChartError(u, v);
    }
    using namespace bspline_detail;
    const int nu = static_cast<int>(control_.rows());
    const int nv = static_cast<int>(control_.cols());
    const int su = find_span(knots_u_, degree_u_, nu, u);
    const int sv = find_span(knots_v_, degree_v_, nv, v);
    const BasisDerivs bu = basis_derivs(knots_u_, su, degree_u_, u, order);
    const BasisDerivs bv = basis_derivs(knots_v_, sv, degree_v_, v, order);

    // Contract along v first: row[k][i] = sum_j d^k N_j(v) P_ij.
    std::array<std::array<double, kMaxOrder>, 3> row{};
    for (int i = 0; i <= degree_u_; ++i) {
      const int ci = su - degree_u_ + i;
      for (int j = 0; j <= degree_v_; ++j) {
        const double p = control_(ci, sv - degree_v_ + j);
        for (int k = 0; k <= order; ++k) {
          row[k][i] += bv[k][j] * p;
        }
      }
    }
    SurfacePartials out;
    for (int i = 0; i <= degree_u_; ++i) {
      out.z += bu[0][i] * row[0][i];
      if (order >= 1) {
        out.z_u += bu[1][i] * row[0][i];
        out.z_v += bu[0][i] * row[1][i];
      }
      if (order >= 2) {
        out.z_uu += bu[2][i] * row[0][i];
        out.z_uv += bu[1][i] * row[1][i];
        out.z_vv += bu[0][i] * row[2][i];
      }
    }
    return out;
  }

 private:
  static void validate_axis(const std::string& degree_name, const std::string& knots_name,
                            int degree, const std::vector<double>& knots, Eigen::Index num_ctrl) {
    if (degree < 1 || degree > bspline_detail::kMaxDegree) {
      throw ConfigError(degree_name, "degree must lie in [1, " +
                                         std::to_string(bspline_detail::kMaxDegree) + "]");
    }
    if (num_ctrl < degree + 1) {
      throw ConfigError("control_points", "need at least degree+1 control points per axis");
    }
    if (static_cast<Eigen::Index>(knots.size()) != num_ctrl + degree + 1) {
      throw ConfigError(knots_name, "knot count must equal control count + degree + 1");
    }
    for (std::size_t i = 0; i < knots.size(); ++i) {
      if (!std::isfinite(knots[i])) {
        throw ConfigError(knots_name + "[" + std::to_string(i) + "]", "knot must be finite");
      }
      if (i > 0 && knots[i] < knots[i - 1]) {
        throw ConfigError(knots_name + "[" + std::to_string(i) + "]",
                          "knot vector must be nondecreasing");
      }
    }
    const std::size_t last = knots.size() - 1;
    for (int k = 1; k <= degree; ++k) {
      if (knots[k] != knots[0] || knots[last - k] != knots[last]) {
        throw ConfigError(knots_name, "knot vector must be clamped (end knots repeated degree+1 times)");
      }
    }
    if (!(knots[last] > knots[0])) {
      throw ConfigError(knots_name, "knot vector must span a non-empty interval");
    }
  }

  int degree_u_;
  int degree_v_;
  std::vector<double> knots_u_;
  std::vector<double> knots_v_;
  Eigen::MatrixXd control_;
};

}  // namespace mesekf
