#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "mesekf/bspline.hpp"
#include "mesekf/errors.hpp"

namespace mesekf {

/// Coordinates on the chart U (metres).
struct ChartPoint {
  double u = 0.0;
  double v = 0.0;

  static ChartPoint from(const Eigen::Vector2d& x) { return {x.x(), x.y()}; }
  Eigen::Vector2d vec() const { return {u, v}; }

  friend bool operator==(const ChartPoint&, const ChartPoint&) = default;
};

/// Point in the world frame W (metres).
using WorldPoint = Eigen::Vector3d;

/// Orientation of the tangent space in W: columns are B1', B2' and the upward normal N'.
struct TangentFrame {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();

  Eigen::Vector3d b1() const { return rotation.col(0); }
  Eigen::Vector3d b2() const { return rotation.col(1); }
  Eigen::Vector3d normal() const { return rotation.col(2); }
  /// The two tangent columns as a 3x2 basis of the tangent plane.
  Eigen::Matrix<double, 3, 2> tangent_basis() const { return rotation.leftCols<2>(); }
};

inline double elevation(const BSplineSurface& surface, const ChartPoint& t) {
  return surface.elevation(t.u, t.v);
}

/// Slopes (dS/du, dS/dv).
inline Eigen::Vector2d gradient(const BSplineSurface& surface, const ChartPoint& t) {
  return surface.gradient(t.u, t.v);
}

/// Inverse chart map: (u, v) -> (u, v, S(u, v)).
inline WorldPoint chart_to_world(const BSplineSurface& surface, const ChartPoint& t) {
  return {t.u, t.v, surface.elevation(t.u, t.v)};
}

/// Chart map of the explicit surface: vertical projection, drops z.
inline ChartPoint world_to_chart(const WorldPoint& p) { return {p.x(), p.y()}; }

/// d(sigma)/dp, constant for the explicit chart.
inline Eigen::Matrix<double, 2, 3> chart_jacobian(const WorldPoint& /*p*/ = WorldPoint::Zero()) {
  Eigen::Matrix<double, 2, 3> j;
  j << 1.0, 0.0, 0.0, 0.0, 1.0, 0.0;
  return j;
}

/// Frame from the surface slopes, R = Rx(alpha) * Ry(beta) with
/// alpha = atan(S_v) and beta = -atan(S_u / sqrt(1 + S_v^2)). This coupling makes
/// the third column the exact unit normal (-S_u, -S_v, 1) / |.|.
inline TangentFrame tangent_frame_from_slopes(double s_u, double s_v) {
  const double hv = std::sqrt(1.0 + s_v * s_v);
  const double len = std::sqrt(1.0 + s_u * s_u + s_v * s_v);
  const double ca = 1.0 / hv;
  const double sa = s_v / hv;
  const double cb = hv / len;
  const double sb = -s_u / len;
  TangentFrame f;
  f.rotation << cb, 0.0, sb,            //
      sa * sb, ca, -sa * cb,            //
      -ca * sb, sa, ca * cb;
  return f;
}

inline TangentFrame tangent_frame(const BSplineSurface& surface, const ChartPoint& t) {
  const Eigen::Vector2d g = surface.gradient(t.u, t.v);
  return tangent_frame_from_slopes(g.x(), g.y());
}

/// Options for closest_point.
struct ClosestPointOptions {
  double step_tolerance = 1e-10;
  int max_iterations = 50;
};

/// Local minimiser of |r - sigma^-1(t)| over the chart, started from the vertical
/// projection of r. Newton steps on the 2D chart residual, falling back to plain
/// Gauss-Newton when the curvature term is indefinite, with backtracking. Iterates
/// are clamped to the chart rectangle.
inline WorldPoint closest_point(const BSplineSurface& surface, const WorldPoint& r,
                                const ClosestPointOptions& opts = {}) {
  if (!r.allFinite()) {
    throw NumericalFailure("closest_point: query point is not finite", r);
  }
  Eigen::Vector2d t(r.x(), r.y());
  if (!surface.contains(t.x(), t.y())) {
    throw OutOfChartError(t.x(), t.y());
  }
  auto clamp = [&](Eigen::Vector2d x) {
    x.x() = std::clamp(x.x(), surface.u_min(), surface.u_max());
    x.y() = std::clamp(x.y(), surface.v_min(), surface.v_max());
    return x;
  };
  auto cost = [&](const Eigen::Vector2d& x) {
    const double dz = surface.elevation(x.x(), x.y()) - r.z();
    return (x - r.head<2>()).squaredNorm() + dz * dz;
  };

  double f = cost(t);
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    const SurfacePartials d = surface.evaluate(t.x(), t.y(), 2);
    const Eigen::Vector2d gz(d.z_u, d.z_v);
    const double dz = d.z - r.z();
    // Residual e = (t - r_xy, S - r_z); gradient J^T e and Gauss-Newton matrix J^T J.
    const Eigen::Vector2d grad = (t - r.head<2>()) + dz * gz;
    Eigen::Matrix2d h = Eigen::Matrix2d::Identity() + gz * gz.transpose();
    Eigen::Matrix2d newton = h;
    newton(0, 0) += dz * d.z_uu;
    newton(0, 1) += dz * d.z_uv;
    newton(1, 0) += dz * d.z_uv;
    newton(1, 1) += dz * d.z_vv;
    Eigen::LLT<Eigen::Matrix2d> llt(newton);
    if (llt.info() != Eigen::Success) {
      llt.compute(h);
    }
    const Eigen::Vector2d step = -llt.solve(grad);

    double alpha = 1.0;
    Eigen::Vector2d next = clamp(t + step);
    double f_next = cost(next);
    while (f_next > f && alpha > 1e-6) {
      alpha *= 0.5;
      next = clamp(t + alpha * step);
      f_next = cost(next);
    }
    if (f_next > f) {
      // No descent left at machine precision.
      return {t.x(), t.y(), surface.elevation(t.x(), t.y())};
    }
    const double moved = (next - t).norm();
    t = next;
    f = f_next;
    if (moved < opts.step_tolerance) {
      return {t.x(), t.y(), surface.elevation(t.x(), t.y())};
    }
  }
  throw NumericalFailure("closest_point: no convergence within iteration limit",
                         WorldPoint(t.x(), t.y(), surface.elevation(t.x(), t.y())));
}

}  // namespace mesekf
