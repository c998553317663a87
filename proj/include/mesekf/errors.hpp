#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace mesekf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A chart coordinate fell outside the surface's parameter rectangle.
class OutOfChartError : public Error {
 public:
  OutOfChartError(double u, double v)
      : Error("chart point (" + std::to_string(u) + ", " + std::to_string(v) +
              ") is outside the chart domain"),
        u_(u),
        v_(v) {}
  double u() const { return u_; }
  double v() const { return v_; }

 private:
  double u_;
  double v_;
};

/// An iterative solver stopped without meeting its tolerance.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, Eigen::Vector3d best)
      : Error(what), best_(std::move(best)) {}
  const Eigen::Vector3d& best_iterate() const { return best_; }

 private:
  Eigen::Vector3d best_;
};

/// The innovation covariance could not be inverted reliably.
class SingularUpdateError : public Error {
 public:
  using Error::Error;
};

/// Measurement geometry without a defined gradient (e.g. anchor at sensor).
class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

class DegenerateCovarianceError : public Error {
 public:
  using Error::Error;
};

class DegenerateSamplingError : public Error {
 public:
  using Error::Error;
};

/// The range shell did not intersect any sampled surface point.
class NoIntersectionError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; `path()` names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace mesekf
