#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "mesekf/bspline.hpp"
#include "mesekf/io/json_fields.hpp"

namespace mesekf::io {

inline Json read_json_file(const std::string& path, const std::string& field = "config") {
  std::ifstream in(path);
  if (!in) throw ConfigError(field, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(field, "'" + path + "' is not valid JSON: " + e.what());
  }
}

/// Surface JSON: degree_u, degree_v, knots_u, knots_v and control_points, one row per
/// u-index with one column per v-index.
inline BSplineSurface surface_from_json(const Json& j, const std::string& path = "surface") {
  const Fields f(j, path);
  const Json& rows = f.at("control_points");
  const std::string cp = f.path_of("control_points");
  if (!rows.is_array() || rows.empty()) throw ConfigError(cp, "expected a non-empty 2D array");
  const std::size_t nu = rows.size();
  std::size_t nv = 0;
  Eigen::MatrixXd control;
  for (std::size_t i = 0; i < nu; ++i) {
    const auto row = Fields::numbers(rows[i], cp + "[" + std::to_string(i) + "]");
    if (i == 0) {
      nv = row.size();
      control.resize(static_cast<Eigen::Index>(nu), static_cast<Eigen::Index>(nv));
    } else if (row.size() != nv) {
      throw ConfigError(cp + "[" + std::to_string(i) + "]", "rows must have equal length");
    }
    for (std::size_t k = 0; k < nv; ++k) {
      control(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
    }
  }
  try {
    return BSplineSurface(f.get<int>("degree_u"), f.get<int>("degree_v"),
                          Fields::numbers(f.at("knots_u"), f.path_of("knots_u")),
                          Fields::numbers(f.at("knots_v"), f.path_of("knots_v")), control);
  } catch (const ConfigError& e) {
    if (e.path().rfind(path, 0) == 0) throw;
    throw ConfigError(path + "." + e.path(), std::string(e.what()).substr(e.path().size() + 2));
  }
}

inline Json surface_to_json(const BSplineSurface& s) {
  Json j;
  j["degree_u"] = s.degree_u();
  j["degree_v"] = s.degree_v();
  j["knots_u"] = s.knots_u();
  j["knots_v"] = s.knots_v();
  Json rows = Json::array();
  const Eigen::MatrixXd& c = s.control_points();
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < c.cols(); ++k) row.push_back(c(i, k));
    rows.push_back(row);
  }
  j["control_points"] = rows;
  return j;
}

inline BSplineSurface load_surface(const std::string& file) {
  return surface_from_json(read_json_file(file, "surface"), "surface");
}

inline void save_surface(const BSplineSurface& s, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw Error("save_surface: cannot write '" + file + "'");
  out << surface_to_json(s).dump(2) << '\n';
}

}  // namespace mesekf::io
