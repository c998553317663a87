#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mesekf/errors.hpp"

namespace mesekf::io {

using Json = nlohmann::json;

/// Typed access to JSON fields that reports failures with the field path.
class Fields {
 public:
  Fields(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return node_.contains(key) && !node_.at(key).is_null(); }

  std::string path_of(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const Json& at(const std::string& key) const {
    if (!has(key)) throw ConfigError(path_of(key), "required field is missing");
    return node_.at(key);
  }

  Fields object(const std::string& key) const { return Fields(at(key), path_of(key)); }

  template <typename T>
  T get(const std::string& key) const {
    return convert<T>(at(key), path_of(key));
  }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }

  Eigen::Vector2d vec2(const std::string& key) const { return vector<2>(at(key), path_of(key)); }
  Eigen::Vector3d vec3(const std::string& key) const { return vector<3>(at(key), path_of(key)); }

  template <typename T>
  static T convert(const Json& j, const std::string& path) {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!j.is_number()) throw ConfigError(path, "expected a number");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (j.get<long long>() < 0) throw ConfigError(path, "must be non-negative");
        }
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!j.is_boolean()) throw ConfigError(path, "expected a boolean");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!j.is_string()) throw ConfigError(path, "expected a string");
      }
      return j.get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path, e.what());
    }
  }

  template <int N>
  static Eigen::Matrix<double, N, 1> vector(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != static_cast<std::size_t>(N)) {
      throw ConfigError(path, "expected an array of " + std::to_string(N) + " numbers");
    }
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) {
      out[i] = convert<double>(j[static_cast<std::size_t>(i)],
                               path + "[" + std::to_string(i) + "]");
    }
    return out;
  }

  static std::vector<double> numbers(const Json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path, "expected an array");
    std::vector<double> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
      out.push_back(convert<double>(j[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

 private:
  const Json& node_;
  std::string path_;
};

}  // namespace mesekf::io
