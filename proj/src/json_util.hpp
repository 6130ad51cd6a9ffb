#ifndef PCEPERF_SRC_JSON_UTIL_HPP
#define PCEPERF_SRC_JSON_UTIL_HPP

// Path-aware accessors for configuration and model documents.

#include <string>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "pceperf/error.hpp"

namespace pceperf::detail {

[[noreturn]] inline void bad_field(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::Config, fmt::format("{}: {}", path, what));
}

inline const nlohmann::json& require(const nlohmann::json& obj, const std::string& key,
                                     const std::string& path) {
  if (!obj.is_object()) bad_field(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) bad_field(path + "." + key, "missing required field");
  return *it;
}

inline double require_number(const nlohmann::json& obj, const std::string& key,
                             const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_number()) bad_field(path + "." + key, "expected a number");
  return v.get<double>();
}

inline std::string require_string(const nlohmann::json& obj, const std::string& key,
                                  const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) bad_field(path + "." + key, "expected a string");
  return v.get<std::string>();
}

inline std::vector<double> require_number_list(const nlohmann::json& obj, const std::string& key,
                                               const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_array()) bad_field(path + "." + key, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) bad_field(fmt::format("{}.{}[{}]", path, key, i), "expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

/// Non-negative integer field; accepts integral JSON numbers only.
inline std::uint64_t require_natural(const nlohmann::json& obj, const std::string& key,
                                     const std::string& path) {
  const auto& v = require(obj, key, path);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  bad_field(path + "." + key, "expected a non-negative integer");
}

}  // namespace pceperf::detail

#endif  // PCEPERF_SRC_JSON_UTIL_HPP
