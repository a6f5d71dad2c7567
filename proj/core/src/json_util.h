#pragma once

// Internal helpers around nlohmann::json. Not installed.

#include <string>
#include <string_view>

#include "clustercal/error.h"
#include "json.hpp"

namespace clustercal::detail {

using Json = nlohmann::json;
// Insertion-ordered object, used for all persisted payloads so that field order
// is stable and readable.
using OrderedJson = nlohmann::ordered_json;

inline Json parse_json(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw ValidationError(std::string(what) + ": invalid JSON: " + e.what());
  }
}

template <typename T, typename J>
T get_or(const J& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).template get<T>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T, typename J>
T get_required(const J& j, const char* key, std::string_view what) {
  if (!j.contains(key) || j.at(key).is_null()) {
    throw ValidationError(std::string(what) + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).template get<T>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string(what) + ": field '" + key + "': " + e.what());
  }
}

// Serialized with 2-space indentation and a trailing newline.
template <typename J>
std::string dump(const J& j) {
  return j.dump(2) + "\n";
}

}  // namespace clustercal::detail
