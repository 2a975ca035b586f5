#pragma once

// Internal helpers over yaml-cpp shared by the YAML-backed readers.

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <string>
#include <string_view>

#include "drivecombo/common.hpp"

namespace drivecombo::yaml {

inline std::size_t line_of(const YAML::Node& node) {
  const auto mark = node.Mark();
  return mark.line < 0 ? 0 : static_cast<std::size_t>(mark.line) + 1;
}

inline YAML::Node load(std::string_view text) {
  try {
    return YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ParseError("syntax error: " + e.msg + " (column " + std::to_string(e.mark.column + 1) + ")",
                     static_cast<std::size_t>(e.mark.line) + 1);
  }
}

inline std::string scalar(const YAML::Node& node, const std::string& what) {
  if (!node || !node.IsScalar()) throw ParseError(what + ": expected a scalar", line_of(node));
  return node.Scalar();
}

inline double number(const YAML::Node& node, const std::string& what) {
  const auto text = scalar(node, what);
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::logic_error&) {
    throw ParseError(what + ": expected a number, got '" + text + "'", line_of(node));
  }
}

template <typename E>
E token(const YAML::Node& node, const std::string& what) {
  const auto text = scalar(node, what);
  if (auto v = parse_token<E>(text)) return *v;
  throw ParseError(what + ": unknown token '" + text + "'", line_of(node));
}

// Rejects keys outside `allowed`.
template <typename Keys>
void expect_keys(const YAML::Node& map, const Keys& allowed, const std::string& what) {
  if (!map.IsMap()) throw ParseError(what + ": expected a mapping", line_of(map));
  for (const auto& kv : map) {
    const auto key = kv.first.Scalar();
    bool ok = false;
    for (const auto& a : allowed) ok = ok || key == a;
    if (!ok) throw ParseError(what + ": unknown key '" + key + "'", line_of(kv.first));
  }
}

inline YAML::Node require(const YAML::Node& map, const char* key, const std::string& what) {
  auto n = map[key];
  if (!n) throw ParseError(what + ": missing key '" + key + "'", line_of(map));
  return n;
}

}  // namespace drivecombo::yaml
