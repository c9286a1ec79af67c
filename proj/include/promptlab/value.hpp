// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace promptlab {

/// A field value from a dataset example: null, boolean, integer, float,
/// string, list or mapping. Mapping keys iterate in lexicographic order.
using Value = nlohmann::json;

/// Stringification used by interpolation: strings verbatim, integers in
/// base 10, floats as the shortest round-trip decimal (always carrying a
/// fractional part or exponent), booleans as `true`/`false`, null as the
/// empty string, lists as their items joined with ", ", mappings as
/// "key: value" pairs joined with ", ".
std::string to_display_string(const Value& value);

bool is_truthy(const Value& value);

bool is_integer(const Value& value);

/// Human name for error messages ("string", "list", ...).
std::string_view type_name(const Value& value);

/// Splits a UTF-8 string into code points (each returned as its byte
/// sequence). Invalid bytes are returned one at a time.
std::vector<std::string> utf8_code_points(std::string_view text);

std::string_view trim(std::string_view text);

}  // namespace promptlab
