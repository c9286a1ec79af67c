// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string_view>

#include "promptlab/ast.hpp"

namespace promptlab {

/// Filters accepted by the parser. Anything else is a SyntaxError.
std::span<const std::string_view> known_filters();

/// Parses template source. Throws TemplateError (UnterminatedDelimiter or
/// SyntaxError) carrying the byte offset of the problem.
TemplateAst parse(std::string_view source);

}  // namespace promptlab
