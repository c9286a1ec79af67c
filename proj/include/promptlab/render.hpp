// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "promptlab/ast.hpp"
#include "promptlab/choice.hpp"
#include "promptlab/value.hpp"

namespace promptlab {

/// Everything one render call may read. `example` must outlive the
/// context. The name `answer_choices` is reserved: when set it shadows an
/// example field of the same name, and when unset referencing it is a
/// MissingField error. Loop and `set` bindings shadow both.
struct RenderContext {
  const Value* example = nullptr;
  std::optional<std::vector<std::string>> answer_choices;
  ChoiceResolver resolver = ChoiceResolver::fixed({}, true);
};

/// Renders the AST. Throws RenderError on MissingField, TypeMismatch,
/// ChoiceError, DivisionByZero or IndexOutOfRange.
std::string render(const TemplateAst& ast, RenderContext& ctx);

/// Lengths of the choice lists met along the path where every choice takes
/// its first element. Empty when the executed path makes no choice call.
std::vector<std::size_t> enumerate_choice_shape(const TemplateAst& ast,
                                                const RenderContext& ctx);

/// Visits every combination of choice indices reachable for this context,
/// in odometer order (the last call varies fastest). Paths are discovered
/// one render at a time, so choice calls hidden behind conditionals are
/// only enumerated on the branches that reach them. Throws RenderError
/// (VariantLimitExceeded) before visiting variant `max_variants + 1`.
/// Returns the number of variants visited.
using ChoiceVisitor =
    std::function<void(const std::string& rendered, const std::vector<std::size_t>& path)>;
std::size_t for_each_choice_path(const TemplateAst& ast, const RenderContext& ctx,
                                 std::size_t max_variants,
                                 const ChoiceVisitor& visit);

}  // namespace promptlab
