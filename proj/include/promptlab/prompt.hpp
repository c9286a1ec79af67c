// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "promptlab/ast.hpp"
#include "promptlab/errors.hpp"
#include "promptlab/value.hpp"

namespace promptlab {

inline constexpr std::string_view kSeparator = "|||";

struct PromptMetadata {
  std::string name;
  std::string reference;
  bool original_task = false;
  bool choices_in_prompt = false;
  std::vector<std::string> metrics;
  std::vector<std::string> languages{"en"};

  bool operator==(const PromptMetadata&) const = default;
};

struct Prompt {
  std::string id;  // lowercase hyphenated UUIDv4
  std::string template_source;
  std::optional<std::string> answer_choices;
  PromptMetadata metadata;

  bool operator==(const Prompt&) const = default;
};

struct PromptedExample {
  std::string input;
  std::string target;
  std::optional<std::vector<std::string>> answer_choices;
  std::string prompt_id;
  std::uint64_t example_ordinal = 0;
  std::uint64_t variant_ordinal = 0;

  bool operator==(const PromptedExample&) const = default;
};

/// How `choice()` calls are resolved when applying a prompt.
struct SeededRandom {
  std::uint64_t seed = 0;
};
struct CrossProduct {
  std::size_t max_variants = 256;
};
struct FixedPath {
  std::vector<std::size_t> indices;
  bool pad_with_first = false;  // calls past the end take index 0
};
using ChoiceStrategy = std::variant<SeededRandom, CrossProduct, FixedPath>;

/// Parses "seeded:<u64>", "cross" or "fixed:<i,j,...>" ("fixed:" alone is
/// the empty path). Throws PromptError(InvalidStrategy).
ChoiceStrategy parse_strategy(std::string_view text);

bool is_uuid(std::string_view text);
std::string make_uuid(std::mt19937_64& rng);
std::string make_uuid();

/// Input/target pair produced by splitting a rendered prompt.
struct Split {
  std::string input;
  std::string target;
  bool operator==(const Split&) const = default;
};

/// Splits on the first separator and trims both sides. Returns nullopt
/// (skip) when the render is blank. Throws PromptError(MultipleSeparators).
std::optional<Split> split_separator(std::string_view rendered);

/// Renders an answer-choices template and splits it on every separator,
/// trimming and dropping empty pieces. `answer_choices` is not in scope
/// while it renders. Throws PromptError(EmptyChoices) if nothing is left.
std::vector<std::string> parse_answer_choices(const TemplateAst& ast,
                                              const Value& example);

/// Checks the invariants a stored prompt must satisfy (parseable templates,
/// non-blank name, answer choices present when the prompt lists them).
/// Throws TemplateError or PromptError(InvalidPrompt).
void validate_prompt(const Prompt& prompt);

/// A prompt with its templates parsed once, ready to apply to many
/// examples. Throws TemplateError if either template fails to parse.
class CompiledPrompt {
 public:
  explicit CompiledPrompt(Prompt prompt);

  const Prompt& prompt() const noexcept { return prompt_; }
  const TemplateAst& template_ast() const noexcept { return template_ast_; }
  const std::optional<TemplateAst>& answer_choices_ast() const noexcept {
    return answer_choices_ast_;
  }

 private:
  Prompt prompt_;
  TemplateAst template_ast_;
  std::optional<TemplateAst> answer_choices_ast_;
};

/// Error raised while applying a prompt; carries where it happened.
class ApplyError : public Error {
 public:
  ApplyError(const Error& cause, std::string prompt_id, std::uint64_t example_ordinal);

  const std::string& prompt_id() const noexcept { return prompt_id_; }
  std::uint64_t example_ordinal() const noexcept { return example_ordinal_; }

 private:
  std::string prompt_id_;
  std::uint64_t example_ordinal_;
};

struct ApplyResult {
  std::vector<PromptedExample> emitted;
  std::size_t variants = 0;  // renders attempted
  std::size_t skipped = 0;   // renders that came out blank
};

/// Applies one prompt to one example. Seeded and fixed strategies render
/// once; the cross product renders every choice combination. Blank renders
/// are dropped. A variant ordinal is the rank of its choice path in
/// odometer order, so it stays put when an earlier variant is skipped.
ApplyResult apply_prompt_detailed(const CompiledPrompt& prompt, const Value& example,
                                  std::uint64_t example_ordinal,
                                  const ChoiceStrategy& strategy);

std::vector<PromptedExample> apply_prompt(const CompiledPrompt& prompt,
                                          const Value& example,
                                          std::uint64_t example_ordinal,
                                          const ChoiceStrategy& strategy);

}  // namespace promptlab
