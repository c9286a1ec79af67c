// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "promptlab/materializer.hpp"
#include "promptlab/store.hpp"

namespace promptlab {

enum class Severity { Error, Warning };

std::string_view severity_name(Severity severity);

/// One guideline violation. ERROR findings fail review; WARNING findings
/// are advisory.
///
/// Prompt rules:
///   L001 ERROR   template or answer choices fail to parse
///   L002 ERROR   a sampled render fails (multiple separators, render error)
///   L003 ERROR   choices_in_prompt set without answer choices
///   L004 ERROR   blank name
///   L005 WARNING target starts with "The answer is" / "Answer:"
///   L006 WARNING no metrics
///   L007 WARNING input has no literal wording (3+ letters in a row)
///   L008 WARNING every sampled render was skipped
///   L009 WARNING no separator, so the target is always empty
///   L010 WARNING choice() nested inside a choice() list
/// Collection rules:
///   C001 WARNING fewer than 5 prompts
///   C002 ERROR   duplicate prompt names
///   C003 WARNING no original-task prompt
struct LintFinding {
  std::string rule;
  Severity severity = Severity::Warning;
  std::optional<std::string> prompt_name;
  std::string message;
  std::optional<std::size_t> location;

  bool operator==(const LintFinding&) const = default;
};

/// Dynamic rules look at no more than this many samples.
inline constexpr std::size_t kLintSampleLimit = 16;
inline constexpr std::size_t kRecommendedMinPrompts = 5;

std::vector<LintFinding> lint_prompt(const Prompt& prompt,
                                     std::span<const ExampleRecord> samples);

/// Prompt findings in prompt order, then collection findings.
std::vector<LintFinding> lint_collection(const PromptCollection& collection,
                                         std::span<const ExampleRecord> samples);

bool has_errors(std::span<const LintFinding> findings);

/// {"rule","severity","prompt_name","message"} on one line.
std::string to_json_line(const LintFinding& finding);
nlohmann::ordered_json to_json(const LintFinding& finding);

}  // namespace promptlab
