// SPDX-License-Identifier: Apache-2.0

#include "promptlab/linter.hpp"

#include <algorithm>

#include "promptlab/parser.hpp"
#include "promptlab/render.hpp"

namespace promptlab {

namespace {

constexpr std::string_view kForbiddenTargetPrefixes[] = {"the answer is", "answer:"};

bool starts_with_ci(std::string_view text, std::string_view prefix) {
  if (text.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char c = text[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != prefix[i]) return false;
  }
  return true;
}

bool is_word_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

// Non-ASCII bytes count as letters so that prompts written in other
// scripts are not flagged.
bool has_letter_run(std::string_view text, std::size_t run) {
  std::size_t current = 0;
  for (auto c : text) {
    current = is_word_char(static_cast<unsigned char>(c)) ? current + 1 : 0;
    if (current >= run) return true;
  }
  return false;
}

void collect_literals(const NodeList& nodes, std::vector<std::string_view>& out) {
  for (const auto& node : nodes) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, LiteralNode>) {
            out.push_back(n.text);
          } else if constexpr (std::is_same_v<T, IfNode>) {
            collect_literals(n.then_body, out);
            for (const auto& b : n.elifs) collect_literals(b.body, out);
            collect_literals(n.else_body, out);
          } else if constexpr (std::is_same_v<T, ForNode>) {
            collect_literals(n.body, out);
          }
        },
        node.data);
  }
}

// Literal text on the input side, piece by piece, stopping at the first
// separator.
std::vector<std::string_view> input_literals(const TemplateAst& ast) {
  std::vector<std::string_view> all;
  collect_literals(ast.nodes, all);
  std::vector<std::string_view> out;
  for (auto piece : all) {
    auto sep = piece.find(kSeparator);
    if (sep != std::string_view::npos) {
      out.push_back(piece.substr(0, sep));
      break;
    }
    out.push_back(piece);
  }
  return out;
}

std::optional<std::size_t> forbidden_target_prefix(std::string_view source) {
  auto sep = source.find(kSeparator);
  if (sep == std::string_view::npos) return std::nullopt;
  std::size_t pos = sep + kSeparator.size();
  for (;;) {
    while (pos < source.size() && std::string_view(" \t\r\n").find(source[pos]) !=
                                      std::string_view::npos) {
      ++pos;
    }
    if (source.substr(pos, 2) != "{%") break;
    auto close = source.find("%}", pos + 2);
    if (close == std::string_view::npos) return std::nullopt;
    pos = close + 2;
  }
  for (auto prefix : kForbiddenTargetPrefixes) {
    if (starts_with_ci(source.substr(pos), prefix)) return pos;
  }
  return std::nullopt;
}

std::optional<std::size_t> nested_choice(const TemplateAst& ast) {
  std::optional<std::size_t> found;
  visit_exprs(ast.nodes, [&](const Expr& e) {
    if (found || e.kind != Expr::Kind::Call) return;
    for (const auto& arg : e.args) {
      visit_exprs(arg, [&](const Expr& inner) {
        if (!found && inner.kind == Expr::Kind::Call) found = inner.offset;
      });
    }
  });
  return found;
}

struct SampleOutcome {
  std::size_t renders = 0;
  std::size_t skipped = 0;
  std::optional<LintFinding> failure;
};

SampleOutcome run_samples(const Prompt& prompt, const TemplateAst& ast,
                          const std::optional<TemplateAst>& choices_ast,
                          std::span<const ExampleRecord> samples) {
  SampleOutcome outcome;
  const std::size_t n = std::min(samples.size(), kLintSampleLimit);
  for (std::size_t i = 0; i < n && !outcome.failure; ++i) {
    const ExampleRecord& rec = samples[i];
    try {
      RenderContext ctx{&rec.fields, std::nullopt, ChoiceResolver::recording()};
      if (choices_ast) ctx.answer_choices = parse_answer_choices(*choices_ast, rec.fields);
      try {
        for_each_choice_path(ast, ctx, CrossProduct{}.max_variants,
                             [&](const std::string& text, const std::vector<std::size_t>&) {
                               ++outcome.renders;
                               if (!split_separator(text)) ++outcome.skipped;
                             });
      } catch (const RenderError& err) {
        if (err.code() != "VariantLimitExceeded") throw;
      }
    } catch (const Error& err) {
      outcome.failure = LintFinding{"L002", Severity::Error, prompt.metadata.name,
                                    "render failed on sample example " +
                                        std::to_string(rec.ordinal) + " (" + err.code() +
                                        "): " + err.what(),
                                    err.offset()};
    }
  }
  return outcome;
}

}  // namespace

std::string_view severity_name(Severity severity) {
  return severity == Severity::Error ? "ERROR" : "WARNING";
}

std::vector<LintFinding> lint_prompt(const Prompt& prompt,
                                     std::span<const ExampleRecord> samples) {
  std::vector<LintFinding> findings;
  const std::string& name = prompt.metadata.name;
  auto add = [&](std::string rule, Severity sev, std::string message,
                 std::optional<std::size_t> location = std::nullopt) {
    findings.push_back({std::move(rule), sev, name, std::move(message), location});
  };

  if (prompt.metadata.choices_in_prompt && !prompt.answer_choices) {
    add("L003", Severity::Error,
        "choices_in_prompt is set but the prompt declares no answer choices");
  }
  if (trim(name).empty()) add("L004", Severity::Error, "prompt name is blank");
  if (prompt.metadata.metrics.empty()) {
    add("L006", Severity::Warning, "no evaluation metrics listed");
  }

  std::optional<TemplateAst> ast;
  std::optional<TemplateAst> choices_ast;
  try {
    ast = parse(prompt.template_source);
  } catch (const TemplateError& err) {
    add("L001", Severity::Error, std::string("template does not parse: ") + err.what(),
        err.offset());
  }
  if (prompt.answer_choices) {
    try {
      choices_ast = parse(*prompt.answer_choices);
    } catch (const TemplateError& err) {
      add("L001", Severity::Error,
          std::string("answer choices do not parse: ") + err.what(), err.offset());
    }
  }

  if (ast && (choices_ast || !prompt.answer_choices)) {
    if (auto at = forbidden_target_prefix(prompt.template_source)) {
      add("L005", Severity::Warning,
          "target should contain only the answer; move lead-in text such as "
          "\"The answer is\" to the input",
          at);
    }
    bool wording = false;
    for (auto piece : input_literals(*ast)) {
      if (has_letter_run(piece, 3)) {
        wording = true;
        break;
      }
    }
    if (!wording) {
      add("L007", Severity::Warning,
          "input has no literal wording; prompts must be phrased in natural language");
    }
    if (prompt.template_source.find(kSeparator) == std::string::npos) {
      add("L009", Severity::Warning, "template has no '|||' separator; the target is always empty");
    }
    if (auto at = nested_choice(*ast)) {
      add("L010", Severity::Warning, "choice() is nested inside another choice() list", at);
    }
    if (!samples.empty()) {
      SampleOutcome outcome = run_samples(prompt, *ast, choices_ast, samples);
      if (outcome.failure) {
        findings.push_back(std::move(*outcome.failure));
      } else if (outcome.renders > 0 && outcome.skipped == outcome.renders) {
        add("L008", Severity::Warning,
            "every sampled render was empty; the prompt never applies to these examples");
      }
    }
  }

  std::stable_sort(findings.begin(), findings.end(),
                   [](const LintFinding& a, const LintFinding& b) { return a.rule < b.rule; });
  return findings;
}

std::vector<LintFinding> lint_collection(const PromptCollection& collection,
                                         std::span<const ExampleRecord> samples) {
  std::vector<LintFinding> findings;
  for (const auto& prompt : collection.prompts) {
    auto own = lint_prompt(prompt, samples);
    findings.insert(findings.end(), std::make_move_iterator(own.begin()),
                    std::make_move_iterator(own.end()));
  }
  const std::string key = collection.key.str();
  std::vector<LintFinding> tail;
  if (collection.prompts.size() < kRecommendedMinPrompts) {
    tail.push_back({"C001", Severity::Warning, std::nullopt,
                    key + " has " + std::to_string(collection.prompts.size()) +
                        " prompt(s); aim for at least " +
                        std::to_string(kRecommendedMinPrompts),
                    std::nullopt});
  }
  std::vector<std::string> seen;
  std::vector<std::string> reported;
  for (const auto& p : collection.prompts) {
    const std::string& n = p.metadata.name;
    if (std::find(seen.begin(), seen.end(), n) != seen.end()) {
      if (std::find(reported.begin(), reported.end(), n) == reported.end()) {
        tail.push_back({"C002", Severity::Error, n,
                        key + ": prompt name '" + n + "' is used more than once",
                        std::nullopt});
        reported.push_back(n);
      }
    } else {
      seen.push_back(n);
    }
  }
  const bool any_original = std::any_of(collection.prompts.begin(), collection.prompts.end(),
                                        [](const Prompt& p) { return p.metadata.original_task; });
  if (!any_original) {
    tail.push_back({"C003", Severity::Warning, std::nullopt,
                    key + " has no prompt for the original task", std::nullopt});
  }
  findings.insert(findings.end(), tail.begin(), tail.end());
  return findings;
}

bool has_errors(std::span<const LintFinding> findings) {
  return std::any_of(findings.begin(), findings.end(),
                     [](const LintFinding& f) { return f.severity == Severity::Error; });
}

nlohmann::ordered_json to_json(const LintFinding& f) {
  nlohmann::ordered_json o = nlohmann::ordered_json::object();
  o["rule"] = f.rule;
  o["severity"] = severity_name(f.severity);
  if (f.prompt_name) {
    o["prompt_name"] = *f.prompt_name;
  } else {
    o["prompt_name"] = nullptr;
  }
  o["message"] = f.message;
  return o;
}

std::string to_json_line(const LintFinding& f) {
  return to_json(f).dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

}  // namespace promptlab
