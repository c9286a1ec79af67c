// SPDX-License-Identifier: Apache-2.0

#include "promptlab/prompt.hpp"

#include <charconv>

#include "promptlab/parser.hpp"
#include "promptlab/render.hpp"

namespace promptlab {

namespace {

bool parse_u64(std::string_view text, std::uint64_t& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

[[noreturn]] void bad_strategy(std::string_view text) {
  throw PromptError("InvalidStrategy",
                    "invalid choice strategy '" + std::string(text) +
                        "' (expected seeded:<u64>, cross or fixed:<i,j,...>)");
}

ChoiceResolver resolver_for(const ChoiceStrategy& strategy,
                            std::uint64_t example_ordinal) {
  if (const auto* s = std::get_if<SeededRandom>(&strategy)) {
    return ChoiceResolver::seeded(s->seed, example_ordinal);
  }
  if (const auto* f = std::get_if<FixedPath>(&strategy)) {
    return ChoiceResolver::fixed(f->indices, f->pad_with_first);
  }
  return ChoiceResolver::recording();
}

}  // namespace

ChoiceStrategy parse_strategy(std::string_view text) {
  if (text == "cross") return CrossProduct{};
  if (text.starts_with("seeded:")) {
    std::uint64_t seed = 0;
    if (!parse_u64(text.substr(7), seed)) bad_strategy(text);
    return SeededRandom{seed};
  }
  if (text.starts_with("fixed:")) {
    FixedPath path;
    std::string_view rest = text.substr(6);
    while (!rest.empty()) {
      auto comma = rest.find(',');
      std::uint64_t index = 0;
      if (!parse_u64(rest.substr(0, comma), index)) bad_strategy(text);
      path.indices.push_back(static_cast<std::size_t>(index));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
      if (rest.empty()) bad_strategy(text);
    }
    return path;
  }
  bad_strategy(text);
}

bool is_uuid(std::string_view text) {
  if (text.size() != 36) return false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (i == 8 || i == 13 || i == 18 || i == 23) {
      if (c != '-') return false;
    } else if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) {
      return false;
    }
  }
  return true;
}

std::string make_uuid(std::mt19937_64& rng) {
  std::uint64_t hi = rng();
  std::uint64_t lo = rng();
  hi = (hi & ~0xF000ULL) | 0x4000ULL;                       // version 4
  lo = (lo & ~(0xC000ULL << 48)) | (0x8000ULL << 48);       // RFC 4122 variant
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(36);
  for (int i = 0; i < 32; ++i) {
    std::uint64_t word = i < 16 ? hi : lo;
    int shift = 60 - 4 * (i % 16);
    out += kHex[(word >> shift) & 0xF];
    if (i == 7 || i == 11 || i == 15 || i == 19) out += '-';
  }
  return out;
}

std::string make_uuid() {
  std::random_device rd;
  std::mt19937_64 rng((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
  return make_uuid(rng);
}

std::optional<Split> split_separator(std::string_view rendered) {
  if (trim(rendered).empty()) return std::nullopt;
  auto first = rendered.find(kSeparator);
  if (first == std::string_view::npos) {
    return Split{std::string(trim(rendered)), {}};
  }
  if (rendered.find(kSeparator, first + kSeparator.size()) != std::string_view::npos) {
    throw PromptError("MultipleSeparators",
                      "rendered prompt contains more than one '|||' separator");
  }
  return Split{std::string(trim(rendered.substr(0, first))),
               std::string(trim(rendered.substr(first + kSeparator.size())))};
}

std::vector<std::string> parse_answer_choices(const TemplateAst& ast,
                                              const Value& example) {
  RenderContext ctx{&example, std::nullopt, ChoiceResolver::fixed({}, true)};
  const std::string rendered = render(ast, ctx);
  std::vector<std::string> choices;
  std::string_view rest = rendered;
  for (;;) {
    auto sep = rest.find(kSeparator);
    auto piece = trim(rest.substr(0, sep));
    if (!piece.empty()) choices.emplace_back(piece);
    if (sep == std::string_view::npos) break;
    rest.remove_prefix(sep + kSeparator.size());
  }
  if (choices.empty()) {
    throw PromptError("EmptyChoices", "answer choices rendered to an empty list");
  }
  return choices;
}

void validate_prompt(const Prompt& prompt) {
  if (trim(prompt.metadata.name).empty()) {
    throw PromptError("InvalidPrompt", "prompt name must not be blank");
  }
  if (prompt.metadata.choices_in_prompt && !prompt.answer_choices) {
    throw PromptError("InvalidPrompt",
                      "prompt '" + prompt.metadata.name +
                          "' states its choices in the prompt but declares no answer choices");
  }
  for (const auto& m : prompt.metadata.metrics) {
    if (m.empty()) {
      throw PromptError("InvalidPrompt", "metric names must not be empty");
    }
  }
  parse(prompt.template_source);
  if (prompt.answer_choices) parse(*prompt.answer_choices);
}

CompiledPrompt::CompiledPrompt(Prompt prompt)
    : prompt_(std::move(prompt)), template_ast_(parse(prompt_.template_source)) {
  if (prompt_.answer_choices) answer_choices_ast_ = parse(*prompt_.answer_choices);
}

ApplyError::ApplyError(const Error& cause, std::string prompt_id,
                       std::uint64_t example_ordinal)
    : Error(cause.code(),
            "prompt " + prompt_id + ", example " + std::to_string(example_ordinal) +
                ": " + cause.what(),
            cause.offset()),
      prompt_id_(std::move(prompt_id)),
      example_ordinal_(example_ordinal) {}

ApplyResult apply_prompt_detailed(const CompiledPrompt& prompt, const Value& example,
                                  std::uint64_t example_ordinal,
                                  const ChoiceStrategy& strategy) {
  const std::string& id = prompt.prompt().id;
  ApplyResult result;
  try {
    RenderContext ctx{&example, std::nullopt, resolver_for(strategy, example_ordinal)};
    if (prompt.answer_choices_ast()) {
      ctx.answer_choices = parse_answer_choices(*prompt.answer_choices_ast(), example);
    }
    auto emit = [&](const std::string& rendered, std::uint64_t variant) {
      ++result.variants;
      auto split = split_separator(rendered);
      if (!split) {
        ++result.skipped;
        return;
      }
      result.emitted.push_back({std::move(split->input), std::move(split->target),
                                ctx.answer_choices, id, example_ordinal, variant});
    };
    if (const auto* cross = std::get_if<CrossProduct>(&strategy)) {
      // Collect first so that a failure in a later variant discards the
      // whole (prompt, example) pair.
      std::vector<std::string> renders;
      for_each_choice_path(prompt.template_ast(), ctx, cross->max_variants,
                           [&](const std::string& text, const std::vector<std::size_t>&) {
                             renders.push_back(text);
                           });
      for (std::size_t v = 0; v < renders.size(); ++v) emit(renders[v], v);
    } else {
      emit(render(prompt.template_ast(), ctx), 0);
    }
  } catch (const ApplyError&) {
    throw;
  } catch (const Error& err) {
    throw ApplyError(err, id, example_ordinal);
  }
  return result;
}

std::vector<PromptedExample> apply_prompt(const CompiledPrompt& prompt,
                                          const Value& example,
                                          std::uint64_t example_ordinal,
                                          const ChoiceStrategy& strategy) {
  return apply_prompt_detailed(prompt, example, example_ordinal, strategy).emitted;
}

}  // namespace promptlab
