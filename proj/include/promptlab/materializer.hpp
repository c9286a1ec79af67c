// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "promptlab/prompt.hpp"

namespace promptlab {

struct ExampleRecord {
  std::uint64_t ordinal = 0;  // 0-based among non-blank lines
  Value fields;               // always a JSON object
  std::size_t line = 0;       // 1-based physical line
};

/// Streams records from JSON Lines input, one object per line. Blank lines
/// are ignored. A malformed line throws DataError(ParseError) unless the
/// reader is lenient, in which case it is counted and skipped (it still
/// consumes an ordinal).
class JsonlReader {
 public:
  explicit JsonlReader(std::istream& in, bool lenient = false);

  /// Throws DataError when the file cannot be opened (line 0).
  static JsonlReader open(const std::filesystem::path& path, bool lenient = false);

  std::optional<ExampleRecord> next();

  std::size_t malformed_lines() const noexcept { return malformed_; }

 private:
  JsonlReader(std::unique_ptr<std::istream> owned, bool lenient);

  std::unique_ptr<std::istream> owned_;
  std::istream* in_;
  bool lenient_;
  std::size_t line_ = 0;
  std::uint64_t ordinal_ = 0;
  std::size_t malformed_ = 0;
};

/// Reads up to `limit` records from a JSONL file.
std::vector<ExampleRecord> read_examples(const std::filesystem::path& path,
                                         std::size_t limit = SIZE_MAX);

struct MaterializeOptions {
  ChoiceStrategy strategy = SeededRandom{0};
  std::size_t workers = 1;
  bool fail_fast = false;      // first render error aborts the run
  std::size_t batch_size = 1024;
};

struct ErrorSample {
  std::string prompt_id;
  std::uint64_t example_ordinal = 0;
  std::string message;
  bool operator==(const ErrorSample&) const = default;
};

/// Per-prompt accounting: every attempted render is emitted or skipped,
/// and every failing (prompt, example) pair counts once as errored.
struct PromptCounters {
  std::string prompt_id;
  std::uint64_t attempted = 0;
  std::uint64_t emitted = 0;
  std::uint64_t skipped_empty = 0;
  std::uint64_t errored = 0;
  bool operator==(const PromptCounters&) const = default;
};

struct MaterializeReport {
  static constexpr std::size_t kMaxErrorSamples = 10;

  std::uint64_t examples_read = 0;
  std::uint64_t emitted = 0;
  std::uint64_t skipped_empty = 0;
  std::uint64_t errored = 0;
  std::uint64_t malformed_lines = 0;
  std::vector<ErrorSample> first_errors;
  std::vector<PromptCounters> per_prompt;

  nlohmann::ordered_json to_json() const;
  bool operator==(const MaterializeReport&) const = default;
};

/// One output line (without the trailing newline), keys in wire order.
std::string to_jsonl_line(const PromptedExample& example, std::string_view prompt_name);

/// Applies every prompt to every record and writes prompted examples as
/// JSON Lines in (example, prompt, variant) order, independent of the
/// worker count. Render errors are tallied in the report; with
/// `fail_fast` the first one (in output order) is rethrown as ApplyError.
/// A failing sink throws Error(IoError).
MaterializeReport materialize(JsonlReader& examples, std::span<const CompiledPrompt> prompts,
                              const MaterializeOptions& options, std::ostream& out);

}  // namespace promptlab
