// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for the unit and acceptance tests: scratch directories,
// prompt builders, random collection generators and a subprocess runner.

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "promptlab/materializer.hpp"
#include "promptlab/store.hpp"

namespace promptlab::testing {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// A valid prompt with a deterministic id derived from `name`.
Prompt make_prompt(const std::string& name, const std::string& source,
                   std::optional<std::string> answer_choices = std::nullopt);

/// Random but valid collection: unique names and ids, parseable templates,
/// awkward strings (quotes, unicode, control characters) in free text.
PromptCollection random_collection(std::mt19937_64& rng, const DatasetKey& key);

/// Examples used as lint samples by the rule fixtures.
std::vector<ExampleRecord> lint_samples();

/// One prompt per prompt-level rule, each violating only that rule when
/// linted against `lint_samples()`.
struct PromptFixture {
  std::string rule;
  Prompt prompt;
};
std::vector<PromptFixture> prompt_rule_fixtures();

/// One collection per collection-level rule, each clean apart from it.
struct CollectionFixture {
  std::string rule;
  PromptCollection collection;
};
std::vector<CollectionFixture> collection_rule_fixtures();

/// A collection of `n` distinct prompts with no findings at all.
PromptCollection clean_collection(const DatasetKey& key, std::size_t n);

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout only
};

/// Runs a shell command, capturing stdout. stderr is discarded.
CommandResult run_command(const std::string& command);

std::string shell_quote(const std::string& arg);

}  // namespace promptlab::testing
