// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "promptlab/prompt.hpp"

namespace promptlab {

/// Identifies one prompt collection: `dataset` or `dataset/subset`, each
/// part matching [a-z0-9_]+.
struct DatasetKey {
  std::string dataset;
  std::optional<std::string> subset;

  /// Throws StoreError(InvalidKey).
  static DatasetKey parse(std::string_view text);

  std::string str() const;
  std::filesystem::path relative_dir() const;

  auto operator<=>(const DatasetKey&) const = default;
  bool operator==(const DatasetKey&) const = default;
};

bool is_valid_key_part(std::string_view part);

struct PromptCollection {
  DatasetKey key;
  std::vector<Prompt> prompts;

  const Prompt* find_by_name(std::string_view name) const;
  const Prompt* find_by_id(std::string_view id) const;

  bool operator==(const PromptCollection&) const = default;
};

/// One prompt as a JSON object with keys in canonical order.
nlohmann::ordered_json prompt_to_json(const Prompt& prompt);

/// Reads one prompt object. Type errors throw StoreError(SchemaError) whose
/// message names the JSON pointer (`pointer` is the object's own pointer).
Prompt prompt_from_json(const nlohmann::json& object, const std::string& pointer);

/// Canonical file text: 2-space indent, canonical key order, UTF-8,
/// trailing newline.
std::string serialize_collection(const PromptCollection& collection);

/// Parses file text. With `strict`, also enforces the collection
/// invariants (unique ids and names, prompt invariants, key match).
PromptCollection parse_collection(std::string_view text, bool strict,
                                  const std::optional<DatasetKey>& expected_key = {});

std::filesystem::path collection_path(const std::filesystem::path& root,
                                      const DatasetKey& key);

/// Loads and fully validates <root>/<dataset>[/<subset>]/prompts.json.
/// Throws StoreError: NotFound, SchemaError, TemplateError.
PromptCollection load_collection(const std::filesystem::path& root, const DatasetKey& key);

/// Loads a collection checking only its JSON shape, so review tooling can
/// report invariant violations as findings instead of failing to load.
PromptCollection read_collection(const std::filesystem::path& root, const DatasetKey& key);

/// Atomically writes the canonical file (temp file + rename), creating
/// directories as needed. Throws StoreError(IoError) naming the path.
void save_collection(const std::filesystem::path& root, const PromptCollection& collection);

void write_file_atomic(const std::filesystem::path& path, std::string_view data);

/// Replaces the prompt with the same id in place, or appends it. Throws
/// StoreError(DuplicateName) when another prompt already uses its name.
PromptCollection upsert_prompt(PromptCollection collection, Prompt prompt);

/// Every collection key under `root`, sorted.
std::vector<DatasetKey> discover_collections(const std::filesystem::path& root);

/// A non-negative decimal with one fractional digit, stored in tenths.
struct Decimal1 {
  std::uint64_t tenths = 0;

  std::string str() const;
  double value() const { return static_cast<double>(tenths) / 10.0; }
  bool operator==(const Decimal1&) const = default;
};

/// numerator / denominator rounded half-up to one decimal; 0.0 when the
/// denominator is zero.
Decimal1 mean_one_decimal(std::uint64_t numerator, std::uint64_t denominator);

struct StoreStats {
  std::uint64_t dataset_count = 0;
  std::uint64_t subset_count = 0;
  std::uint64_t prompt_count = 0;
  std::uint64_t original_task_prompt_count = 0;
  Decimal1 prompts_per_subset_mean;
  Decimal1 original_task_per_subset_mean;
  std::map<std::uint64_t, std::uint64_t> histogram;  // prompts -> subsets

  nlohmann::ordered_json to_json() const;
  bool operator==(const StoreStats&) const = default;
};

/// Each collection is one subset; collections sharing `dataset` form one
/// dataset.
StoreStats compute_stats(std::span<const PromptCollection> collections);

}  // namespace promptlab
