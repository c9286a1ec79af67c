// SPDX-License-Identifier: Apache-2.0

#include "promptlab/store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "promptlab/parser.hpp"

namespace promptlab {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kFileName = "prompts.json";

constexpr std::string_view kPromptKeys[] = {
    "id",      "name",      "reference",      "original_task", "choices_in_prompt",
    "metrics", "languages", "answer_choices", "template"};

[[noreturn]] void schema_error(const std::string& pointer, const std::string& what) {
  throw StoreError("SchemaError", pointer + ": " + what);
}

const json& require(const json& object, std::string_view key, const std::string& pointer) {
  auto it = object.find(std::string(key));
  if (it == object.end()) schema_error(pointer + "/" + std::string(key), "missing field");
  return *it;
}

std::string require_string(const json& object, std::string_view key,
                           const std::string& pointer) {
  const json& v = require(object, key, pointer);
  if (!v.is_string()) schema_error(pointer + "/" + std::string(key), "expected a string");
  return v.get<std::string>();
}

bool require_bool(const json& object, std::string_view key, const std::string& pointer) {
  const json& v = require(object, key, pointer);
  if (!v.is_boolean()) schema_error(pointer + "/" + std::string(key), "expected a boolean");
  return v.get<bool>();
}

std::vector<std::string> require_strings(const json& object, std::string_view key,
                                         const std::string& pointer) {
  const json& v = require(object, key, pointer);
  const std::string here = pointer + "/" + std::string(key);
  if (!v.is_array()) schema_error(here, "expected a list of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string()) schema_error(here + "/" + std::to_string(i), "expected a string");
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw StoreError("NotFound", "no prompt collection at " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError("IoError", "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw StoreError("IoError", "cannot read " + path.string());
  return buf.str();
}

void check_strict(const PromptCollection& c) {
  std::set<std::string> ids;
  std::set<std::string> names;
  for (std::size_t i = 0; i < c.prompts.size(); ++i) {
    const Prompt& p = c.prompts[i];
    const std::string pointer = "/prompts/" + std::to_string(i);
    if (!is_uuid(p.id)) schema_error(pointer + "/id", "not a lowercase UUID: '" + p.id + "'");
    if (!ids.insert(p.id).second) schema_error(pointer + "/id", "duplicate id '" + p.id + "'");
    if (!names.insert(p.metadata.name).second) {
      schema_error(pointer + "/name", "duplicate name '" + p.metadata.name + "'");
    }
    try {
      validate_prompt(p);
    } catch (const TemplateError& err) {
      throw StoreError("TemplateError",
                       "prompt '" + p.metadata.name + "': " + err.what(), err.offset());
    } catch (const PromptError& err) {
      schema_error(pointer, err.what());
    }
  }
}

}  // namespace

// ---- DatasetKey ------------------------------------------------------------

bool is_valid_key_part(std::string_view part) {
  if (part.empty()) return false;
  for (char c : part) {
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
  }
  return true;
}

DatasetKey DatasetKey::parse(std::string_view text) {
  DatasetKey key;
  auto slash = text.find('/');
  key.dataset = std::string(text.substr(0, slash));
  if (slash != std::string_view::npos) key.subset = std::string(text.substr(slash + 1));
  if (!is_valid_key_part(key.dataset) || (key.subset && !is_valid_key_part(*key.subset))) {
    throw StoreError("InvalidKey", "invalid dataset key '" + std::string(text) + "'");
  }
  return key;
}

std::string DatasetKey::str() const {
  return subset ? dataset + "/" + *subset : dataset;
}

fs::path DatasetKey::relative_dir() const {
  fs::path p(dataset);
  if (subset) p /= *subset;
  return p;
}

const Prompt* PromptCollection::find_by_name(std::string_view name) const {
  for (const auto& p : prompts) {
    if (p.metadata.name == name) return &p;
  }
  return nullptr;
}

const Prompt* PromptCollection::find_by_id(std::string_view id) const {
  for (const auto& p : prompts) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

// ---- JSON mapping ----------------------------------------------------------

ordered_json prompt_to_json(const Prompt& p) {
  ordered_json o = ordered_json::object();
  o["id"] = p.id;
  o["name"] = p.metadata.name;
  o["reference"] = p.metadata.reference;
  o["original_task"] = p.metadata.original_task;
  o["choices_in_prompt"] = p.metadata.choices_in_prompt;
  o["metrics"] = p.metadata.metrics;
  o["languages"] = p.metadata.languages;
  if (p.answer_choices) {
    o["answer_choices"] = *p.answer_choices;
  } else {
    o["answer_choices"] = nullptr;
  }
  o["template"] = p.template_source;
  return o;
}

Prompt prompt_from_json(const json& object, const std::string& pointer) {
  if (!object.is_object()) schema_error(pointer, "expected an object");
  for (const auto& [key, _] : object.items()) {
    if (std::find(std::begin(kPromptKeys), std::end(kPromptKeys), key) ==
        std::end(kPromptKeys)) {
      schema_error(pointer + "/" + key, "unknown field");
    }
  }
  Prompt p;
  p.id = require_string(object, "id", pointer);
  p.metadata.name = require_string(object, "name", pointer);
  p.metadata.reference = require_string(object, "reference", pointer);
  p.metadata.original_task = require_bool(object, "original_task", pointer);
  p.metadata.choices_in_prompt = require_bool(object, "choices_in_prompt", pointer);
  p.metadata.metrics = require_strings(object, "metrics", pointer);
  p.metadata.languages = require_strings(object, "languages", pointer);
  const json& choices = require(object, "answer_choices", pointer);
  if (choices.is_string()) {
    p.answer_choices = choices.get<std::string>();
  } else if (!choices.is_null()) {
    schema_error(pointer + "/answer_choices", "expected a string or null");
  }
  p.template_source = require_string(object, "template", pointer);
  return p;
}

std::string serialize_collection(const PromptCollection& c) {
  ordered_json doc = ordered_json::object();
  doc["dataset"] = c.key.dataset;
  if (c.key.subset) {
    doc["subset"] = *c.key.subset;
  } else {
    doc["subset"] = nullptr;
  }
  doc["prompts"] = ordered_json::array();
  for (const auto& p : c.prompts) doc["prompts"].push_back(prompt_to_json(p));
  try {
    return doc.dump(2) + "\n";
  } catch (const json::type_error& err) {
    throw StoreError("SchemaError", std::string("collection is not valid UTF-8: ") + err.what());
  }
}

PromptCollection parse_collection(std::string_view text, bool strict,
                                  const std::optional<DatasetKey>& expected_key) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& err) {
    schema_error("", std::string("invalid JSON: ") + err.what());
  }
  if (!doc.is_object()) schema_error("", "expected an object");
  PromptCollection c;
  c.key.dataset = require_string(doc, "dataset", "");
  if (!is_valid_key_part(c.key.dataset)) schema_error("/dataset", "invalid dataset name");
  const json& subset = require(doc, "subset", "");
  if (subset.is_string()) {
    c.key.subset = subset.get<std::string>();
    if (!is_valid_key_part(*c.key.subset)) schema_error("/subset", "invalid subset name");
  } else if (!subset.is_null()) {
    schema_error("/subset", "expected a string or null");
  }
  if (expected_key && c.key != *expected_key) {
    schema_error("/dataset", "file declares '" + c.key.str() + "' but lives under '" +
                                 expected_key->str() + "'");
  }
  const json& prompts = require(doc, "prompts", "");
  if (!prompts.is_array()) schema_error("/prompts", "expected a list");
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    c.prompts.push_back(prompt_from_json(prompts[i], "/prompts/" + std::to_string(i)));
  }
  if (strict) check_strict(c);
  return c;
}

fs::path collection_path(const fs::path& root, const DatasetKey& key) {
  return root / key.relative_dir() / kFileName;
}

PromptCollection load_collection(const fs::path& root, const DatasetKey& key) {
  const fs::path path = collection_path(root, key);
  const std::string text = read_file(path);
  try {
    return parse_collection(text, true, key);
  } catch (const StoreError& err) {
    throw StoreError(err.code(), path.string() + ": " + err.what(), err.offset());
  }
}

PromptCollection read_collection(const fs::path& root, const DatasetKey& key) {
  const fs::path path = collection_path(root, key);
  const std::string text = read_file(path);
  try {
    return parse_collection(text, false, key);
  } catch (const StoreError& err) {
    throw StoreError(err.code(), path.string() + ": " + err.what(), err.offset());
  }
}

void write_file_atomic(const fs::path& path, std::string_view data) {
  static std::atomic<std::uint64_t> counter{0};
  auto io_error = [&](const std::string& what) -> StoreError {
    return StoreError("IoError", what + " " + path.string() + ": " + std::strerror(errno));
  };
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
      throw StoreError("IoError",
                       "cannot create directory for " + path.string() + ": " + ec.message());
    }
  }
  const std::string tmp = path.string() + ".tmp-" + std::to_string(::getpid()) + "-" +
                          std::to_string(counter.fetch_add(1));
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw io_error("cannot create temporary file for");
  std::size_t written = 0;
  while (written < data.size()) {
    ssize_t n = ::write(fd, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      auto err = io_error("cannot write");
      ::close(fd);
      ::unlink(tmp.c_str());
      throw err;
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) {
    auto err = io_error("cannot flush");
    ::unlink(tmp.c_str());
    throw err;
  }
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    auto err = io_error("cannot replace");
    ::unlink(tmp.c_str());
    throw err;
  }
}

void save_collection(const fs::path& root, const PromptCollection& collection) {
  write_file_atomic(collection_path(root, collection.key), serialize_collection(collection));
}

PromptCollection upsert_prompt(PromptCollection collection, Prompt prompt) {
  for (const auto& other : collection.prompts) {
    if (other.id != prompt.id && other.metadata.name == prompt.metadata.name) {
      throw StoreError("DuplicateName", "a prompt named '" + prompt.metadata.name +
                                            "' already exists in " + collection.key.str());
    }
  }
  for (auto& existing : collection.prompts) {
    if (existing.id == prompt.id) {
      existing = std::move(prompt);
      return collection;
    }
  }
  collection.prompts.push_back(std::move(prompt));
  return collection;
}

std::vector<DatasetKey> discover_collections(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw StoreError("NotFound", "prompts root " + root.string() + " is not a directory");
  }
  std::vector<DatasetKey> keys;
  for (const auto& entry : fs::directory_iterator(root, ec)) {
    if (!entry.is_directory()) continue;
    const std::string dataset = entry.path().filename().string();
    if (!is_valid_key_part(dataset)) continue;
    if (fs::is_regular_file(entry.path() / kFileName)) keys.push_back({dataset, {}});
    for (const auto& sub : fs::directory_iterator(entry.path(), ec)) {
      if (!sub.is_directory()) continue;
      const std::string subset = sub.path().filename().string();
      if (is_valid_key_part(subset) && fs::is_regular_file(sub.path() / kFileName)) {
        keys.push_back({dataset, subset});
      }
    }
  }
  if (ec) throw StoreError("IoError", "cannot list " + root.string() + ": " + ec.message());
  std::sort(keys.begin(), keys.end());
  return keys;
}

// ---- statistics ------------------------------------------------------------

std::string Decimal1::str() const {
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

Decimal1 mean_one_decimal(std::uint64_t numerator, std::uint64_t denominator) {
  if (denominator == 0) return {};
  // floor(10 n / d + 1/2) == floor((20 n + d) / (2 d))
  return {(20 * numerator + denominator) / (2 * denominator)};
}

ordered_json StoreStats::to_json() const {
  ordered_json o = ordered_json::object();
  o["dataset_count"] = dataset_count;
  o["subset_count"] = subset_count;
  o["prompt_count"] = prompt_count;
  o["original_task_prompt_count"] = original_task_prompt_count;
  o["prompts_per_subset_mean"] = prompts_per_subset_mean.value();
  o["original_task_per_subset_mean"] = original_task_per_subset_mean.value();
  ordered_json hist = ordered_json::object();
  for (const auto& [prompts, subsets] : histogram) hist[std::to_string(prompts)] = subsets;
  o["histogram"] = std::move(hist);
  return o;
}

StoreStats compute_stats(std::span<const PromptCollection> collections) {
  StoreStats s;
  std::set<std::string> datasets;
  for (const auto& c : collections) {
    datasets.insert(c.key.dataset);
    ++s.subset_count;
    const std::uint64_t n = c.prompts.size();
    s.prompt_count += n;
    for (const auto& p : c.prompts) {
      if (p.metadata.original_task) ++s.original_task_prompt_count;
    }
    ++s.histogram[n];
  }
  s.dataset_count = datasets.size();
  s.prompts_per_subset_mean = mean_one_decimal(s.prompt_count, s.subset_count);
  s.original_task_per_subset_mean =
      mean_one_decimal(s.original_task_prompt_count, s.subset_count);
  return s;
}

}  // namespace promptlab
