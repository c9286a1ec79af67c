// SPDX-License-Identifier: Apache-2.0

#include "promptlab/service.hpp"

#include <charconv>
#include <fstream>
#include <set>

#include <httplib.h>

#include "promptlab/linter.hpp"
#include "promptlab/materializer.hpp"
#include "promptlab/store.hpp"

namespace promptlab {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::size_t kDefaultPageSize = 10;
constexpr std::size_t kMaxPageSize = 100;

ApiResponse json_response(int status, const ordered_json& body) {
  return {status, body.dump(-1, ' ', false, ordered_json::error_handler_t::replace), "application/json"};
}

ApiResponse error_response(int status, const std::string& code, const std::string& message,
                           std::optional<std::size_t> offset = std::nullopt) {
  ordered_json body = ordered_json::object();
  body["status"] = status;
  body["code"] = code;
  body["message"] = message;
  if (offset) {
    body["offset"] = *offset;
  } else {
    body["offset"] = nullptr;
  }
  return json_response(status, body);
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  while (!path.empty()) {
    auto slash = path.find('/');
    auto part = path.substr(0, slash);
    if (!part.empty()) parts.emplace_back(part);
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash + 1);
  }
  return parts;
}

std::string join_key(const std::vector<std::string>& parts, std::size_t begin, std::size_t end) {
  std::string key;
  for (std::size_t i = begin; i < end; ++i) {
    if (!key.empty()) key += '/';
    key += parts[i];
  }
  return key;
}

std::optional<std::size_t> parse_size(const std::string& text) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::uint64_t count_records(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::uint64_t n = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) ++n;
  }
  return n;
}

std::vector<DatasetKey> discover_data(const fs::path& data_root) {
  std::vector<DatasetKey> keys;
  std::error_code ec;
  if (!fs::is_directory(data_root, ec)) return keys;
  for (const auto& entry : fs::directory_iterator(data_root, ec)) {
    const auto& p = entry.path();
    if (entry.is_regular_file() && p.extension() == ".jsonl" &&
        is_valid_key_part(p.stem().string())) {
      keys.push_back({p.stem().string(), {}});
    } else if (entry.is_directory() && is_valid_key_part(p.filename().string())) {
      for (const auto& sub : fs::directory_iterator(p, ec)) {
        const auto& sp = sub.path();
        if (sub.is_regular_file() && sp.extension() == ".jsonl" &&
            is_valid_key_part(sp.stem().string())) {
          keys.push_back({p.filename().string(), sp.stem().string()});
        }
      }
    }
  }
  return keys;
}

}  // namespace

struct PromptService::Server {
  httplib::Server http;
};

PromptService::PromptService(fs::path prompts_root, fs::path data_root)
    : prompts_root_(std::move(prompts_root)), data_root_(std::move(data_root)) {}

PromptService::~PromptService() = default;

fs::path PromptService::data_file(const std::string& key) const {
  DatasetKey k = DatasetKey::parse(key);
  fs::path p = data_root_ / k.dataset;
  if (k.subset) {
    p /= *k.subset + ".jsonl";
  } else {
    p += ".jsonl";
  }
  return p;
}

ApiResponse PromptService::handle(const ApiRequest& request) {
  try {
    auto parts = split_path(request.path);
    if (parts.size() < 2 || parts[0] != "api") {
      return error_response(404, "NotFound", "no route for " + request.path);
    }
    const std::string& method = request.method;
    auto wrong_method = [&] {
      return error_response(405, "MethodNotAllowed",
                            method + " is not supported on " + request.path);
    };
    if (parts.size() == 2 && parts[1] == "datasets") {
      return method == "GET" ? list_datasets() : wrong_method();
    }
    if (parts.size() == 2 && parts[1] == "stats") {
      return method == "GET" ? stats() : wrong_method();
    }
    if (parts.size() == 2 && parts[1] == "render") {
      return method == "POST" ? render_preview(request.body) : wrong_method();
    }
    if (parts[1] == "datasets" && parts.size() >= 4) {
      const std::size_t n = parts.size();
      if (parts[n - 1] == "examples") {
        return method == "GET" ? list_examples(join_key(parts, 2, n - 1), request)
                               : wrong_method();
      }
      if (parts[n - 1] == "prompts") {
        return method == "GET" ? list_prompts(join_key(parts, 2, n - 1)) : wrong_method();
      }
      if (n >= 5 && parts[n - 2] == "prompts") {
        const std::string key = join_key(parts, 2, n - 2);
        if (method == "GET") return get_prompt(key, parts[n - 1]);
        if (method == "PUT") return put_prompt(key, parts[n - 1], request.body);
        return wrong_method();
      }
    }
    return error_response(404, "NotFound", "no route for " + request.path);
  } catch (const StoreError& err) {
    if (err.code() == "InvalidKey") return error_response(400, err.code(), err.what());
    if (err.code() == "NotFound") return error_response(404, err.code(), err.what());
    if (err.code() == "DuplicateName") return error_response(409, err.code(), err.what());
    return error_response(500, err.code(), err.what(), err.offset());
  } catch (const Error& err) {
    return error_response(500, err.code(), err.what(), err.offset());
  } catch (const std::exception& err) {
    return error_response(500, "InternalError", err.what());
  }
}

ApiResponse PromptService::list_datasets() {
  std::set<DatasetKey> keys;
  std::error_code ec;
  if (fs::is_directory(prompts_root_, ec)) {
    for (auto& k : discover_collections(prompts_root_)) keys.insert(k);
  }
  for (auto& k : discover_data(data_root_)) keys.insert(k);

  ordered_json out = ordered_json::array();
  for (const auto& key : keys) {
    std::uint64_t prompts = 0;
    std::uint64_t original = 0;
    if (fs::is_regular_file(collection_path(prompts_root_, key))) {
      auto c = load_collection(prompts_root_, key);
      prompts = c.prompts.size();
      for (const auto& p : c.prompts) original += p.metadata.original_task ? 1 : 0;
    }
    const fs::path data = data_file(key.str());
    ordered_json entry = ordered_json::object();
    entry["key"] = key.str();
    entry["prompt_count"] = prompts;
    entry["original_task_count"] = original;
    entry["example_count"] = fs::is_regular_file(data) ? count_records(data) : 0;
    out.push_back(std::move(entry));
  }
  return json_response(200, out);
}

ApiResponse PromptService::list_examples(const std::string& key, const ApiRequest& request) {
  std::size_t offset = 0;
  std::size_t limit = kDefaultPageSize;
  if (auto it = request.query.find("offset"); it != request.query.end()) {
    auto v = parse_size(it->second);
    if (!v) return error_response(400, "BadRequest", "offset must be a non-negative integer");
    offset = *v;
  }
  if (auto it = request.query.find("limit"); it != request.query.end()) {
    auto v = parse_size(it->second);
    if (!v || *v == 0 || *v > kMaxPageSize) {
      return error_response(400, "BadRequest",
                            "limit must be an integer between 1 and " +
                                std::to_string(kMaxPageSize));
    }
    limit = *v;
  }
  const fs::path path = data_file(key);
  if (!fs::is_regular_file(path)) {
    return error_response(404, "NotFound", "no examples registered for '" + key + "'");
  }
  auto reader = JsonlReader::open(path);
  ordered_json examples = ordered_json::array();
  while (examples.size() < limit) {
    auto rec = reader.next();
    if (!rec) break;
    if (rec->ordinal < offset) continue;
    ordered_json item = ordered_json::object();
    item["ordinal"] = rec->ordinal;
    item["fields"] = rec->fields;
    examples.push_back(std::move(item));
  }
  ordered_json out = ordered_json::object();
  out["key"] = key;
  out["offset"] = offset;
  out["limit"] = limit;
  out["examples"] = std::move(examples);
  return json_response(200, out);
}

ApiResponse PromptService::list_prompts(const std::string& key) {
  DatasetKey k = DatasetKey::parse(key);
  ordered_json prompts = ordered_json::array();
  if (fs::is_regular_file(collection_path(prompts_root_, k))) {
    for (const auto& p : load_collection(prompts_root_, k).prompts) {
      prompts.push_back(prompt_to_json(p));
    }
  } else if (!fs::is_regular_file(data_file(key))) {
    return error_response(404, "NotFound", "unknown dataset '" + key + "'");
  }
  ordered_json out = ordered_json::object();
  out["key"] = k.str();
  out["prompts"] = std::move(prompts);
  return json_response(200, out);
}

ApiResponse PromptService::get_prompt(const std::string& key, const std::string& id) {
  auto collection = load_collection(prompts_root_, DatasetKey::parse(key));
  const Prompt* p = collection.find_by_id(id);
  if (p == nullptr) {
    return error_response(404, "NotFound", "no prompt " + id + " in '" + key + "'");
  }
  return json_response(200, prompt_to_json(*p));
}

ApiResponse PromptService::put_prompt(const std::string& key, const std::string& id,
                                      const std::string& body) {
  const DatasetKey k = DatasetKey::parse(key);
  if (!is_uuid(id)) {
    return error_response(400, "BadRequest", "prompt id must be a lowercase UUID");
  }
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    return error_response(400, "BadRequest", "request body must be a JSON object");
  }
  if (!parsed.contains("id")) parsed["id"] = id;
  Prompt prompt;
  try {
    prompt = prompt_from_json(parsed, "");
  } catch (const StoreError& err) {
    return error_response(400, "BadRequest", err.what());
  }
  if (prompt.id != id) {
    return error_response(400, "BadRequest", "body id does not match the URL");
  }
  try {
    validate_prompt(prompt);
  } catch (const Error& err) {
    return error_response(422, err.code(), err.what(), err.offset());
  }

  {
    std::lock_guard lock(write_mutex_);
    PromptCollection collection{k, {}};
    if (fs::is_regular_file(collection_path(prompts_root_, k))) {
      collection = load_collection(prompts_root_, k);
    }
    collection = upsert_prompt(std::move(collection), prompt);
    save_collection(prompts_root_, collection);
  }

  std::vector<ExampleRecord> samples;
  const fs::path data = data_file(key);
  if (fs::is_regular_file(data)) samples = read_examples(data, kLintSampleLimit);
  ordered_json findings = ordered_json::array();
  for (const auto& f : lint_prompt(prompt, samples)) findings.push_back(to_json(f));

  ordered_json out = ordered_json::object();
  out["prompt"] = prompt_to_json(prompt);
  out["findings"] = std::move(findings);
  return json_response(200, out);
}

ApiResponse PromptService::render_preview(const std::string& body) {
  json req = json::parse(body, nullptr, false);
  if (req.is_discarded() || !req.is_object()) {
    return error_response(400, "BadRequest", "request body must be a JSON object");
  }
  auto tmpl = req.find("template");
  if (tmpl == req.end() || !tmpl->is_string()) {
    return error_response(400, "BadRequest", "'template' must be a string");
  }
  auto example = req.find("example");
  if (example == req.end() || !example->is_object()) {
    return error_response(400, "BadRequest", "'example' must be an object");
  }
  Prompt prompt;
  prompt.id = "preview";
  prompt.metadata.name = "preview";
  prompt.template_source = tmpl->get<std::string>();
  if (auto ac = req.find("answer_choices"); ac != req.end() && !ac->is_null()) {
    if (!ac->is_string()) {
      return error_response(400, "BadRequest", "'answer_choices' must be a string or null");
    }
    prompt.answer_choices = ac->get<std::string>();
  }
  ChoiceStrategy strategy = FixedPath{{}, true};
  if (auto s = req.find("strategy"); s != req.end() && !s->is_null()) {
    if (!s->is_string()) return error_response(400, "BadRequest", "'strategy' must be a string");
    try {
      strategy = parse_strategy(s->get<std::string>());
    } catch (const PromptError& err) {
      return error_response(400, err.code(), err.what());
    }
    if (std::holds_alternative<CrossProduct>(strategy)) {
      return error_response(400, "InvalidStrategy", "preview renders a single variant");
    }
  }
  std::uint64_t ordinal = 0;
  if (auto o = req.find("example_ordinal"); o != req.end()) {
    if (!o->is_number_unsigned()) {
      return error_response(400, "BadRequest", "'example_ordinal' must be a non-negative integer");
    }
    ordinal = o->get<std::uint64_t>();
  }

  try {
    CompiledPrompt compiled(std::move(prompt));
    auto result = apply_prompt(compiled, *example, ordinal, strategy);
    ordered_json out = ordered_json::object();
    if (result.empty()) {
      out["skipped"] = true;
      return json_response(200, out);
    }
    out["input"] = result.front().input;
    out["target"] = result.front().target;
    if (result.front().answer_choices) {
      out["answer_choices"] = *result.front().answer_choices;
    } else {
      out["answer_choices"] = nullptr;
    }
    return json_response(200, out);
  } catch (const Error& err) {
    std::string message = err.what();
    if (const auto* applied = dynamic_cast<const ApplyError*>(&err)) {
      // Drop the "prompt preview, example N:" prefix for the editor.
      auto colon = message.find(": ");
      if (colon != std::string::npos) message = message.substr(colon + 2);
      (void)applied;
    }
    return error_response(422, err.code(), message, err.offset());
  }
}

ApiResponse PromptService::stats() {
  std::vector<PromptCollection> collections;
  std::error_code ec;
  if (fs::is_directory(prompts_root_, ec)) {
    for (const auto& key : discover_collections(prompts_root_)) {
      collections.push_back(load_collection(prompts_root_, key));
    }
  }
  return json_response(200, compute_stats(collections).to_json());
}

// ---- HTTP transport --------------------------------------------------------

int PromptService::bind(const std::string& host, int port,
                        const std::optional<fs::path>& static_dir) {
  server_ = std::make_unique<Server>();
  auto& http = server_->http;
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest api{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) api.query.emplace(k, v);
    ApiResponse out = handle(api);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  http.Get(R"(/api/.*)", forward);
  http.Put(R"(/api/.*)", forward);
  http.Post(R"(/api/.*)", forward);
  if (static_dir && !http.set_mount_point("/", static_dir->string())) return -1;
  if (port == 0) return http.bind_to_any_port(host);
  return http.bind_to_port(host, port) ? port : -1;
}

bool PromptService::listen() {
  if (!server_) return false;
  return server_->http.listen_after_bind();
}

void PromptService::stop() {
  if (server_) server_->http.stop();
}

}  // namespace promptlab
