// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace promptlab {

struct ApiRequest {
  std::string method;  // GET, PUT, POST
  std::string path;    // decoded, without the query string
  std::map<std::string, std::string> query;
  std::string body;
};

/// Every non-2xx body is {"status","code","message","offset"} with offset
/// null unless the error points into a template.
struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// JSON API over a prompts root (collections) and a data root
/// (<dataset>.jsonl or <dataset>/<subset>.jsonl example files):
///
///   GET  /api/datasets
///   GET  /api/datasets/{key}/examples?offset&limit
///   GET  /api/datasets/{key}/prompts
///   GET  /api/datasets/{key}/prompts/{id}
///   PUT  /api/datasets/{key}/prompts/{id}
///   POST /api/render
///   GET  /api/stats
///
/// `handle` is usable without a socket; `bind`/`listen` expose it over
/// HTTP/1.1 and optionally serve a static bundle under /.
class PromptService {
 public:
  PromptService(std::filesystem::path prompts_root, std::filesystem::path data_root);
  ~PromptService();

  PromptService(const PromptService&) = delete;
  PromptService& operator=(const PromptService&) = delete;

  ApiResponse handle(const ApiRequest& request);

  /// Binds the listener; port 0 picks a free port. Returns the bound port,
  /// or -1 on failure.
  int bind(const std::string& host, int port,
           const std::optional<std::filesystem::path>& static_dir = std::nullopt);

  /// Serves until stop(). Returns false if the listener failed.
  bool listen();
  void stop();

 private:
  struct Server;

  ApiResponse list_datasets();
  ApiResponse list_examples(const std::string& key, const ApiRequest& request);
  ApiResponse list_prompts(const std::string& key);
  ApiResponse get_prompt(const std::string& key, const std::string& id);
  ApiResponse put_prompt(const std::string& key, const std::string& id, const std::string& body);
  ApiResponse render_preview(const std::string& body);
  ApiResponse stats();

  std::filesystem::path data_file(const std::string& key) const;

  std::filesystem::path prompts_root_;
  std::filesystem::path data_root_;
  std::mutex write_mutex_;
  std::unique_ptr<Server> server_;
};

}  // namespace promptlab
