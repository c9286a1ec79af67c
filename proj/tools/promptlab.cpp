// SPDX-License-Identifier: Apache-2.0
//
// promptlab: apply prompt collections to JSONL data, lint them, report
// store statistics, or serve the editing API.

#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "promptlab/linter.hpp"
#include "promptlab/materializer.hpp"
#include "promptlab/service.hpp"
#include "promptlab/store.hpp"

namespace fs = std::filesystem;
using namespace promptlab;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kLint = 2, kIo = 3, kRender = 4 };

struct ApplyArgs {
  std::string prompts;
  std::string dataset;
  std::string data;
  std::string out;
  std::string strategy;
  std::optional<std::string> prompt_name;
  bool fail_fast = false;
  std::optional<std::size_t> max_variants;
  std::size_t workers = 1;
  bool lenient = false;
};

int run_apply(const ApplyArgs& args) {
  ChoiceStrategy strategy;
  try {
    strategy = parse_strategy(args.strategy);
  } catch (const PromptError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kUsage;
  }
  if (args.max_variants) {
    auto* cross = std::get_if<CrossProduct>(&strategy);
    if (cross == nullptr) {
      std::cerr << "error: --max-variants only applies to --strategy cross\n";
      return kUsage;
    }
    cross->max_variants = *args.max_variants;
  }

  PromptCollection collection;
  try {
    collection = load_collection(args.prompts, DatasetKey::parse(args.dataset));
  } catch (const StoreError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return err.code() == "InvalidKey" ? kUsage : kIo;
  }
  std::vector<CompiledPrompt> compiled;
  for (auto& p : collection.prompts) {
    if (args.prompt_name && p.metadata.name != *args.prompt_name) continue;
    compiled.emplace_back(std::move(p));
  }
  if (args.prompt_name && compiled.empty()) {
    std::cerr << "error: no prompt named '" << *args.prompt_name << "' in " << args.dataset
              << "\n";
    return kUsage;
  }

  // Write beside the destination and rename at the end so a failed run
  // never leaves a truncated output behind.
  const fs::path out_path(args.out);
  fs::path tmp = out_path;
  tmp += ".partial";
  try {
    auto reader = JsonlReader::open(args.data, args.lenient);
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", "cannot write " + tmp.string());
    MaterializeOptions options{strategy, std::max<std::size_t>(1, args.workers), args.fail_fast};
    MaterializeReport report = materialize(reader, compiled, options, out);
    out.close();
    if (!out) throw Error("IoError", "cannot write " + tmp.string());
    fs::rename(tmp, out_path);
    std::cerr << report.to_json().dump() << "\n";
    return kOk;
  } catch (const ApplyError& err) {
    std::error_code ec;
    fs::remove(tmp, ec);
    std::cerr << "error: prompt " << err.prompt_id() << ", example " << err.example_ordinal()
              << ": " << err.what() << "\n";
    return kRender;
  } catch (const std::exception& err) {
    std::error_code ec;
    fs::remove(tmp, ec);
    std::cerr << "error: " << err.what() << "\n";
    return kIo;
  }
}

int run_validate(const std::string& prompts, const std::optional<std::string>& data) {
  std::vector<ExampleRecord> samples;
  std::vector<DatasetKey> keys;
  try {
    if (data) samples = read_examples(*data, kLintSampleLimit);
    keys = discover_collections(prompts);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kIo;
  }
  bool errors = false;
  for (const auto& key : keys) {
    std::vector<LintFinding> findings;
    try {
      findings = lint_collection(read_collection(prompts, key), samples);
    } catch (const StoreError& err) {
      // A file that is not even shaped like a collection is itself an
      // ERROR finding rather than an I/O failure.
      findings.push_back({"L001", Severity::Error, std::nullopt,
                          key.str() + ": " + err.what(), err.offset()});
    }
    for (const auto& f : findings) std::cout << to_json_line(f) << "\n";
    errors = errors || has_errors(findings);
  }
  std::cout.flush();
  return errors ? kLint : kOk;
}

int run_stats(const std::string& prompts, bool as_json) {
  std::vector<PromptCollection> collections;
  try {
    for (const auto& key : discover_collections(prompts)) {
      collections.push_back(load_collection(prompts, key));
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kIo;
  }
  StoreStats s = compute_stats(collections);
  if (as_json) {
    std::cout << s.to_json().dump(2) << "\n";
    return kOk;
  }
  std::cout << "datasets:                    " << s.dataset_count << "\n"
            << "subsets:                     " << s.subset_count << "\n"
            << "prompts:                     " << s.prompt_count << "\n"
            << "original-task prompts:       " << s.original_task_prompt_count << "\n"
            << "prompts per subset:          " << s.prompts_per_subset_mean.str() << "\n"
            << "original-task per subset:    " << s.original_task_per_subset_mean.str() << "\n";
  for (const auto& [prompts_in_subset, subsets] : s.histogram) {
    std::cout << "  " << prompts_in_subset << " prompt(s): " << subsets << " subset(s)\n";
  }
  return kOk;
}

PromptService* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service != nullptr) g_service->stop();
}

int run_serve(const std::string& prompts, const std::string& data_root, int port,
              const std::optional<std::string>& static_dir) {
  PromptService service(prompts, data_root);
  std::optional<fs::path> mount;
  if (static_dir) mount = fs::path(*static_dir);
  int bound = service.bind("127.0.0.1", port, mount);
  if (bound < 0) {
    std::cerr << "error: cannot listen on port " << port << "\n";
    return kIo;
  }
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "listening on http://127.0.0.1:" << bound << "\n";
  const bool ok = service.listen();
  g_service = nullptr;
  return ok ? kOk : kIo;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Author, review and apply natural-language prompt templates."};
  app.require_subcommand(1);

  ApplyArgs apply;
  auto* apply_cmd = app.add_subcommand("apply", "Apply a collection's prompts to a JSONL file");
  apply_cmd->add_option("--prompts", apply.prompts, "Prompt store root")->required();
  apply_cmd->add_option("--dataset", apply.dataset, "Collection key, dataset[/subset]")
      ->required();
  apply_cmd->add_option("--data", apply.data, "Input examples (JSONL)")->required();
  apply_cmd->add_option("--out", apply.out, "Output prompted examples (JSONL)")->required();
  apply_cmd->add_option("--strategy", apply.strategy, "seeded:<u64> | cross | fixed:<i,j,...>")
      ->required();
  apply_cmd->add_option("--prompt-name", apply.prompt_name, "Apply only this prompt");
  apply_cmd->add_flag("--fail-fast", apply.fail_fast, "Stop at the first render error");
  apply_cmd->add_option("--max-variants", apply.max_variants,
                        "Cross-product variant cap per example")
      ->check(CLI::PositiveNumber);
  apply_cmd->add_option("--workers", apply.workers, "Worker threads")
      ->check(CLI::Range(1, 256));
  apply_cmd->add_flag("--lenient", apply.lenient, "Skip and count malformed input lines");

  std::string validate_prompts;
  std::optional<std::string> validate_data;
  auto* validate_cmd = app.add_subcommand("validate", "Lint every collection; JSONL findings");
  validate_cmd->add_option("--prompts", validate_prompts, "Prompt store root")->required();
  validate_cmd->add_option("--data", validate_data, "Sample examples for dynamic rules");

  std::string stats_prompts;
  bool stats_json = false;
  auto* stats_cmd = app.add_subcommand("stats", "Summarize the prompt store");
  stats_cmd->add_option("--prompts", stats_prompts, "Prompt store root")->required();
  stats_cmd->add_flag("--json", stats_json, "Emit JSON");

  std::string serve_prompts;
  std::string serve_data;
  int serve_port = 8080;
  std::optional<std::string> serve_static;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the JSON API (and a UI bundle)");
  serve_cmd->add_option("--prompts", serve_prompts, "Prompt store root")->required();
  serve_cmd->add_option("--data-root", serve_data, "Directory of <key>.jsonl files")
      ->required();
  serve_cmd->add_option("--port", serve_port, "Port (0 picks a free one)")
      ->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--static", serve_static, "Static bundle served under /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (*apply_cmd) return run_apply(apply);
  if (*validate_cmd) return run_validate(validate_prompts, validate_data);
  if (*stats_cmd) return run_stats(stats_prompts, stats_json);
  if (*serve_cmd) return run_serve(serve_prompts, serve_data, serve_port, serve_static);
  return kUsage;
}
