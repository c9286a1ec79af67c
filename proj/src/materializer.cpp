// SPDX-License-Identifier: Apache-2.0

#include "promptlab/materializer.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <thread>

namespace promptlab {

namespace {

struct TaskResult {
  std::string lines;
  std::size_t variants = 0;
  std::size_t emitted = 0;
  std::size_t skipped = 0;
  std::optional<ApplyError> error;
};

void run_parallel(std::size_t tasks, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, tasks));
  if (workers == 1) {
    for (std::size_t i = 0; i < tasks; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < tasks; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

JsonlReader::JsonlReader(std::istream& in, bool lenient) : in_(&in), lenient_(lenient) {}

JsonlReader::JsonlReader(std::unique_ptr<std::istream> owned, bool lenient)
    : owned_(std::move(owned)), in_(owned_.get()), lenient_(lenient) {}

JsonlReader JsonlReader::open(const std::filesystem::path& path, bool lenient) {
  auto file = std::make_unique<std::ifstream>(path, std::ios::binary);
  if (!*file) throw DataError("cannot open " + path.string(), 0);
  return JsonlReader(std::move(file), lenient);
}

std::optional<ExampleRecord> JsonlReader::next() {
  std::string text;
  while (std::getline(*in_, text)) {
    ++line_;
    if (trim(text).empty()) continue;
    const std::uint64_t ordinal = ordinal_++;
    Value parsed = Value::parse(text, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
      if (lenient_) {
        ++malformed_;
        continue;
      }
      throw DataError("line " + std::to_string(line_) +
                          (parsed.is_discarded() ? ": malformed JSON"
                                                 : ": expected a JSON object"),
                      line_);
    }
    return ExampleRecord{ordinal, std::move(parsed), line_};
  }
  if (in_->bad()) throw DataError("read failure after line " + std::to_string(line_), line_);
  return std::nullopt;
}

std::vector<ExampleRecord> read_examples(const std::filesystem::path& path, std::size_t limit) {
  auto reader = JsonlReader::open(path);
  std::vector<ExampleRecord> out;
  while (out.size() < limit) {
    auto rec = reader.next();
    if (!rec) break;
    out.push_back(std::move(*rec));
  }
  return out;
}

std::string to_jsonl_line(const PromptedExample& e, std::string_view prompt_name) {
  nlohmann::ordered_json o = nlohmann::ordered_json::object();
  o["input"] = e.input;
  o["target"] = e.target;
  if (e.answer_choices) {
    o["answer_choices"] = *e.answer_choices;
  } else {
    o["answer_choices"] = nullptr;
  }
  o["prompt_id"] = e.prompt_id;
  o["prompt_name"] = prompt_name;
  o["example_ordinal"] = e.example_ordinal;
  o["variant_ordinal"] = e.variant_ordinal;
  return o.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

nlohmann::ordered_json MaterializeReport::to_json() const {
  nlohmann::ordered_json o = nlohmann::ordered_json::object();
  o["examples_read"] = examples_read;
  o["emitted"] = emitted;
  o["skipped_empty"] = skipped_empty;
  o["errored"] = errored;
  o["malformed_lines"] = malformed_lines;
  auto errors = nlohmann::ordered_json::array();
  for (const auto& e : first_errors) {
    errors.push_back({{"prompt_id", e.prompt_id},
                      {"example_ordinal", e.example_ordinal},
                      {"message", e.message}});
  }
  o["first_errors"] = std::move(errors);
  auto prompts = nlohmann::ordered_json::array();
  for (const auto& c : per_prompt) {
    prompts.push_back({{"prompt_id", c.prompt_id},
                       {"attempted", c.attempted},
                       {"emitted", c.emitted},
                       {"skipped_empty", c.skipped_empty},
                       {"errored", c.errored}});
  }
  o["per_prompt"] = std::move(prompts);
  return o;
}

MaterializeReport materialize(JsonlReader& examples, std::span<const CompiledPrompt> prompts,
                              const MaterializeOptions& options, std::ostream& out) {
  MaterializeReport report;
  for (const auto& p : prompts) report.per_prompt.push_back({p.prompt().id, 0, 0, 0, 0});

  const std::size_t batch_size = std::max<std::size_t>(1, options.batch_size);
  std::vector<ExampleRecord> batch;
  std::vector<TaskResult> results;
  for (;;) {
    batch.clear();
    while (batch.size() < batch_size) {
      auto rec = examples.next();
      if (!rec) break;
      batch.push_back(std::move(*rec));
    }
    if (batch.empty()) break;
    report.examples_read += batch.size();

    const std::size_t task_count = batch.size() * prompts.size();
    results.assign(task_count, TaskResult{});
    run_parallel(task_count, options.workers, [&](std::size_t task) {
      const ExampleRecord& rec = batch[task / prompts.size()];
      const CompiledPrompt& prompt = prompts[task % prompts.size()];
      TaskResult& r = results[task];
      try {
        ApplyResult applied =
            apply_prompt_detailed(prompt, rec.fields, rec.ordinal, options.strategy);
        r.variants = applied.variants;
        r.skipped = applied.skipped;
        r.emitted = applied.emitted.size();
        for (const auto& e : applied.emitted) {
          r.lines += to_jsonl_line(e, prompt.prompt().metadata.name);
          r.lines += '\n';
        }
      } catch (const ApplyError& err) {
        r.error = err;
      }
    });

    // Merge in (example, prompt) order so output bytes do not depend on
    // scheduling.
    for (std::size_t task = 0; task < task_count; ++task) {
      TaskResult& r = results[task];
      PromptCounters& counters = report.per_prompt[task % prompts.size()];
      if (r.error) {
        if (options.fail_fast) throw *r.error;
        ++counters.attempted;
        ++counters.errored;
        ++report.errored;
        if (report.first_errors.size() < MaterializeReport::kMaxErrorSamples) {
          report.first_errors.push_back(
              {r.error->prompt_id(), r.error->example_ordinal(), r.error->what()});
        }
        continue;
      }
      counters.attempted += r.variants;
      counters.emitted += r.emitted;
      counters.skipped_empty += r.skipped;
      report.emitted += r.emitted;
      report.skipped_empty += r.skipped;
      out << r.lines;
      if (!out) throw Error("IoError", "failed writing prompted examples");
    }
  }
  report.malformed_lines = examples.malformed_lines();
  out.flush();
  if (!out) throw Error("IoError", "failed writing prompted examples");
  return report;
}

}  // namespace promptlab
