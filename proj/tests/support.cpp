// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <sys/wait.h>

#include <array>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace promptlab::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("promptlab-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Prompt make_prompt(const std::string& name, const std::string& source,
                   std::optional<std::string> answer_choices) {
  std::mt19937_64 rng(std::hash<std::string>{}(name));
  Prompt p;
  p.id = make_uuid(rng);
  p.template_source = source;
  p.answer_choices = std::move(answer_choices);
  p.metadata.name = name;
  p.metadata.metrics = {"Accuracy"};
  return p;
}

namespace {

// With `template_safe`, the text never opens a tag.
std::string random_text(std::mt19937_64& rng, std::size_t max_len, bool template_safe = false) {
  static const std::vector<std::string> pieces = {
      "a", "b", "Z", " ", "\"", "\\", "/", "\n", "\t", "{", "}", "%", "é", "日本", "😀",
      "\x01", "|", "answer", "0", "~"};
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  std::string out;
  for (std::size_t i = 0, n = len(rng); i < n; ++i) {
    const std::string& piece = pieces[pick(rng)];
    if (template_safe && piece == "{") continue;
    out += piece;
  }
  return out;
}

// Templates drawn from a small grammar so they always parse.
std::string random_template(std::mt19937_64& rng) {
  static const std::vector<std::string> parts = {
      "Premise: {{premise}} ",
      "{{ hypothesis | lower }}",
      "{% if label == 0 %}yes{% else %}no{% endif %}",
      "{{ choice(['Q', 'Question', \"Ask\"]) }}: ",
      "{% for w in words %}{{w}}{% if not loop.last %}, {% endif %}{% endfor %}",
      " ||| {{ answer_choices[label] }}",
      "{% set x = 3 %}{{ x * 2 }}",
      "plain text with 'quotes' and \"doubles\" ",
      "Unicode: é日本 ",
      "{{ text | replace('a', 'b') | trim }}",
  };
  std::uniform_int_distribution<std::size_t> count(1, 5);
  std::uniform_int_distribution<std::size_t> pick(0, parts.size() - 1);
  std::string out;
  for (std::size_t i = 0, n = count(rng); i < n; ++i) out += parts[pick(rng)];
  return out;
}

}  // namespace

PromptCollection random_collection(std::mt19937_64& rng, const DatasetKey& key) {
  PromptCollection c{key, {}};
  std::uniform_int_distribution<std::size_t> count(0, 8);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0, n = count(rng); i < n; ++i) {
    Prompt p;
    p.id = make_uuid(rng);
    p.template_source = random_template(rng);
    if (coin(rng)) p.answer_choices = "yes ||| no ||| " + random_text(rng, 3, true) + "x";
    p.metadata.name = "prompt " + std::to_string(i) + " " + random_text(rng, 6);
    p.metadata.reference = random_text(rng, 10);
    p.metadata.original_task = coin(rng);
    p.metadata.choices_in_prompt = p.answer_choices.has_value() && coin(rng);
    std::uniform_int_distribution<std::size_t> metric_count(0, 3);
    for (std::size_t m = 0, mn = metric_count(rng); m < mn; ++m) {
      p.metadata.metrics.push_back("metric" + std::to_string(m) + random_text(rng, 2));
    }
    if (coin(rng)) p.metadata.languages = {"en", "fr"};
    c.prompts.push_back(std::move(p));
  }
  return c;
}

std::vector<ExampleRecord> lint_samples() {
  std::vector<ExampleRecord> out;
  const char* labels[] = {"yes", "no", "maybe"};
  for (std::uint64_t i = 0; i < 3; ++i) {
    out.push_back({i, {{"premise", "P" + std::to_string(i)}, {"label", labels[i]}}, i + 1});
  }
  return out;
}

std::vector<PromptFixture> prompt_rule_fixtures() {
  const std::string good = "Premise: {{premise}} Is it true? ||| {{label}}";
  std::vector<PromptFixture> out;
  auto add = [&](std::string rule, Prompt p) { out.push_back({std::move(rule), std::move(p)}); };

  add("L001", make_prompt("unparseable", "Premise: {{premise ||| {{label}}"));
  add("L002", make_prompt("two separators", "Premise: {{premise}} ||| {{label}} ||| again"));
  {
    auto p = make_prompt("lists choices", good);
    p.metadata.choices_in_prompt = true;
    add("L003", p);
  }
  add("L004", make_prompt(" ", good));
  add("L005", make_prompt("answer is", "Premise: {{premise}} Is it true? ||| The answer is {{label}}"));
  {
    auto p = make_prompt("no metrics", good);
    p.metadata.metrics.clear();
    add("L006", p);
  }
  add("L007", make_prompt("no wording", "{{premise}}? ||| {{label}}"));
  add("L008", make_prompt("never applies",
                          "{% if label == 'never' %}Premise: {{premise}} ||| {{label}}{% endif %}"));
  add("L009", make_prompt("no target", "Premise: {{premise}} Is it true?"));
  add("L010", make_prompt("nested choice",
                          "Read the {{ choice([choice(['premise', 'text']), 'context']) }}: {{premise}} "
                          "||| {{label}}"));
  return out;
}

PromptCollection clean_collection(const DatasetKey& key, std::size_t n) {
  PromptCollection c{key, {}};
  for (std::size_t i = 0; i < n; ++i) {
    auto p = make_prompt(key.str() + " prompt " + std::to_string(i),
                         "Variant " + std::to_string(i) + ": {{premise}} Is it true? ||| {{label}}");
    p.metadata.original_task = i == 0;
    c.prompts.push_back(std::move(p));
  }
  return c;
}

std::vector<CollectionFixture> collection_rule_fixtures() {
  std::vector<CollectionFixture> out;
  out.push_back({"C001", clean_collection(DatasetKey::parse("few"), 3)});
  {
    auto c = clean_collection(DatasetKey::parse("dupes"), 5);
    c.prompts[4].metadata.name = c.prompts[3].metadata.name;
    out.push_back({"C002", std::move(c)});
  }
  {
    auto c = clean_collection(DatasetKey::parse("derived"), 5);
    c.prompts[0].metadata.original_task = false;
    out.push_back({"C003", std::move(c)});
  }
  return out;
}

std::string shell_quote(const std::string& arg) {
  std::string out = "'";
  for (char c : arg) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

CommandResult run_command(const std::string& command) {
  CommandResult result;
  FILE* pipe = ::popen((command + " 2>/dev/null").c_str(), "r");
  if (pipe == nullptr) return result;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) result.output.append(buf.data(), n);
  int status = ::pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

}  // namespace promptlab::testing
