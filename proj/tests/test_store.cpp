// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "promptlab/store.hpp"
#include "support.hpp"

using namespace promptlab;
using namespace promptlab::testing;
using nlohmann::json;

namespace {

std::string error_code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& err) {
    return err.code();
  }
  return "";
}

std::string error_message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& err) {
    return err.what();
  }
  return "";
}

const char* kCanonical = R"({
  "dataset": "snli",
  "subset": null,
  "prompts": [
    {
      "id": "0b5a2e36-8c7a-4c1e-9a61-2a4b1e0f6d11",
      "name": "based on the previous passage",
      "reference": "",
      "original_task": true,
      "choices_in_prompt": false,
      "metrics": [
        "Accuracy"
      ],
      "languages": [
        "en"
      ],
      "answer_choices": "Yes ||| Maybe ||| No",
      "template": "{{premise}} Based on the previous passage, is it true that \"{{hypothesis}}\"? ||| {{ answer_choices[label] }}"
    }
  ]
}
)";

}  // namespace

TEST_CASE("dataset keys") {
  auto k = DatasetKey::parse("super_glue/rte");
  CHECK(k.dataset == "super_glue");
  CHECK(k.subset == "rte");
  CHECK(k.str() == "super_glue/rte");
  CHECK(k.relative_dir() == std::filesystem::path("super_glue/rte"));
  CHECK_FALSE(DatasetKey::parse("snli").subset.has_value());
  for (auto bad : {"", "/", "a/", "/b", "A", "a-b", "a/b/c", "a b", "../x"}) {
    CAPTURE(bad);
    CHECK(error_code_of([&] { DatasetKey::parse(bad); }) == "InvalidKey");
  }
  CHECK(DatasetKey::parse("a") < DatasetKey::parse("a/b"));
  CHECK(DatasetKey::parse("a/b") < DatasetKey::parse("b"));
}

TEST_CASE("canonical text round-trips byte for byte") {
  auto c = parse_collection(kCanonical, true);
  REQUIRE(c.prompts.size() == 1);
  CHECK(c.prompts[0].answer_choices == "Yes ||| Maybe ||| No");
  CHECK(serialize_collection(c) == kCanonical);
}

TEST_CASE("serialization keeps non-ASCII text as UTF-8") {
  PromptCollection c{DatasetKey::parse("x"), {make_prompt("naïve 日本", "é ||| ü")}};
  auto text = serialize_collection(c);
  CHECK(text.find("naïve 日本") != std::string::npos);
  CHECK(parse_collection(text, true) == c);
}

TEST_CASE("schema errors name the JSON pointer") {
  json doc = json::parse(kCanonical);
  SUBCASE("wrong type") {
    doc["prompts"][0]["original_task"] = "yes";
    CHECK(error_message_of([&] { parse_collection(doc.dump(), false); })
              .find("/prompts/0/original_task") != std::string::npos);
  }
  SUBCASE("missing key") {
    doc["prompts"][0].erase("metrics");
    CHECK(error_code_of([&] { parse_collection(doc.dump(), false); }) == "SchemaError");
    CHECK(error_message_of([&] { parse_collection(doc.dump(), false); })
              .find("/prompts/0/metrics") != std::string::npos);
  }
  SUBCASE("unknown key") {
    doc["prompts"][0]["extra"] = 1;
    CHECK(error_message_of([&] { parse_collection(doc.dump(), false); })
              .find("/prompts/0/extra") != std::string::npos);
  }
  SUBCASE("metric list element") {
    doc["prompts"][0]["metrics"] = json::array({"a", 3});
    CHECK(error_message_of([&] { parse_collection(doc.dump(), false); })
              .find("/prompts/0/metrics/1") != std::string::npos);
  }
  SUBCASE("not JSON at all") {
    CHECK(error_code_of([] { parse_collection("{", false); }) == "SchemaError");
  }
}

TEST_CASE("strict parsing enforces collection invariants") {
  json doc = json::parse(kCanonical);
  json second = doc["prompts"][0];
  second["id"] = "11111111-2222-4333-8444-555555555555";
  SUBCASE("duplicate name") {
    doc["prompts"].push_back(second);
    CHECK(error_code_of([&] { parse_collection(doc.dump(), true); }) == "SchemaError");
    CHECK_NOTHROW(parse_collection(doc.dump(), false));
  }
  SUBCASE("duplicate id") {
    second["id"] = doc["prompts"][0]["id"];
    second["name"] = "another";
    doc["prompts"].push_back(second);
    CHECK(error_code_of([&] { parse_collection(doc.dump(), true); }) == "SchemaError");
  }
  SUBCASE("bad id") {
    doc["prompts"][0]["id"] = "not-a-uuid";
    CHECK(error_code_of([&] { parse_collection(doc.dump(), true); }) == "SchemaError");
  }
  SUBCASE("unparseable template") {
    doc["prompts"][0]["template"] = "{{ premise";
    CHECK(error_code_of([&] { parse_collection(doc.dump(), true); }) == "TemplateError");
  }
  SUBCASE("key mismatch") {
    CHECK(error_code_of([&] { parse_collection(doc.dump(), true, DatasetKey::parse("other")); }) ==
          "SchemaError");
  }
}

TEST_CASE("save and load through the filesystem") {
  TempDir dir;
  PromptCollection c{DatasetKey::parse("super_glue/rte"),
                     {make_prompt("a", "{{x}} ||| y"), make_prompt("b", "{{x}} ||| z")}};
  save_collection(dir.path(), c);
  CHECK(std::filesystem::is_regular_file(dir / "super_glue/rte/prompts.json"));
  CHECK(load_collection(dir.path(), c.key) == c);
  CHECK(read_text(dir / "super_glue/rte/prompts.json") == serialize_collection(c));

  // No temporary files are left behind.
  std::size_t files = 0;
  for (auto& e : std::filesystem::directory_iterator(dir / "super_glue/rte")) {
    (void)e;
    ++files;
  }
  CHECK(files == 1);

  CHECK(error_code_of([&] { load_collection(dir.path(), DatasetKey::parse("nope")); }) ==
        "NotFound");
}

TEST_CASE("atomic writes replace the previous contents") {
  TempDir dir;
  write_file_atomic(dir / "f.txt", "first");
  write_file_atomic(dir / "f.txt", "second");
  CHECK(read_text(dir / "f.txt") == "second");
  CHECK(error_code_of([&] { write_file_atomic("/proc/promptlab/x", "x"); }) == "IoError");
}

TEST_CASE("upsert") {
  PromptCollection c{DatasetKey::parse("d"), {make_prompt("a", "x"), make_prompt("b", "y")}};
  auto changed = c.prompts[0];
  changed.template_source = "changed";
  auto updated = upsert_prompt(c, changed);
  REQUIRE(updated.prompts.size() == 2);
  CHECK(updated.prompts[0].template_source == "changed");

  auto appended = upsert_prompt(c, make_prompt("c", "z"));
  CHECK(appended.prompts.size() == 3);
  CHECK(appended.prompts[2].metadata.name == "c");

  auto renamed = c.prompts[0];
  renamed.metadata.name = "b";
  CHECK(error_code_of([&] { upsert_prompt(c, renamed); }) == "DuplicateName");
}

TEST_CASE("discovery") {
  TempDir dir;
  save_collection(dir.path(), {DatasetKey::parse("snli"), {}});
  save_collection(dir.path(), {DatasetKey::parse("glue/rte"), {}});
  save_collection(dir.path(), {DatasetKey::parse("glue/mnli"), {}});
  write_text(dir / "Bad-Name/prompts.json", "{}");
  write_text(dir / "empty/readme.txt", "");
  auto keys = discover_collections(dir.path());
  REQUIRE(keys.size() == 3);
  CHECK(keys[0].str() == "glue/mnli");
  CHECK(keys[1].str() == "glue/rte");
  CHECK(keys[2].str() == "snli");
  CHECK(error_code_of([&] { discover_collections(dir / "missing"); }) == "NotFound");
}

TEST_CASE("one-decimal means round half up") {
  CHECK(mean_one_decimal(2052, 269).str() == "7.6");
  CHECK(mean_one_decimal(1506, 269).str() == "5.6");
  CHECK(mean_one_decimal(1, 4).str() == "0.3");  // 0.25
  CHECK(mean_one_decimal(1, 20).str() == "0.1");  // 0.05
  CHECK(mean_one_decimal(0, 3).str() == "0.0");
  CHECK(mean_one_decimal(5, 0).str() == "0.0");
  CHECK(mean_one_decimal(30, 3).str() == "10.0");
}

TEST_CASE("statistics over collections") {
  std::vector<PromptCollection> cs;
  auto with = [](std::string key, int n, int original) {
    PromptCollection c{DatasetKey::parse(key), {}};
    for (int i = 0; i < n; ++i) {
      auto p = make_prompt(key + std::to_string(i), "x");
      p.metadata.original_task = i < original;
      c.prompts.push_back(p);
    }
    return c;
  };
  cs.push_back(with("glue/rte", 3, 1));
  cs.push_back(with("glue/mnli", 5, 5));
  cs.push_back(with("snli", 3, 0));
  auto s = compute_stats(cs);
  CHECK(s.dataset_count == 2);
  CHECK(s.subset_count == 3);
  CHECK(s.prompt_count == 11);
  CHECK(s.original_task_prompt_count == 6);
  CHECK(s.prompts_per_subset_mean.str() == "3.7");
  CHECK(s.original_task_per_subset_mean.str() == "2.0");
  CHECK(s.histogram == std::map<std::uint64_t, std::uint64_t>{{3, 2}, {5, 1}});
  CHECK(s.to_json().dump() ==
        R"({"dataset_count":2,"subset_count":3,"prompt_count":11,"original_task_prompt_count":6,)"
        R"("prompts_per_subset_mean":3.7,"original_task_per_subset_mean":2.0,"histogram":{"3":2,"5":1}})");
  CHECK(compute_stats({}).prompts_per_subset_mean.str() == "0.0");
}

TEST_CASE("random collections survive save and load") {
  std::mt19937_64 rng(20240601);
  TempDir dir;
  for (int i = 0; i < 25; ++i) {
    auto c = random_collection(rng, DatasetKey::parse("d" + std::to_string(i)));
    save_collection(dir.path(), c);
    CHECK(load_collection(dir.path(), c.key) == c);
  }
}
