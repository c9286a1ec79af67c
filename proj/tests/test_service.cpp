// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <thread>

#include <httplib.h>

#include "promptlab/prompt.hpp"
#include "promptlab/service.hpp"
#include "support.hpp"

using namespace promptlab;
using namespace promptlab::testing;
using nlohmann::json;

namespace {

const char* kEntailment =
    "If {{premise}} is true, is it also true that {{hypothesis}}? ||| {{entailed}}";

struct Fixture {
  TempDir dir;
  PromptService service{dir / "prompts", dir / "data"};

  Fixture() {
    auto c = clean_collection(DatasetKey::parse("glue/rte"), 3);
    save_collection(dir / "prompts", c);
    auto snli = clean_collection(DatasetKey::parse("snli"), 2);
    snli.prompts[1].metadata.original_task = true;
    save_collection(dir / "prompts", snli);
    write_text(dir / "data/snli.jsonl",
               "{\"premise\":\"a\",\"label\":\"yes\"}\n"
               "{\"premise\":\"b\",\"label\":\"no\"}\n"
               "{\"premise\":\"c\",\"label\":\"yes\"}\n");
    write_text(dir / "data/extra.jsonl", "{\"x\":1}\n");
  }

  ApiResponse get(const std::string& path, std::map<std::string, std::string> query = {}) {
    return service.handle({"GET", path, std::move(query), ""});
  }
  ApiResponse put(const std::string& path, const std::string& body) {
    return service.handle({"PUT", path, {}, body});
  }
  ApiResponse post(const std::string& path, const std::string& body) {
    return service.handle({"POST", path, {}, body});
  }
};

void check_error_shape(const ApiResponse& r, int status) {
  CHECK(r.status == status);
  json body = json::parse(r.body);
  CHECK(body.size() == 4);
  CHECK(body["status"] == status);
  CHECK(body["code"].is_string());
  CHECK(body["message"].is_string());
  CHECK(body.contains("offset"));
}

}  // namespace

TEST_CASE_FIXTURE(Fixture, "dataset listing merges collections and data files") {
  auto r = get("/api/datasets");
  REQUIRE(r.status == 200);
  CHECK(json::parse(r.body) == json::parse(R"([
    {"key": "extra", "prompt_count": 0, "original_task_count": 0, "example_count": 1},
    {"key": "glue/rte", "prompt_count": 3, "original_task_count": 1, "example_count": 0},
    {"key": "snli", "prompt_count": 2, "original_task_count": 2, "example_count": 3}
  ])"));
}

TEST_CASE("dataset listing on an empty root") {
  TempDir dir;
  PromptService service(dir / "prompts", dir / "data");
  auto r = service.handle({"GET", "/api/datasets", {}, ""});
  CHECK(r.status == 200);
  CHECK(r.body == "[]");
}

TEST_CASE_FIXTURE(Fixture, "a corrupt collection is a server error") {
  write_text(dir / "prompts/broken/prompts.json", "{");
  check_error_shape(get("/api/datasets"), 500);
  check_error_shape(get("/api/stats"), 500);
}

TEST_CASE_FIXTURE(Fixture, "example paging") {
  auto page = [&](std::map<std::string, std::string> q) {
    auto r = get("/api/datasets/snli/examples", std::move(q));
    REQUIRE(r.status == 200);
    std::vector<std::uint64_t> ordinals;
    const json body = json::parse(r.body);
    for (const auto& e : body["examples"]) ordinals.push_back(e["ordinal"]);
    return ordinals;
  };
  CHECK(page({{"offset", "0"}, {"limit", "2"}}) == std::vector<std::uint64_t>{0, 1});
  CHECK(page({{"offset", "2"}}) == std::vector<std::uint64_t>{2});
  CHECK(page({{"offset", "99"}}).empty());
  CHECK(page({}) == std::vector<std::uint64_t>{0, 1, 2});

  auto full = json::parse(get("/api/datasets/snli/examples", {{"limit", "1"}}).body);
  CHECK(full == json::parse(
                    R"({"key":"snli","offset":0,"limit":1,"examples":[{"ordinal":0,"fields":{"label":"yes","premise":"a"}}]})"));

  for (auto bad : {"0", "101", "-1", "x", ""}) {
    CAPTURE(bad);
    check_error_shape(get("/api/datasets/snli/examples", {{"limit", bad}}), 400);
  }
  check_error_shape(get("/api/datasets/snli/examples", {{"offset", "-3"}}), 400);
  check_error_shape(get("/api/datasets/glue/rte/examples"), 404);
  check_error_shape(get("/api/datasets/Bad-Key/examples"), 400);
}

TEST_CASE_FIXTURE(Fixture, "prompt listing and lookup") {
  auto list = json::parse(get("/api/datasets/glue/rte/prompts").body);
  REQUIRE(list["prompts"].size() == 3);
  const std::string id = list["prompts"][1]["id"];
  auto one = get("/api/datasets/glue/rte/prompts/" + id);
  REQUIRE(one.status == 200);
  CHECK(json::parse(one.body) == list["prompts"][1]);
  check_error_shape(get("/api/datasets/glue/rte/prompts/00000000-0000-4000-8000-000000000000"),
                    404);
  check_error_shape(get("/api/datasets/nothing/prompts"), 404);
  CHECK(json::parse(get("/api/datasets/extra/prompts").body)["prompts"].empty());
}

TEST_CASE_FIXTURE(Fixture, "PUT then GET returns the same prompt") {
  auto p = make_prompt("based on the previous passage", kEntailment);
  p.metadata.reference = "worked example";
  const std::string body = prompt_to_json(p).dump();
  auto saved = put("/api/datasets/snli/prompts/" + p.id, body);
  REQUIRE(saved.status == 200);
  json out = json::parse(saved.body);
  CHECK(out["prompt"] == json::parse(body));
  CHECK(out["findings"].is_array());

  auto fetched = get("/api/datasets/snli/prompts/" + p.id);
  REQUIRE(fetched.status == 200);
  CHECK(json::parse(fetched.body) == json::parse(body));
  CHECK(load_collection(dir / "prompts", DatasetKey::parse("snli")).prompts.size() == 3);
}

TEST_CASE_FIXTURE(Fixture, "PUT creates a new collection") {
  auto p = make_prompt("first", "Question {{premise}} ||| {{label}}");
  auto r = put("/api/datasets/new_set/prompts/" + p.id, prompt_to_json(p).dump());
  REQUIRE(r.status == 200);
  CHECK(load_collection(dir / "prompts", DatasetKey::parse("new_set")).prompts.size() == 1);
}

TEST_CASE_FIXTURE(Fixture, "PUT returns lint findings without blocking the save") {
  auto p = make_prompt("answer is", "Question {{premise}} ||| The answer is {{label}}");
  auto r = put("/api/datasets/snli/prompts/" + p.id, prompt_to_json(p).dump());
  REQUIRE(r.status == 200);
  auto findings = json::parse(r.body)["findings"];
  REQUIRE(findings.size() == 1);
  CHECK(findings[0]["rule"] == "L005");
  CHECK(findings[0]["severity"] == "WARNING");
}

TEST_CASE_FIXTURE(Fixture, "PUT failures") {
  auto list = json::parse(get("/api/datasets/glue/rte/prompts").body)["prompts"];
  SUBCASE("renaming onto an existing name") {
    json p = list[0];
    p["name"] = list[1]["name"];
    check_error_shape(put("/api/datasets/glue/rte/prompts/" + p["id"].get<std::string>(),
                          p.dump()),
                      409);
  }
  SUBCASE("template that does not parse") {
    json p = list[0];
    p["template"] = "Hello {{";
    auto r = put("/api/datasets/glue/rte/prompts/" + p["id"].get<std::string>(), p.dump());
    check_error_shape(r, 422);
    CHECK(json::parse(r.body)["offset"] == 6);
  }
  SUBCASE("blank name") {
    json p = list[0];
    p["name"] = " ";
    check_error_shape(put("/api/datasets/glue/rte/prompts/" + p["id"].get<std::string>(),
                          p.dump()),
                      422);
  }
  SUBCASE("id mismatch, bad id, malformed body") {
    json p = list[0];
    check_error_shape(
        put("/api/datasets/glue/rte/prompts/00000000-0000-4000-8000-000000000000", p.dump()),
        400);
    check_error_shape(put("/api/datasets/glue/rte/prompts/nope", p.dump()), 400);
    check_error_shape(put("/api/datasets/glue/rte/prompts/" + p["id"].get<std::string>(), "{"),
                      400);
    p.erase("metrics");
    check_error_shape(put("/api/datasets/glue/rte/prompts/" + p["id"].get<std::string>(),
                          p.dump()),
                      400);
  }
  // Nothing was written by any failing request.
  CHECK(json::parse(get("/api/datasets/glue/rte/prompts").body)["prompts"] == list);
}

TEST_CASE_FIXTURE(Fixture, "render preview") {
  SUBCASE("worked template matches the library") {
    json req = {{"template", kEntailment},
                {"example", {{"premise", "P"}, {"hypothesis", "H"}, {"entailed", "yes"}}}};
    auto r = post("/api/render", req.dump());
    REQUIRE(r.status == 200);
    CompiledPrompt p(make_prompt("x", kEntailment));
    auto lib = apply_prompt(p, req["example"], 0, FixedPath{{}, true});
    json body = json::parse(r.body);
    CHECK(body["input"] == lib[0].input);
    CHECK(body["target"] == lib[0].target);
    CHECK(body["answer_choices"].is_null());
  }
  SUBCASE("preview takes the first element of each choice by default") {
    json req = {{"template", "{{ choice(['A', 'B']) }} ||| {{ answer_choices[1] }}"},
                {"answer_choices", "yes ||| no"},
                {"example", json::object()}};
    json body = json::parse(post("/api/render", req.dump()).body);
    CHECK(body["input"] == "A");
    CHECK(body["target"] == "no");
    CHECK(body["answer_choices"] == json::array({"yes", "no"}));
  }
  SUBCASE("seeded preview") {
    json req = {{"template", "{{ choice(['a', 'b', 'c', 'd']) }}"},
                {"example", json::object()},
                {"strategy", "seeded:42"},
                {"example_ordinal", 5}};
    CHECK(json::parse(post("/api/render", req.dump()).body)["input"] == "b");
    req["strategy"] = "cross";
    check_error_shape(post("/api/render", req.dump()), 400);
    req["strategy"] = "bogus";
    check_error_shape(post("/api/render", req.dump()), 400);
  }
  SUBCASE("skipped") {
    json req = {{"template", "{% if label %}x ||| y{% endif %}"}, {"example", {{"label", 0}}}};
    auto r = post("/api/render", req.dump());
    CHECK(r.status == 200);
    CHECK(json::parse(r.body) == json{{"skipped", true}});
  }
  SUBCASE("errors carry offsets") {
    auto r = post("/api/render", json{{"template", "Hello {{"}, {"example", json::object()}}.dump());
    check_error_shape(r, 422);
    CHECK(json::parse(r.body)["offset"] == 6);
    CHECK(json::parse(r.body)["code"] == "UnterminatedDelimiter");

    r = post("/api/render", json{{"template", "{{missing}}"}, {"example", json::object()}}.dump());
    check_error_shape(r, 422);
    CHECK(json::parse(r.body)["code"] == "MissingField");
    CHECK(json::parse(r.body)["offset"] == 2);
    CHECK(json::parse(r.body)["message"].get<std::string>().rfind("unknown field", 0) == 0);
  }
  SUBCASE("malformed bodies") {
    check_error_shape(post("/api/render", "not json"), 400);
    check_error_shape(post("/api/render", R"({"example": {}})"), 400);
    check_error_shape(post("/api/render", R"({"template": "x", "example": []})"), 400);
    check_error_shape(post("/api/render", R"({"template": "x", "example": {}, "answer_choices": 3})"),
                      400);
  }
}

TEST_CASE_FIXTURE(Fixture, "stats delegate to the store") {
  auto r = get("/api/stats");
  REQUIRE(r.status == 200);
  json s = json::parse(r.body);
  CHECK(s["prompt_count"] == 5);
  CHECK(s["subset_count"] == 2);
  CHECK(s["prompts_per_subset_mean"] == 2.5);
}

TEST_CASE_FIXTURE(Fixture, "routing") {
  check_error_shape(get("/api/nothing"), 404);
  check_error_shape(get("/elsewhere"), 404);
  check_error_shape(post("/api/stats", ""), 405);
  check_error_shape(service.handle({"DELETE", "/api/datasets/snli/prompts/x", {}, ""}), 405);
}

TEST_CASE_FIXTURE(Fixture, "read endpoints are deterministic") {
  for (auto path : {"/api/datasets", "/api/stats", "/api/datasets/snli/prompts"}) {
    CHECK(get(path).body == get(path).body);
  }
}

TEST_CASE_FIXTURE(Fixture, "served over HTTP") {
  write_text(dir / "static/index.html", "<html>ui</html>");
  const int port = service.bind("127.0.0.1", 0, dir / "static");
  REQUIRE(port > 0);
  std::thread server([&] { service.listen(); });

  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5);
  auto datasets = client.Get("/api/datasets");
  REQUIRE(datasets);
  CHECK(datasets->status == 200);
  CHECK(json::parse(datasets->body).size() == 3);

  auto page = client.Get("/api/datasets/snli/examples?offset=1&limit=1");
  REQUIRE(page);
  CHECK(json::parse(page->body)["examples"][0]["ordinal"] == 1);

  auto p = make_prompt("over http", "Question {{premise}} ||| {{label}}");
  auto put_res = client.Put("/api/datasets/snli/prompts/" + p.id, prompt_to_json(p).dump(),
                            "application/json");
  REQUIRE(put_res);
  CHECK(put_res->status == 200);

  auto render_res = client.Post("/api/render",
                                R"({"template": "Hello {{", "example": {}})", "application/json");
  REQUIRE(render_res);
  CHECK(render_res->status == 422);
  CHECK(json::parse(render_res->body)["offset"] == 6);

  auto index = client.Get("/index.html");
  REQUIRE(index);
  CHECK(index->body == "<html>ui</html>");

  service.stop();
  server.join();
}
