#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <json.hpp>
#include <random>
#include <thread>

#include "core/error.hpp"
#include "llmgen/llmgen.hpp"

using namespace mutforge;
using namespace mutforge::llmgen;
using nlohmann::json;

namespace {

const std::string kFunction =
    "fn clamp(v, lo, hi) -> int {\n  if (v < lo) {\n    return lo;\n  }\n  return math.min(v, hi);\n}";

PromptRequest request(PromptTemplate t) {
  PromptRequest r;
  r.tmpl = t;
  r.target = "  if (v < lo) {\n    return lo;";
  r.target_location = SourceLocation::make("src/c.mini", 2, 3);
  r.budget = budget_for(r.target);
  if (t != PromptTemplate::P3) r.enclosing_function = kFunction;
  if (t == PromptTemplate::P1 || t == PromptTemplate::P4) r.examples = default_examples();
  if (t == PromptTemplate::P4) r.unit_tests = "fn test_clamp() {\n  assert(clamp(5, 0, 3) == 3);\n}";
  return r;
}

std::string context_block(const std::string& prompt) {
  auto b = prompt.find("### Context\n");
  auto e = prompt.find("### Input\n");
  REQUIRE(b != std::string::npos);
  REQUIRE(e != std::string::npos);
  return prompt.substr(b + 12, e - b - 12);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

class LocalServer {
 public:
  explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> h) {
    server_.Post("/v1/chat", std::move(h));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

BackendDescriptor http_descriptor(const std::string& url) {
  BackendDescriptor d;
  d.kind = BackendKind::HttpChat;
  d.id = "local";
  d.endpoint = url;
  d.model_name = "m";
  d.backoff_seconds = 0.01;
  d.request_timeout = 5;
  return d;
}

std::string envelope(const std::string& content, int pt = 10, int ct = 5) {
  return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})},
              {"usage", {{"prompt_tokens", pt}, {"completion_tokens", ct}}}}
      .dump();
}

}  // namespace

TEST_CASE("budget counts non-blank lines") {
  CHECK(budget_for("a;\nb;\nc;") == 3);
  CHECK(budget_for("a;") == 1);
  CHECK(budget_for("a;\n\nb;\n  \nc;") == 3);
  CHECK_THROWS_AS(budget_for(" \n\t\n"), Error);
}

TEST_CASE("prompt sections and templates") {
  auto p1 = build_prompt(request(PromptTemplate::P1));
  auto p2 = build_prompt(request(PromptTemplate::P2));
  auto p3 = build_prompt(request(PromptTemplate::P3));
  auto p4 = build_prompt(request(PromptTemplate::P4));

  for (const auto& p : {p1, p2, p3, p4}) {
    auto i = p.find("### Instruction"), c = p.find("### Context"), in = p.find("### Input"),
         o = p.find("### Output");
    CHECK(i < c);
    CHECK(c < in);
    CHECK(in < o);
    CHECK(p.find("Mutation testing", c) < in);  // framing sits in the context
    CHECK(p.find("2:   if (v < lo) {\n3:     return lo;\n") != std::string::npos);
    CHECK(p.find("Generate 2 mutants") != std::string::npos);
    CHECK(p.find("\"mutated_code\"", o) != std::string::npos);
  }

  for (const auto& ex : default_examples()) {
    for (const auto& l : split_lines(ex.correct)) CHECK(p1.find(l) != std::string::npos);
    CHECK(p1.find(ex.buggy) != std::string::npos);
  }
  CHECK(p1.find("n = (n & (n - 1));") != std::string::npos);
  CHECK(p1.find("n = (n ^ (n - 1));") != std::string::npos);
  CHECK(p1.find("Example 6") != std::string::npos);

  CHECK(p2.find("fn clamp(v, lo, hi)") != std::string::npos);
  CHECK(p2.find("Example 1") == std::string::npos);
  CHECK(p3.find("fn clamp") == std::string::npos);
  CHECK(p3.find("return math.min") == std::string::npos);
  CHECK(p4.find("fn test_clamp()") != std::string::npos);

  auto c1 = context_block(p1), c2 = context_block(p2), c3 = context_block(p3),
       c4 = context_block(p4);
  CHECK(c1.find(c2.substr(0, c2.size() - 1)) == 0);
  CHECK(c1.size() > c2.size());
  CHECK(c4.find(c1.substr(0, c1.size() - 1)) == 0);
  CHECK(c4.size() > c1.size());
  CHECK(c2.find(c3.substr(0, c3.size() - 1)) == 0);
}

TEST_CASE("prompt field validation") {
  auto r = request(PromptTemplate::P1);
  r.enclosing_function.reset();
  try {
    build_prompt(r);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("enclosing_function") != std::string::npos);
  }
  r = request(PromptTemplate::P4);
  r.unit_tests.reset();
  CHECK_THROWS_WITH_AS(build_prompt(r), doctest::Contains("unit_tests"), Error);
  r = request(PromptTemplate::P1);
  r.examples.clear();
  CHECK_THROWS_WITH_AS(build_prompt(r), doctest::Contains("examples"), Error);
  r = request(PromptTemplate::P3);
  r.budget = 0;
  CHECK_THROWS_WITH_AS(build_prompt(r), doctest::Contains("budget"), Error);
  CHECK(prompt_template_from_string("P4") == PromptTemplate::P4);
  CHECK_FALSE(prompt_template_from_string("P5"));
}

TEST_CASE("response parsing") {
  auto span = SourceLocation::make("a.mini", 10, 14);
  auto r = parse_response(R"([{"line":12,"mutated_code":"a = b - c;"}])", span);
  REQUIRE(r.candidates.size() == 1);
  CHECK(r.candidates[0].location == SourceLocation::make("a.mini", 12, 12));
  CHECK(r.candidates[0].mutated_text == "a = b - c;");
  CHECK_FALSE(r.parse_failure);

  r = parse_response("Sure! [see below]\n```json\n[{\"line\": 11, \"mutated_code\": \"x[0] = \\\"]\\\";\"}]\n```\nDone [1].",
                     span);
  REQUIRE(r.candidates.size() == 1);
  CHECK(r.candidates[0].mutated_text == "x[0] = \"]\";");

  r = parse_response(R"([{"line":9,"mutated_code":"q"},{"line":10,"mutated_code":""},
                        {"line":"11","mutated_code":"q"},{"mutated_code":"q"},7,
                        {"line":14,"mutated_code":"ok"}])",
                     span);
  CHECK(r.candidates.size() == 1);
  CHECK(r.skipped == 5);

  r = parse_response("no json here {\"line\": 1}", span);
  CHECK(r.parse_failure);
  CHECK(r.candidates.empty());
  CHECK(parse_response("[]", span).candidates.empty());
  CHECK_FALSE(parse_response("[]", span).parse_failure);
}

TEST_CASE("property: parsed candidates are non-empty and inside the span") {
  std::mt19937_64 rng(4);
  auto span = SourceLocation::make("a.mini", 5, 8);
  for (int i = 0; i < 300; ++i) {
    json arr = json::array();
    std::size_t n = rng() % 6;
    std::size_t good = 0;
    for (std::size_t k = 0; k < n; ++k) {
      int line = static_cast<int>(rng() % 12);
      std::string code = rng() % 4 ? "x = " + std::to_string(k) + ";" : "";
      json el = {{"line", line}, {"mutated_code", code}};
      if (rng() % 5 == 0) el.erase("line");
      bool ok = el.contains("line") && !code.empty() && line >= 5 && line <= 8;
      good += ok;
      arr.push_back(el);
    }
    std::string raw = (rng() % 2 ? "prefix [not json " : "") + arr.dump() + " trailing";
    auto r = parse_response(raw, span);
    CHECK(r.candidates.size() == good);
    CHECK(r.candidates.size() + r.skipped == n);
    for (const auto& c : r.candidates) {
      CHECK_FALSE(c.mutated_text.empty());
      CHECK(span.contains(c.location.line_start));
    }
  }
}

TEST_CASE("stub backend is deterministic and honours the budget") {
  BackendDescriptor d;
  d.seed = 42;
  auto backend = make_backend(d);
  auto req = request(PromptTemplate::P1);
  req.target = "  if (v < lo) {\n    return lo;\n  }";
  req.target_location = SourceLocation::make("src/c.mini", 2, 4);
  req.budget = 3;
  auto prompt = build_prompt(req);
  auto a = request_mutations(*backend, prompt, req.target_location);
  auto b = request_mutations(*backend, prompt, req.target_location);
  CHECK(a.raw_response == b.raw_response);
  CHECK(a.candidates.size() == 3);
  CHECK(a.usage.prompt_tokens == word_count(prompt));
  CHECK(a.usage.completion_tokens == word_count(a.raw_response));
  CHECK(stub_response(42, prompt) == a.raw_response);
  CHECK(word_count("  a bb\tc\n") == 3);

  int differing = 0;
  for (std::uint64_t s = 0; s < 20; ++s) differing += stub_response(s, prompt) != a.raw_response;
  CHECK(differing > 10);
  CHECK(stub_response(1, "nothing to see").find('[') == std::string::npos);
}

TEST_CASE("records from candidates") {
  ProjectSnapshot p;
  p.files["src/c.mini"] = kFunction + "\n";
  GenerationResult g;
  g.candidates = {{SourceLocation::make("src/c.mini", 2, 2), "  if (v <= lo) {"},
                  {SourceLocation::make("src/c.mini", 3, 3), "    return hi;"},
                  {SourceLocation::make("src/c.mini", 99, 99), "x"},
                  {SourceLocation::make("src/other.mini", 1, 1), "x"}};
  g.usage = {11, 7};
  g.wall_time = 1.0;
  auto rs = to_records(g, p, "stub:P1", "bug-001-stub", 5);
  REQUIRE(rs.size() == 2);
  CHECK(rs[0].id == "bug-001-stub-5");
  CHECK(rs[1].id == "bug-001-stub-6");
  CHECK(rs[0].origin == "stub:P1");
  CHECK(rs[0].original_text == "  if (v < lo) {");
  CHECK(rs[1].original_text == "    return lo;");
  CHECK(rs[0].token_usage->prompt_tokens + rs[1].token_usage->prompt_tokens == 11);
  CHECK(rs[0].token_usage->completion_tokens + rs[1].token_usage->completion_tokens == 7);
  CHECK(rs[0].gen_wall_time + rs[1].gen_wall_time == doctest::Approx(1.0));
}

TEST_CASE("cost accounting") {
  BackendDescriptor d;
  GenerationResult g;
  g.candidates.resize(10);
  g.wall_time = 17.9;
  auto c = cost_of({g}, d);
  CHECK(c.agt_seconds == doctest::Approx(1.79));
  CHECK(c.usd_per_1k == 0.0);

  d.price_prompt_per_1k = 0.001;
  d.price_completion_per_1k = 0.002;
  GenerationResult a, b;
  a.candidates.resize(1500);
  a.usage = {376000, 50000};
  b.candidates.resize(500);
  b.usage = {100000, 0};
  c = cost_of({a, b}, d);
  CHECK(c.mutations == 2000);
  CHECK(c.usd_total == doctest::Approx(0.576));
  CHECK(c.usd_per_1k == doctest::Approx(0.288));
  CHECK(cost_of({b, a}, d).usd_per_1k == c.usd_per_1k);
  CHECK_THROWS_AS(cost_of({GenerationResult{}}, d), Error);
}

TEST_CASE("backend validation") {
  BackendDescriptor d;
  d.temperature = 2.5;
  CHECK(code_of([&] { validate(d); }) == ErrorCode::Config);
  d = {};
  d.price_prompt_per_1k = -1;
  CHECK_THROWS_AS(validate(d), Error);
  d = {};
  d.kind = BackendKind::HttpChat;
  CHECK_THROWS_AS(make_backend(d), Error);
  d.endpoint = "https://example.invalid/v1";
  CHECK(code_of([&] { make_backend(d); }) == ErrorCode::Config);
}

TEST_CASE("http backend against a local server") {
  std::atomic<int> calls{0};
  std::string seen_auth, seen_model;
  double seen_temp = -1;
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    auto body = json::parse(req.body);
    seen_model = body["model"];
    seen_temp = body["temperature"];
    seen_auth = req.get_header_value("Authorization");
    std::string prompt = body["messages"][0]["content"];
    res.set_content(envelope(prompt == "empty" ? "" : R"(x [{"line":2,"mutated_code":"y"}])", 12, 3),
                    "application/json");
  });
  setenv("MUTFORGE_TEST_KEY", "sekret", 1);
  auto d = http_descriptor(server.url());
  d.api_key_env = "MUTFORGE_TEST_KEY";
  d.temperature = 0.7;
  auto backend = make_backend(d);
  auto r = request_mutations(*backend, "hello", SourceLocation::make("a", 1, 3));
  CHECK(r.candidates.size() == 1);
  CHECK(r.usage.prompt_tokens == 12);
  CHECK(r.usage.completion_tokens == 3);
  CHECK(seen_auth == "Bearer sekret");
  CHECK(seen_model == "m");
  CHECK(seen_temp == doctest::Approx(0.7));

  auto empty = request_mutations(*backend, "empty", SourceLocation::make("a", 1, 3));
  CHECK(empty.candidates.empty());
  CHECK(empty.parse_failure);
  CHECK(calls == 2);
}

TEST_CASE("http backend retries and errors") {
  std::atomic<int> calls{0};
  LocalServer flaky([&](const httplib::Request&, httplib::Response& res) {
    if (++calls <= 2) {
      res.status = 503;
      return;
    }
    res.set_content(envelope("[]"), "application/json");
  });
  auto d = http_descriptor(flaky.url());
  d.retries = 3;
  CHECK(make_backend(d)->complete("p").text == "[]");
  CHECK(calls == 3);

  calls = 0;
  d.retries = 1;
  CHECK(code_of([&] { make_backend(d)->complete("p"); }) == ErrorCode::Transport);
  CHECK(calls == 2);

  LocalServer garbage([](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"oops\": true}", "application/json");
  });
  CHECK(code_of([&] { make_backend(http_descriptor(garbage.url()))->complete("p"); }) ==
        ErrorCode::Protocol);

  auto dead = http_descriptor("http://127.0.0.1:1/v1/chat");
  dead.retries = 1;
  CHECK(code_of([&] { make_backend(dead)->complete("p"); }) == ErrorCode::Transport);
}

TEST_CASE("http backend limits requests in flight") {
  std::atomic<int> active{0}, peak{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    int now = ++active;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    --active;
    res.set_content(envelope("[]"), "application/json");
  });
  auto d = http_descriptor(server.url());
  d.max_in_flight = 2;
  auto backend = make_backend(d);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { backend->complete("p"); });
  for (auto& t : threads) t.join();
  CHECK(peak <= 2);
  CHECK(peak >= 1);
}
