#include <doctest.h>

#include <random>

#include "core/error.hpp"
#include "fixture_util.hpp"
#include "harness/harness.hpp"
#include "harness/interpreter.hpp"
#include "syntax/minilang.hpp"

using namespace mutforge;
using namespace mutforge::harness;
using mutforge::testing::fixture_project;
using mutforge::testing::line_mutant;

namespace {

std::shared_ptr<const syntax::CheckedProgram> program(const std::string& src) {
  auto res = syntax::check_program({{"src/p.mini", src}});
  REQUIRE_MESSAGE(res.ok(), (res.ok() ? "" : res.diagnostics[0].message));
  return res.program;
}

RunResult run(const std::string& src, const std::string& fn, std::vector<std::int64_t> args,
              std::int64_t* out = nullptr, std::uint64_t fuel = 100000) {
  auto p = program(src);
  Interpreter interp(*p, fuel);
  return interp.call(fn, args, out);
}

std::int64_t value(const std::string& src, const std::string& fn, std::vector<std::int64_t> args) {
  std::int64_t v = 0;
  auto r = run(src, fn, std::move(args), &v);
  REQUIRE(r.verdict == Verdict::Pass);
  return v;
}

}  // namespace

TEST_CASE("interpreter: arithmetic, control flow and calls") {
  const std::string src = R"(
fn fact(n) -> int {
  if (n <= 1) { return 1; }
  return n * fact(n - 1);
}
fn sum_to(n) -> int {
  let s = 0;
  let i = 1;
  while (i <= n) { s = s + i; i = i + 1; }
  return s;
}
fn twice(x) -> int { return x * 2; }
fn recv(x) -> int { return x.twice(); }
fn pick(a, b) -> int { return math.max(a, b) - math.min(a, b) + math.abs(-3); }
fn logic(a: bool, b: bool) -> bool { return a && !b || !a && b; }
fn shadow(x) -> int {
  let y = 1;
  if (x > 0) { let y = 10; x = x + y; }
  return x + y;
}
fn divs(a, b) -> int { return a / b * 100 + a % b; }
)";
  CHECK(value(src, "fact", {10}) == 3628800);
  CHECK(value(src, "sum_to", {100}) == 5050);
  CHECK(value(src, "recv", {21}) == 42);
  CHECK(value(src, "pick", {4, 9}) == 8);
  CHECK(value(src, "logic", {1, 0}) == 1);
  CHECK(value(src, "logic", {1, 1}) == 0);
  CHECK(value(src, "shadow", {5}) == 16);
  CHECK(value(src, "shadow", {-5}) == -4);
  CHECK(value(src, "divs", {-7, 2}) == -301);
}

TEST_CASE("interpreter: integers wrap at 64 bits") {
  const std::string src = "fn f() -> bool { return math.maxint + 1 == math.minint; }\n"
                          "fn g() -> int { return math.minint / -1; }\n";
  CHECK(value(src, "f", {}) == 1);
  CHECK(value(src, "g", {}) == std::numeric_limits<std::int64_t>::min());
}

TEST_CASE("interpreter: failure verdicts") {
  const std::string src = R"(
fn boom(a) -> int { return 10 / a; }
fn down(n) -> int { return down(n + 1); }
fn spin() { while (true) { ; } }
fn check(v) { assert(v > 0); }
)";
  CHECK(run(src, "boom", {0}).verdict == Verdict::Crash);
  CHECK(run(src, "down", {0}).verdict == Verdict::Crash);
  auto t = run(src, "spin", {}, nullptr, 5000);
  CHECK(t.verdict == Verdict::Timeout);
  CHECK(t.steps == 5001);
  CHECK(run(src, "check", {0}).verdict == Verdict::Fail);
  CHECK(run(src, "check", {1}).verdict == Verdict::Pass);
  CHECK_THROWS_AS(run(src, "nope", {}), Error);
}

TEST_CASE("interpreter: step counts are deterministic") {
  const std::string src = "fn f(n) -> int { let s = 0; while (n > 0) { s = s + n; n = n - 1; } return s; }";
  auto a = run(src, "f", {50});
  auto b = run(src, "f", {50});
  CHECK(a.steps == b.steps);
  CHECK(a.steps > 50);
}

TEST_CASE("materialize") {
  ProjectSnapshot p;
  p.files["src/a.mini"] = "fn f() -> int {\n  return 1 + 2;\n}\n";
  p.files["src/b.mini"] = "fn g() -> int { return 0; }\n";
  MutationRecord m = line_mutant(p, "m1", "src/a.mini", 2, "  return 1 - 2;");

  auto ws = materialize(p, m);
  CHECK(ws.applied == "m1");
  CHECK(ws.project.files.at("src/b.mini") == p.files.at("src/b.mini"));
  CHECK(ws.project.files.at("src/a.mini") == "fn f() -> int {\n  return 1 - 2;\n}\n");
  auto before = split_lines(p.files.at("src/a.mini"));
  auto after = split_lines(ws.project.files.at("src/a.mini"));
  REQUIRE(before.size() == after.size());
  int changed = 0;
  for (std::size_t i = 0; i < before.size(); ++i) changed += before[i] != after[i];
  CHECK(changed == 1);
  CHECK(materialize(p, m).project == ws.project);

  SUBCASE("stale original text") {
    m.original_text = "  return 1 + 3;";
    try {
      materialize(p, m);
      FAIL("expected staleness error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Stale);
    }
  }
  SUBCASE("crlf files keep their line endings") {
    p.files["src/a.mini"] = "fn f() -> int {\r\n  return 1 + 2;\r\n}\r\n";
    m.original_text = "  return 1 + 2;\r\n";
    auto w = materialize(p, m);
    CHECK(w.project.files.at("src/a.mini") == "fn f() -> int {\r\n  return 1 - 2;\r\n}\r\n");
  }
  SUBCASE("unknown file or line") {
    m.location.file = "src/zzz.mini";
    CHECK_THROWS_AS(materialize(p, m), Error);
    m.location = SourceLocation::make("src/a.mini", 9, 9);
    CHECK_THROWS_AS(materialize(p, m), Error);
  }
}

TEST_CASE("screen_compile on the minilang adapter") {
  auto p = fixture_project("bug-001");
  auto adapter = make_minilang_adapter();
  std::vector<MutationRecord> ms = {
      line_mutant(p, "ok", "src/counter.mini", 8, "      count = count - 1;"),
      line_mutant(p, "unknown", "src/counter.mini", 8, "      count = gx(count);"),
      line_mutant(p, "brace", "src/counter.mini", 8, "      count = count + 1; {"),
  };
  std::vector<const MutationRecord*> ptrs;
  for (auto& m : ms) ptrs.push_back(&m);
  auto res = screen_compile(*adapter, p, ptrs, 2);
  REQUIRE(res.size() == 3);
  CHECK(res.at("ok").ok);
  REQUIRE_FALSE(res.at("unknown").ok);
  CHECK(res.at("unknown").diagnostics[0].kind == "unknown-function");
  CHECK(res.at("unknown").diagnostics[0].location.file == "src/counter.mini");
  REQUIRE_FALSE(res.at("brace").ok);
  CHECK(res.at("brace").diagnostics[0].kind == "parse-error");
}

namespace {

class ThrowingAdapter final : public ToolchainAdapter {
 public:
  std::string name() const override { return "throwing"; }
  bool concurrent() const override { return false; }
  CompileOutcome check(const Workspace&) override { throw std::runtime_error("compiler died"); }
  std::vector<std::string> list_tests(const Workspace&) override { return {}; }
  std::vector<TestOutcome> run_tests(const Workspace&, const std::vector<std::string>& tests,
                                     double) override {
    std::vector<TestOutcome> out;
    for (const auto& t : tests) {
      Verdict v = t == "flaky" && (calls_++ % 2) ? Verdict::Fail : Verdict::Pass;
      out.push_back({t, v, 0.01});
    }
    return out;
  }
  int calls_ = 0;
};

}  // namespace

TEST_CASE("adapter failures") {
  auto p = fixture_project("bug-001");
  ThrowingAdapter adapter;
  auto m = line_mutant(p, "m", "src/counter.mini", 8, "      count = count - 1;");
  auto res = screen_compile(adapter, p, {&m});
  REQUIRE_FALSE(res.at("m").ok);
  CHECK(res.at("m").diagnostics[0].kind == "toolchain-crash");

  try {
    build_kill_matrix(adapter, p, {&m}, {"steady", "flaky"});
    FAIL("expected flaky error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Flaky);
    CHECK(std::string(e.what()).find("flaky") != std::string::npos);
  }
}

namespace {

struct FixtureRun {
  ProjectSnapshot project;
  std::vector<MutationRecord> mutants;
  std::vector<std::string> tests;
};

// bug-001 with four hand-written viable mutants: the seeded bug itself, a
// wrong increment, a broken is_even (kills only test_count_even) and an
// equivalent loop condition.
FixtureRun counter_fixture() {
  FixtureRun f;
  f.project = fixture_project("bug-001");
  f.mutants = {
      line_mutant(f.project, "bug", "src/counter.mini", 7, "    if (i <= limit) {"),
      line_mutant(f.project, "inc", "src/counter.mini", 8, "      count = count + 2;"),
      line_mutant(f.project, "even", "src/counter.mini", 16, "  return n % 2 == 1;"),
      line_mutant(f.project, "equiv", "src/counter.mini", 6, "  while (i != x) {"),
  };
  auto adapter = make_minilang_adapter();
  f.tests = adapter->list_tests(Workspace{f.project, {}});
  return f;
}

std::vector<const MutationRecord*> ptrs(const std::vector<MutationRecord>& ms) {
  std::vector<const MutationRecord*> out;
  for (const auto& m : ms) out.push_back(&m);
  return out;
}

}  // namespace

TEST_CASE("kill matrix on the counter fixture") {
  auto f = counter_fixture();
  CHECK(f.tests == std::vector<std::string>{"test_below_limit", "test_at_limit", "test_zero",
                                            "test_count_even"});
  auto adapter = make_minilang_adapter();
  auto run = build_kill_matrix(*adapter, f.project, ptrs(f.mutants), f.tests);
  const auto& m = run.matrix;
  CHECK(run.excluded.empty());
  CHECK(run.timeout == doctest::Approx(1.0));
  for (std::size_t t = 0; t < f.tests.size(); ++t) CHECK(m.baseline(t) == Verdict::Pass);

  CHECK(m.killing_tests(0) == std::set<std::string>{"test_at_limit"});
  CHECK(m.killing_tests(1) == std::set<std::string>{"test_below_limit", "test_at_limit"});
  CHECK(m.killing_tests(2) == std::set<std::string>{"test_count_even"});
  CHECK(m.killing_tests(3).empty());
  CHECK(mutation_score(m) == doctest::Approx(0.75));

  SUBCASE("parallel and serial runs agree") {
    ExecOptions opts;
    opts.workers = 4;
    CHECK(build_kill_matrix(*adapter, f.project, ptrs(f.mutants), f.tests, opts).matrix == m);
  }
  SUBCASE("reruns are identical") {
    CHECK(build_kill_matrix(*adapter, f.project, ptrs(f.mutants), f.tests).matrix == m);
  }
}

TEST_CASE("kill matrix: deletion and infinite loops") {
  auto p = fixture_project("bug-001");
  std::vector<MutationRecord> ms = {
      line_mutant(p, "sdl", "src/counter.mini", 8, "      ;"),
      line_mutant(p, "loop", "src/counter.mini", 10, "    i = i + 0;"),
  };
  auto adapter = make_minilang_adapter();
  auto tests = adapter->list_tests(Workspace{p, {}});
  ExecOptions opts;
  opts.timeout = 0.05;
  auto run = build_kill_matrix(*adapter, p, ptrs(ms), tests, opts);
  CHECK(run.matrix.killing_tests(0) == std::set<std::string>{"test_below_limit", "test_at_limit"});
  CHECK(run.matrix.cell(1, 0) == Verdict::Timeout);
  CHECK(run.matrix.cell(1, 2) == Verdict::Pass);  // x = 0 never enters the loop
  CHECK(run.matrix.killed(1));
}

TEST_CASE("failing baseline tests are excluded with a warning") {
  auto p = fixture_project("bug-001", /*buggy=*/true);
  auto adapter = make_minilang_adapter();
  auto tests = adapter->list_tests(Workspace{p, {}});
  std::vector<std::string> warnings;
  ExecOptions opts;
  opts.warn = [&](const std::string& w) { warnings.push_back(w); };
  auto m = line_mutant(p, "m", "src/counter.mini", 7, "    if (i < limit) {");
  auto run = build_kill_matrix(*adapter, p, {&m}, tests, opts);
  CHECK(run.excluded == std::vector<std::string>{"test_at_limit"});
  CHECK(warnings.size() == 1);
  // The fixing mutant makes test_at_limit pass; it still kills nothing.
  CHECK_FALSE(run.matrix.killed(0));
}

TEST_CASE("mutation score edge cases") {
  KillMatrix empty;
  CHECK_THROWS_AS(mutation_score(empty), Error);
  KillMatrix all({"a", "b"}, {"t"});
  all.set_baseline(0, Verdict::Pass);
  all.set_cell(0, 0, Verdict::Fail);
  all.set_cell(1, 0, Verdict::Crash);
  CHECK(mutation_score(all) == 1.0);
  all.set_cell(0, 0, Verdict::Pass);
  all.set_cell(1, 0, Verdict::Pass);
  CHECK(mutation_score(all) == 0.0);
}

TEST_CASE("property: killed under T implies killed under any superset of T") {
  std::mt19937_64 rng(5);
  const Verdict vs[] = {Verdict::Pass, Verdict::Fail, Verdict::Timeout, Verdict::Crash};
  for (int iter = 0; iter < 200; ++iter) {
    std::size_t nm = 1 + rng() % 8, nt = 1 + rng() % 8;
    std::vector<std::string> ms, ts;
    for (std::size_t i = 0; i < nm; ++i) ms.push_back("m" + std::to_string(i));
    for (std::size_t i = 0; i < nt; ++i) ts.push_back("t" + std::to_string(i));
    KillMatrix m(ms, ts);
    for (std::size_t t = 0; t < nt; ++t) m.set_baseline(t, rng() % 4 ? Verdict::Pass : Verdict::Fail);
    for (std::size_t i = 0; i < nm; ++i) {
      for (std::size_t t = 0; t < nt; ++t) m.set_cell(i, t, vs[rng() % 4]);
    }
    std::set<std::string> small, big;
    for (const auto& t : ts) {
      if (rng() % 2) small.insert(t);
    }
    big = small;
    for (const auto& t : ts) {
      if (rng() % 2) big.insert(t);
    }
    auto ms_small = m.restrict_tests(small);
    auto ms_big = m.restrict_tests(big);
    for (std::size_t i = 0; i < nm; ++i) {
      if (ms_small.killed(i)) CHECK(ms_big.killed(i));
    }
  }
}

TEST_CASE("subprocess adapter") {
  ProjectSnapshot p;
  p.files["value.txt"] = "42\n";
  p.files["check.sh"] = "grep -q '^[0-9]*$' value.txt || { echo 'value.txt: not a number'; exit 1; }\n";
  p.files["test.sh"] =
      "case \"$1\" in\n"
      "  equal) test \"$(cat value.txt)\" = 42 ;;\n"
      "  positive) test \"$(cat value.txt)\" -gt 0 ;;\n"
      "  hang) sleep 5 ;;\n"
      "  crash) kill -SEGV $$ ;;\n"
      "esac\n";
  SubprocessConfig cfg;
  cfg.check_cmd = "sh check.sh";
  cfg.test_cmd = "sh test.sh {test_id}";
  cfg.list_tests_cmd = "printf 'equal\\npositive\\n'";
  auto adapter = make_subprocess_adapter(cfg);
  Workspace base{p, {}};
  CHECK(adapter->check(base).ok);
  CHECK(adapter->list_tests(base) == std::vector<std::string>{"equal", "positive"});

  auto out = adapter->run_tests(base, {"equal", "positive", "hang", "crash"}, 0.5);
  REQUIRE(out.size() == 4);
  CHECK(out[0].verdict == Verdict::Pass);
  CHECK(out[1].verdict == Verdict::Pass);
  CHECK(out[2].verdict == Verdict::Timeout);
  CHECK(out[2].wall_time < 3.0);
  CHECK(out[3].verdict == Verdict::Crash);

  auto m = line_mutant(p, "m1", "value.txt", 1, "7");
  auto bad = line_mutant(p, "m2", "value.txt", 1, "x7");
  auto res = screen_compile(*adapter, p, {&m, &bad}, 2);
  CHECK(res.at("m1").ok);
  REQUIRE_FALSE(res.at("m2").ok);
  CHECK(res.at("m2").diagnostics[0].message == "value.txt: not a number");

  auto run = build_kill_matrix(*adapter, p, {&m}, {"equal", "positive"});
  CHECK(run.matrix.killing_tests(0) == std::set<std::string>{"equal"});
}
