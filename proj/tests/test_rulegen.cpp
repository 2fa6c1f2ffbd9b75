#include <doctest.h>

#include <set>

#include "core/error.hpp"
#include "gen_minilang.hpp"
#include "harness/harness.hpp"
#include "rulegen/rulegen.hpp"

using namespace mutforge;
using namespace mutforge::rulegen;

namespace {

std::vector<MutationRecord> enumerate(const std::string& src, std::set<RuleOperator> ops,
                                      int line_start, int line_end) {
  auto unit = syntax::parse_mini_unit(src, "src/a.mini");
  REQUIRE(unit.ok());
  return enumerate_rule_mutants(unit, src, ops,
                                SourceLocation::make("src/a.mini", line_start, line_end));
}

std::vector<std::string> mutated(const std::vector<MutationRecord>& rs) {
  std::vector<std::string> out;
  for (const auto& r : rs) out.push_back(r.mutated_text);
  return out;
}

}  // namespace

TEST_CASE("operator tables") {
  CHECK(operator_replacements(RuleOperator::AOR, "+") ==
        std::vector<std::string>{"-", "*", "/", "%"});
  CHECK(operator_replacements(RuleOperator::AOR, "<").empty());
  CHECK(operator_replacements(RuleOperator::ROR, "<") == std::vector<std::string>{"<="});
  CHECK(operator_replacements(RuleOperator::ROR, "!=") == std::vector<std::string>{"=="});
  CHECK(operator_replacements(RuleOperator::LOR, "&&") == std::vector<std::string>{"||"});
  CHECK(literal_replacements("5") == std::vector<std::string>{"0", "1", "6", "4"});
  CHECK(literal_replacements("0") == std::vector<std::string>{"1", "-1"});
  CHECK(literal_replacements("1") == std::vector<std::string>{"0", "2"});
  CHECK(literal_replacements("true") == std::vector<std::string>{"false"});
  CHECK(literal_replacements("9223372036854775807") ==
        std::vector<std::string>{"0", "1", "9223372036854775806"});
}

TEST_CASE("operator names") {
  CHECK(parse_operators({"AOR", "SDL"}) == std::set<RuleOperator>{RuleOperator::AOR, RuleOperator::SDL});
  CHECK_THROWS_AS(parse_operators({"XYZ"}), Error);
  CHECK(all_operators().size() == 6);
}

TEST_CASE("AOR on an assignment") {
  const std::string src = "fn f(b, c) {\n  let a = 0;\n  a = b + c;\n}\n";
  auto rs = enumerate(src, {RuleOperator::AOR}, 3, 3);
  CHECK(mutated(rs) == std::vector<std::string>{"  a = b - c;", "  a = b * c;", "  a = b / c;",
                                                "  a = b % c;"});
  for (const auto& r : rs) {
    CHECK(r.origin == "AOR");
    CHECK(r.original_text == "  a = b + c;");
    CHECK(r.location == SourceLocation::make("src/a.mini", 3, 3));
  }
  CHECK(rs[0].id == "rule-1");
  CHECK(rs[3].id == "rule-4");
}

TEST_CASE("LVR on a boolean return") {
  auto rs = enumerate("fn f() -> bool {\n  return true;\n}\n", {RuleOperator::LVR}, 2, 2);
  CHECK(mutated(rs) == std::vector<std::string>{"  return false;"});
}

TEST_CASE("SDL keeps the line") {
  auto rs = enumerate("fn f() {\n  let x = 0;\n  x = 1;\n}\n", {RuleOperator::SDL}, 3, 3);
  CHECK(mutated(rs) == std::vector<std::string>{"  ;"});
  auto multi = enumerate("fn f() -> int {\n  return 1 +\n    2;\n}\n", {RuleOperator::SDL}, 2, 3);
  REQUIRE(multi.size() == 1);
  CHECK(multi[0].original_text == "  return 1 +\n    2;");
  CHECK(multi[0].mutated_text == "\n  ;");
}

TEST_CASE("UOI on conditions and returns") {
  const std::string src =
      "fn f(a) -> int {\n  if (a < 3) { return a; }\n  while (ok(a)) { a = a - 1; }\n"
      "  return a + 1;\n}\nfn ok(a) -> bool { return a > 0; }\n";
  auto rs = enumerate(src, {RuleOperator::UOI}, 1, 6);
  CHECK(mutated(rs) == std::vector<std::string>{
                           "  if (!(a < 3)) { return a; }",
                           "  if (a < 3) { return -a; }",
                           "  while (!ok(a)) { a = a - 1; }",
                           "  return -(a + 1);",
                           "fn ok(a) -> bool { return !(a > 0); }",
                       });
}

TEST_CASE("enumeration order, span filtering and determinism") {
  const std::string src =
      "fn f(a, b) -> int {\n  let c = a * 2;\n  if (c > b) {\n    return c;\n  }\n  return 0;\n}\n";
  auto rs = enumerate(src, all_operators(), 3, 5);
  std::vector<std::string> origins;
  for (const auto& r : rs) origins.push_back(r.origin);
  // Condition c > b: ROR then UOI; return c: SDL on the statement, UOI on c.
  CHECK(origins == std::vector<std::string>{"ROR", "UOI", "SDL", "UOI"});
  for (const auto& r : rs) {
    CHECK(r.location.line_start >= 3);
    CHECK(r.location.line_end <= 5);
  }
  auto again = enumerate(src, all_operators(), 3, 5);
  CHECK(mutated(again) == mutated(rs));
  CHECK(enumerate(src, {}, 1, 7).empty());
  CHECK(enumerate(src, all_operators(), 8, 8).empty());
}

TEST_CASE("line substitutions work on fragments") {
  CHECK(line_substitutions("  while (i < n) {") == std::vector<std::string>{"  while (i <= n) {"});
  CHECK(line_substitutions("x = -1;") == std::vector<std::string>{"x = -0;", "x = -2;"});
  CHECK(line_substitutions("} else {").empty());
  auto subs = line_substitutions("a = b && c;");
  CHECK(subs == std::vector<std::string>{"a = b || c;"});
}

TEST_CASE("property: rule mutants of well-typed programs still check") {
  mutforge::testing::MiniLangGen gen(31);
  std::size_t total = 0, sdl_return = 0;
  for (int i = 0; i < 60; ++i) {
    std::string src = gen.program(3);
    auto unit = syntax::parse_mini_unit(src, "src/a.mini");
    REQUIRE(unit.ok());
    int lines = static_cast<int>(split_lines(src).size());
    auto rs = enumerate_rule_mutants(unit, src, all_operators(),
                                     SourceLocation::make("src/a.mini", 1, lines));
    std::set<std::pair<SourceLocation, std::string>> seen;
    ProjectSnapshot project;
    project.files["src/a.mini"] = src;
    for (const auto& r : rs) {
      ++total;
      CHECK(r.mutated_text != r.original_text);
      CHECK_FALSE(token_equal(r.mutated_text, r.original_text));
      CHECK(seen.insert({r.location, r.mutated_text}).second);
      auto ws = harness::materialize(project, r);
      auto res = syntax::check_program({{"src/a.mini", ws.project.files.at("src/a.mini")}});
      if (!res.ok()) {
        INFO(r.origin, ": ", r.original_text, " -> ", r.mutated_text, " : ", res.diagnostics[0].message);
        CHECK(r.origin == "SDL");
        CHECK(r.original_text.find("return") != std::string::npos);
        CHECK(res.diagnostics[0].kind == "missing-return");
        ++sdl_return;
      }
    }
  }
  CHECK(total > 500);
  CHECK(sdl_return > 0);
}
