#include "study/study.hpp"

#include <algorithm>
#include <json.hpp>
#include <regex>

#include "core/error.hpp"
#include "core/serialize.hpp"
#include "metrics/metrics.hpp"
#include "syntax/minilang.hpp"

namespace mutforge::study {

namespace fs = std::filesystem;

const char* to_string(ErrorType t) noexcept {
  switch (t) {
    case ErrorType::UnknownMethod: return "UnknownMethod";
    case ErrorType::StructuralDestruction: return "StructuralDestruction";
    case ErrorType::IncorrectMethodParameters: return "IncorrectMethodParameters";
    case ErrorType::UnknownVariable: return "UnknownVariable";
    case ErrorType::UnknownType: return "UnknownType";
    case ErrorType::TypeMismatch: return "TypeMismatch";
    case ErrorType::IncorrectInitialization: return "IncorrectInitialization";
    case ErrorType::IncorrectLocation: return "IncorrectLocation";
    case ErrorType::IncorrectExceptions: return "IncorrectExceptions";
    case ErrorType::Unclassified: return "Unclassified";
  }
  return "?";
}

const std::vector<ErrorType>& all_error_types() {
  static const std::vector<ErrorType> all = {
      ErrorType::UnknownMethod,         ErrorType::StructuralDestruction,
      ErrorType::IncorrectMethodParameters, ErrorType::UnknownVariable,
      ErrorType::UnknownType,           ErrorType::TypeMismatch,
      ErrorType::IncorrectInitialization, ErrorType::IncorrectLocation,
      ErrorType::IncorrectExceptions,   ErrorType::Unclassified};
  return all;
}

std::optional<ErrorType> error_type_from_string(std::string_view s) noexcept {
  for (auto t : all_error_types()) {
    if (s == to_string(t)) return t;
  }
  return std::nullopt;
}

const std::vector<ClassifierRule>& minilang_rules() {
  namespace d = syntax::diag;
  static const std::vector<ClassifierRule> rules = {
      {ErrorType::UnknownMethod, std::string(d::kUnknownFunction), {}},
      {ErrorType::StructuralDestruction, std::string(d::kParseError), {}},
      {ErrorType::StructuralDestruction, std::string(d::kLexError), {}},
      {ErrorType::StructuralDestruction, std::string(d::kNotAStatement), {}},
      {ErrorType::StructuralDestruction, std::string(d::kMissingReturn), {}},
      {ErrorType::IncorrectMethodParameters, std::string(d::kArity), {}},
      {ErrorType::UnknownVariable, std::string(d::kUnknownVariable), {}},
      {ErrorType::UnknownType, std::string(d::kUnknownType), {}},
      {ErrorType::TypeMismatch, std::string(d::kTypeError), {}},
      {ErrorType::IncorrectInitialization, std::string(d::kRedeclared), {}},
      {ErrorType::IncorrectInitialization, std::string(d::kDuplicateFunction), {}},
      {ErrorType::IncorrectLocation, std::string(d::kUnreachable), {}},
  };
  return rules;
}

const std::vector<ClassifierRule>& javac_rules() {
  static const std::vector<ClassifierRule> rules = {
      {ErrorType::UnknownMethod, {}, R"(symbol:\s+method|cannot find symbol.*method)"},
      {ErrorType::IncorrectExceptions, {}, R"(unreported exception|exception \S+ is never thrown)"},
      {ErrorType::IncorrectMethodParameters, {},
       R"(cannot be applied to given types|actual and formal argument lists differ|no suitable (method|constructor) found)"},
      {ErrorType::UnknownVariable, {}, R"(symbol:\s+variable)"},
      {ErrorType::UnknownType, {}, R"(symbol:\s+class|cannot find symbol.*class)"},
      {ErrorType::TypeMismatch, {}, R"(incompatible types|bad operand types?|possible lossy conversion)"},
      {ErrorType::IncorrectInitialization, {},
       R"(might not have been initialized|is already defined|might already have been assigned)"},
      {ErrorType::IncorrectLocation, {}, R"(unreachable statement|missing return statement)"},
      {ErrorType::StructuralDestruction, {},
       R"(expected|illegal start of|not a statement|reached end of file|unclosed|orphaned)"},
  };
  return rules;
}

ErrorType classify_compile_error(const std::vector<Diagnostic>& diags,
                                 const std::vector<ClassifierRule>& rules) {
  if (diags.empty()) {
    throw Error(ErrorCode::InvalidArgument, "cannot classify a compile error without diagnostics");
  }
  for (const auto& rule : rules) {
    std::optional<std::regex> re;
    if (!rule.pattern.empty()) {
      try {
        re.emplace(rule.pattern, std::regex::ECMAScript);
      } catch (const std::regex_error& e) {
        throw Error(ErrorCode::Config, "error rule pattern '" + rule.pattern + "': " + e.what());
      }
    }
    for (const auto& d : diags) {
      if (!rule.kind.empty() && d.kind != rule.kind) continue;
      if (re && !std::regex_search(d.message, *re)) continue;
      return rule.type;
    }
  }
  return ErrorType::Unclassified;
}

std::map<std::string, ErrorType> classify_pool_errors(const MutationPool& pool,
                                                      const std::vector<ClassifierRule>& rules) {
  std::map<std::string, ErrorType> out;
  for (const auto& r : pool.records) {
    if (r.status.kind != StatusKind::NonCompilable) continue;
    out[r.id] = r.status.diagnostics.empty()
                    ? ErrorType::Unclassified
                    : classify_compile_error(r.status.diagnostics, rules);
  }
  return out;
}

// ---- origin nodes ------------------------------------------------------------

namespace {

// Byte offset where 1-based `line` starts.
std::optional<std::size_t> line_offset(std::string_view text, int line) {
  std::size_t pos = 0;
  for (int l = 1; l < line; ++l) {
    pos = text.find('\n', pos);
    if (pos == std::string_view::npos) return std::nullopt;
    ++pos;
  }
  return pos;
}

std::optional<syntax::NodeKind> origin_in(const syntax::ParsedUnit& unit, std::string_view text,
                                          const MutationRecord& r) {
  auto base = line_offset(text, r.location.line_start);
  if (!base) return std::nullopt;
  const std::string& a = r.original_text;
  const std::string& b = r.mutated_text;
  std::size_t prefix = 0;
  while (prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) ++prefix;
  std::size_t suffix = 0;
  while (suffix < a.size() - prefix && suffix < b.size() - prefix &&
         a[a.size() - 1 - suffix] == b[b.size() - 1 - suffix]) {
    ++suffix;
  }
  // Changed bytes of the original: [lo, hi).
  std::size_t lo = *base + prefix;
  std::size_t hi = *base + a.size() - suffix;
  const auto& toks = unit.tokens;
  if (toks.empty()) return std::nullopt;
  std::size_t first = toks.size(), last = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    std::size_t tb = toks[i].offset, te = tb + toks[i].text.size();
    if (te > lo && tb < hi) {
      first = std::min(first, i);
      last = std::max(last, i + 1);
    }
  }
  if (first == toks.size()) {
    // Pure insertion: the tokens on both sides of the insertion point.
    std::size_t next = 0;
    while (next < toks.size() && toks[next].offset < hi) ++next;
    first = next > 0 ? next - 1 : 0;
    last = std::min(next + 1, toks.size());
  }
  auto node = unit.tree.innermost_covering(first, last);
  if (node == syntax::kNoNode) return std::nullopt;
  return unit.tree.node(node).kind;
}

}  // namespace

std::optional<syntax::NodeKind> origin_node(const MutationRecord& r, const ProjectSnapshot& fixed) {
  const std::string* text = fixed.file(r.location.file);
  if (!text) return std::nullopt;
  auto unit = syntax::parse_mini_unit(*text, r.location.file);
  if (!unit.ok()) return std::nullopt;
  return origin_in(unit, *text, r);
}

std::map<syntax::NodeKind, std::size_t> origin_node_counts(const MutationPool& pool,
                                                           const ProjectSnapshot& fixed) {
  std::map<std::string, std::optional<syntax::ParsedUnit>> units;
  std::map<syntax::NodeKind, std::size_t> out;
  for (const auto& r : pool.records) {
    if (r.status.kind != StatusKind::NonCompilable) continue;
    const std::string* text = fixed.file(r.location.file);
    if (!text) continue;
    auto it = units.find(r.location.file);
    if (it == units.end()) {
      auto unit = syntax::parse_mini_unit(*text, r.location.file);
      it = units.emplace(r.location.file,
                         unit.ok() ? std::optional(std::move(unit)) : std::nullopt).first;
    }
    if (!it->second) continue;
    if (auto k = origin_in(*it->second, *text, r)) ++out[*k];
  }
  return out;
}

std::map<syntax::NodeKind, double> origin_node_distribution(const MutationPool& pool,
                                                            const ProjectSnapshot& fixed) {
  return fractions(origin_node_counts(pool, fixed));
}

// ---- bug cases ---------------------------------------------------------------

namespace {

Error fixture_error(const fs::path& dir, const std::string& what) {
  return Error(ErrorCode::FixtureInvalid, "bug case " + dir.string() + ": " + what);
}

}  // namespace

BugCase read_bug_case(const fs::path& dir) {
  for (const char* part : {"fixed", "buggy", "tests"}) {
    if (!fs::is_directory(dir / part)) throw fixture_error(dir, std::string("missing ") + part + "/");
  }
  if (!fs::is_regular_file(dir / "bug.json")) throw fixture_error(dir, "missing bug.json");
  BugCase bug;
  bug.id = dir.filename().string();
  if (bug.id.empty()) bug.id = dir.parent_path().filename().string();
  bug.fixed = harness::load_snapshot(dir / "fixed");
  bug.buggy = harness::load_snapshot(dir / "buggy");
  for (const auto& [rel, text] : harness::load_snapshot(dir / "tests").files) {
    bug.fixed.files["tests/" + rel] = text;
    bug.buggy.files["tests/" + rel] = text;
  }
  json j = json::parse(read_file(dir / "bug.json"), nullptr, false);
  auto bad = [&](const std::string& what) {
    return Error(ErrorCode::Parse, (dir / "bug.json").string() + ": " + what);
  };
  if (j.is_discarded() || !j.is_object()) throw bad("not a JSON object");
  if (!j.contains("location")) throw bad("missing 'location'");
  try {
    bug.bug_location = location_from_json(j["location"]);
  } catch (const Error& e) {
    throw bad(std::string("location: ") + e.what());
  }
  if (!j.contains("triggering_tests") || !j["triggering_tests"].is_array()) {
    throw bad("'triggering_tests' must be an array of test ids");
  }
  for (const auto& t : j["triggering_tests"]) {
    if (!t.is_string()) throw bad("'triggering_tests' must be an array of test ids");
    bug.triggering_tests.insert(t.get<std::string>());
  }
  if (bug.triggering_tests.empty()) throw fixture_error(dir, "no triggering tests");
  const std::string* fixed_file = bug.fixed.file(bug.bug_location.file);
  if (!fixed_file || !bug.buggy.file(bug.bug_location.file)) {
    throw fixture_error(dir, "bug file " + bug.bug_location.file + " missing from fixed/ or buggy/");
  }
  if (static_cast<std::size_t>(bug.bug_location.line_end) > split_lines(*fixed_file).size()) {
    throw fixture_error(dir, "bug location " + to_string(bug.bug_location) + " is past the end of the file");
  }
  return bug;
}

void validate_bug_case(const BugCase& bug, harness::ToolchainAdapter& adapter) {
  auto bad = [&](const std::string& what) {
    return Error(ErrorCode::FixtureInvalid, "bug case " + bug.id + ": " + what);
  };
  harness::Workspace fixed{bug.fixed, {}};
  harness::Workspace buggy{bug.buggy, {}};
  for (auto* ws : {&fixed, &buggy}) {
    auto c = adapter.check(*ws);
    if (!c.ok) {
      std::string msg = c.diagnostics.empty() ? "" : ": " + c.diagnostics.front().message;
      throw bad(std::string(ws == &fixed ? "fixed" : "buggy") + " version does not compile" + msg);
    }
  }
  auto listed = adapter.list_tests(fixed);
  std::vector<std::string> tests(bug.triggering_tests.begin(), bug.triggering_tests.end());
  for (const auto& t : tests) {
    if (std::find(listed.begin(), listed.end(), t) == listed.end()) {
      throw bad("triggering test '" + t + "' does not exist");
    }
  }
  auto on_fixed = adapter.run_tests(fixed, tests, 10.0);
  auto on_buggy = adapter.run_tests(buggy, tests, 10.0);
  for (std::size_t i = 0; i < tests.size(); ++i) {
    if (on_fixed.at(i).verdict != Verdict::Pass) {
      throw bad("triggering test '" + tests[i] + "' does not pass on the fixed version (" +
                to_string(on_fixed.at(i).verdict) + ")");
    }
    if (!is_kill_verdict(on_buggy.at(i).verdict)) {
      throw bad("triggering test '" + tests[i] + "' does not fail on the buggy version");
    }
  }
}

BugCase load_bug_case(const fs::path& dir, harness::ToolchainAdapter& adapter) {
  BugCase bug = read_bug_case(dir);
  validate_bug_case(bug, adapter);
  return bug;
}

std::vector<fs::path> discover_bug_cases(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw Error(ErrorCode::Io, "bug case directory " + root.string() + " does not exist");
  }
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::is_regular_file(e.path() / "bug.json")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

// Source text of the test functions (test_*) that call `function`.
std::string tests_calling(const ProjectSnapshot& project, const std::string& function) {
  std::string out;
  std::string all;
  for (const auto& [path, text] : project.files) {
    if (path.rfind("tests/", 0) != 0) continue;
    all += text;
    if (!all.empty() && all.back() != '\n') all += "\n";
    auto unit = syntax::parse_mini_unit(text, path);
    if (!unit.ok()) continue;
    for (const auto& sig : unit.functions) {
      if (sig.name.rfind("test_", 0) != 0) continue;
      const auto& n = unit.tree.node(sig.node);
      bool calls = false;
      for (std::size_t i = n.token_begin; i + 1 < n.token_end; ++i) {
        if (unit.tokens[i].text == function && unit.tokens[i + 1].text == "(") calls = true;
      }
      if (calls) out += line_span(text, n.line_begin, n.line_end) + "\n";
    }
  }
  return out.empty() ? all : out;
}

}  // namespace

BugContext extract_context(const BugCase& bug, int context_length) {
  if (context_length < 1 || context_length > 3) {
    throw Error(ErrorCode::InvalidArgument,
                "context length must be 1, 2 or 3, got " + std::to_string(context_length));
  }
  const std::string& file = bug.bug_location.file;
  const std::string* text = bug.fixed.file(file);
  if (!text) throw Error(ErrorCode::FixtureInvalid, "bug case " + bug.id + ": missing " + file);
  auto lines = split_lines(*text);
  int bug_line = bug.bug_location.line_start;

  BugContext ctx;
  int body_first = 1, body_last = static_cast<int>(lines.size());
  auto unit = syntax::parse_mini_unit(*text, file);
  if (unit.ok()) {
    const syntax::FunctionSig* best = nullptr;
    for (const auto& sig : unit.functions) {
      const auto& n = unit.tree.node(sig.node);
      if (n.line_begin <= bug_line && bug_line <= n.line_end) best = &sig;
    }
    if (!best) {
      throw Error(ErrorCode::FixtureInvalid,
                  "bug case " + bug.id + ": no function encloses line " + std::to_string(bug_line));
    }
    const auto& n = unit.tree.node(best->node);
    ctx.function = SourceLocation::make(file, n.line_begin, n.line_end);
    ctx.function_name = best->name;
    if (n.line_end - n.line_begin >= 2) {
      body_first = n.line_begin + 1;
      body_last = n.line_end - 1;
    } else {
      body_first = n.line_begin;
      body_last = n.line_end;
    }
  } else {
    // Not MiniLang: the whole file stands in for the function.
    ctx.function = SourceLocation::make(file, 1, std::max(1, static_cast<int>(lines.size())));
  }
  ctx.function_text = line_span(*text, ctx.function.line_start, ctx.function.line_end);

  int first = bug_line - (context_length - 1) / 2;
  int last = first + context_length - 1;
  first = std::max(first, body_first);
  last = std::min(last, body_last);
  if (first > bug_line) first = bug_line;
  if (last < bug_line) last = bug_line;
  ctx.target = SourceLocation::make(file, first, last);
  ctx.target_text = line_span(*text, first, last);
  ctx.unit_tests = tests_calling(bug.fixed, ctx.function_name);
  return ctx;
}

// ---- subsampling -------------------------------------------------------------

std::vector<MutationPool> equal_count_subsample(const std::vector<MutationPool>& pools,
                                                std::uint64_t seed) {
  if (pools.empty()) return {};
  std::size_t n = pools.front().records.size();
  for (std::size_t i = 0; i < pools.size(); ++i) {
    if (pools[i].records.empty()) {
      throw Error(ErrorCode::InvalidArgument,
                  "pool " + std::to_string(i) + " (" + pools[i].generator_id + ") is empty");
    }
    n = std::min(n, pools[i].records.size());
  }
  std::vector<MutationPool> out;
  for (std::size_t i = 0; i < pools.size(); ++i) {
    const auto& p = pools[i];
    std::vector<std::string> idx;
    for (std::size_t k = 0; k < p.records.size(); ++k) idx.push_back(std::to_string(k));
    metrics::SamplingPlan plan;
    plan.population = p.records.size();
    plan.n = n;
    plan.seed = seed + i;
    MutationPool sub;
    sub.project_id = p.project_id;
    sub.generator_id = p.generator_id;
    for (const auto& k : metrics::draw_sample(idx, plan)) {
      sub.records.push_back(p.records[std::stoul(k)]);
    }
    out.push_back(std::move(sub));
  }
  return out;
}

}  // namespace mutforge::study
