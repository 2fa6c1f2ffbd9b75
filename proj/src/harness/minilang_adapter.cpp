#include <cmath>

#include "harness/harness.hpp"
#include "harness/interpreter.hpp"
#include "syntax/minilang.hpp"

namespace mutforge::harness {

namespace {

bool is_source(const std::string& path) {
  return path.size() > 5 && path.compare(path.size() - 5, 5, ".mini") == 0;
}

syntax::CheckResult check_workspace(const Workspace& ws) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& [path, text] : ws.project.files) {
    if (is_source(path)) files.emplace_back(path, text);
  }
  return syntax::check_program(files);
}

class MiniLangAdapter final : public ToolchainAdapter {
 public:
  std::string name() const override { return "minilang"; }
  bool concurrent() const override { return true; }

  CompileOutcome check(const Workspace& ws) override {
    auto res = check_workspace(ws);
    if (res.ok()) return CompileOutcome::success();
    std::vector<Diagnostic> diags;
    for (const auto& d : res.diagnostics) {
      std::string file = d.file.empty() ? "<unknown>" : d.file;
      diags.push_back({d.kind, std::to_string(d.line) + ":" + std::to_string(d.column) + ": " + d.message,
                       SourceLocation{file, d.line, d.line}});
    }
    return CompileOutcome::failure(std::move(diags));
  }

  std::vector<std::string> list_tests(const Workspace& ws) override {
    auto res = check_workspace(ws);
    if (!res.ok()) return {};
    return list_minilang_tests(*res.program);
  }

  std::vector<TestOutcome> run_tests(const Workspace& ws, const std::vector<std::string>& tests,
                                     double timeout_seconds) override {
    std::vector<TestOutcome> out;
    auto res = check_workspace(ws);
    auto fuel = static_cast<std::uint64_t>(std::ceil(timeout_seconds * kStepsPerSecond));
    for (const auto& id : tests) {
      TestOutcome o{id, Verdict::NotRun, 0.0};
      if (!res.ok()) {
        o.verdict = Verdict::Crash;
      } else if (auto it = res.program->functions.find(id); it != res.program->functions.end() &&
                                                            it->second.sig->param_names.empty()) {
        Interpreter interp(*res.program, fuel);
        RunResult r = interp.call(id, {});
        o.verdict = r.verdict;
        o.wall_time = r.nominal_seconds();
      }
      out.push_back(std::move(o));
    }
    return out;
  }
};

}  // namespace

std::unique_ptr<ToolchainAdapter> make_minilang_adapter() {
  return std::make_unique<MiniLangAdapter>();
}

}  // namespace mutforge::harness
