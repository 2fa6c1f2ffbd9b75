#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "core/model.hpp"
#include "syntax/minilang.hpp"

namespace mutforge::harness {

/// Interpreter steps per nominal second. Timeouts and reported test wall
/// times are measured in steps so verdicts do not depend on machine load.
inline constexpr double kStepsPerSecond = 1e6;
inline constexpr int kMaxCallDepth = 256;

struct RunResult {
  Verdict verdict = Verdict::NotRun;
  std::uint64_t steps = 0;
  std::string message;  // failure detail, empty on Pass

  double nominal_seconds() const { return static_cast<double>(steps) / kStepsPerSecond; }
};

/// Tree-walking evaluator for a checked MiniLang program. Integers are 64-bit
/// with wrapping arithmetic; division by zero and call-depth overflow crash;
/// a failed assert() fails; running out of fuel times out.
class Interpreter {
 public:
  Interpreter(const syntax::CheckedProgram& program, std::uint64_t fuel);

  /// Calls `function` with integer/bool arguments (bools as 0/1).
  /// The returned value is meaningful only when verdict == Pass.
  RunResult call(std::string_view function, const std::vector<std::int64_t>& args,
                 std::int64_t* result = nullptr);

 private:
  const syntax::CheckedProgram& program_;
  std::uint64_t fuel_;
};

/// Test functions: zero-parameter void functions named test_* declared in
/// files under tests/. Ordered by file path, then declaration order.
std::vector<std::string> list_minilang_tests(const syntax::CheckedProgram& program);

}  // namespace mutforge::harness
