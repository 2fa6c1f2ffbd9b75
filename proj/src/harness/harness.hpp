#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/model.hpp"

namespace mutforge::harness {

/// A project copy with at most one mutation applied. Files live in memory;
/// adapters that need a directory call write_to().
struct Workspace {
  ProjectSnapshot project;
  std::string applied;  // mutant id, empty for the unmutated project

  void write_to(const std::filesystem::path& root) const;
};

/// Reads every regular file under `root` into a snapshot. Hidden entries
/// (names starting with '.') are skipped.
ProjectSnapshot load_snapshot(const std::filesystem::path& root);

/// Applies `m` to a copy of `project`. Throws Error(Stale) when the file's
/// text at m.location no longer equals m.original_text (newlines normalized),
/// Error(InvalidArgument) when the location does not resolve.
Workspace materialize(const ProjectSnapshot& project, const MutationRecord& m);

class ToolchainAdapter {
 public:
  virtual ~ToolchainAdapter() = default;

  virtual std::string name() const = 0;
  /// Whether check/run_tests may be called from several threads at once.
  virtual bool concurrent() const = 0;

  virtual CompileOutcome check(const Workspace& ws) = 0;
  virtual std::vector<std::string> list_tests(const Workspace& ws) = 0;
  /// One outcome per requested test, in request order.
  virtual std::vector<TestOutcome> run_tests(const Workspace& ws,
                                             const std::vector<std::string>& tests,
                                             double timeout_seconds) = 0;
};

/// In-process adapter for MiniLang projects: the checker is the compiler and
/// tests are test_* functions under tests/. Wall times are nominal
/// (interpreter steps / kStepsPerSecond).
std::unique_ptr<ToolchainAdapter> make_minilang_adapter();

struct SubprocessConfig {
  std::string check_cmd;       // run in the workspace root; exit 0 = compiles
  std::string test_cmd;        // "{test_id}" is substituted
  std::string list_tests_cmd;  // prints one test id per line
  int pass_exit_code = 0;
  double timeout = 60.0;       // seconds, for check and list commands
};

/// Runs shell commands in a per-call temporary directory holding the
/// workspace files. A failing check yields one Diagnostic per non-empty
/// output line (kind "toolchain"). Test verdicts: pass_exit_code is Pass,
/// death by signal or an exit code above 128 is Crash, any other code Fail.
std::unique_ptr<ToolchainAdapter> make_subprocess_adapter(SubprocessConfig cfg);

struct ExecOptions {
  std::size_t workers = 1;
  /// Per-test timeout; default max(1 s, 10 x slowest baseline test).
  std::optional<double> timeout;
  std::function<void(const std::string&)> warn;
};

/// Compiles every record's workspace. An adapter exception marks the record
/// NonCompilable with a "toolchain-crash" diagnostic. Staleness propagates.
CompileResults screen_compile(ToolchainAdapter& adapter, const ProjectSnapshot& project,
                              const std::vector<const MutationRecord*>& records,
                              std::size_t workers = 1);

struct KillRun {
  KillMatrix matrix;
  double timeout = 0.0;                 // per-test timeout that was applied
  std::vector<std::string> excluded;    // tests failing on the baseline
  double baseline_wall_time = 0.0;
};

/// Runs all `tests` on the unmutated project twice (disagreement throws
/// Error(Flaky) naming the test) and then on every mutant.
KillRun build_kill_matrix(ToolchainAdapter& adapter, const ProjectSnapshot& project,
                          const std::vector<const MutationRecord*>& viable,
                          const std::vector<std::string>& tests, const ExecOptions& opts = {});

/// Killed mutants / all mutants. Throws Error(InvalidArgument) when empty.
double mutation_score(const KillMatrix& m);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first
/// exception thrown is rethrown after all threads join.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace mutforge::harness
