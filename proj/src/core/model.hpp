#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mutforge {

/// 1-based inclusive line span inside one project-relative file.
struct SourceLocation {
  std::string file;
  int line_start = 1;
  int line_end = 1;

  /// Throws Error(InvalidArgument) unless the invariants hold.
  static SourceLocation make(std::string file, int line_start, int line_end);
  bool valid() const noexcept;
  bool contains(int line) const noexcept { return line >= line_start && line <= line_end; }

  friend bool operator==(const SourceLocation&, const SourceLocation&) = default;
  friend auto operator<=>(const SourceLocation&, const SourceLocation&) = default;
};

std::string to_string(const SourceLocation& loc);

/// Relative path with no empty, "." or ".." segments and no leading '/'.
bool is_safe_relative_path(std::string_view path) noexcept;

struct Diagnostic {
  std::string kind;
  std::string message;
  SourceLocation location;
};

enum class StatusKind {
  Pending,  // not yet classified
  NonCompilable,
  IdenticalToOriginal,
  Duplicate,
  Viable,
  EquivalentLabeled,
};

const char* to_string(StatusKind kind) noexcept;
std::optional<StatusKind> status_kind_from_string(std::string_view name) noexcept;

struct MutantStatus {
  StatusKind kind = StatusKind::Pending;
  std::vector<Diagnostic> diagnostics;  // NonCompilable only
  std::string duplicate_of;             // Duplicate only

  bool in_compilable() const noexcept {
    return kind != StatusKind::NonCompilable && kind != StatusKind::Pending;
  }
  bool useless() const noexcept {
    return kind == StatusKind::IdenticalToOriginal || kind == StatusKind::Duplicate;
  }
  /// Member of C - U (equivalent-labeled mutants are still part of it).
  bool viable() const noexcept {
    return kind == StatusKind::Viable || kind == StatusKind::EquivalentLabeled;
  }
};

struct TokenUsage {
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;

  friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct MutationRecord {
  std::string id;
  std::string origin;  // "<backend>:<prompt>" for LLM mutants, operator name for rules
  SourceLocation location;
  std::string original_text;
  std::string mutated_text;
  MutantStatus status;
  double gen_wall_time = 0.0;
  std::optional<TokenUsage> token_usage;
};

// Per-pool counters from the generation stage.
struct GenerationStats {
  std::size_t prompts = 0;
  std::size_t responses_parsed = 0;  // responses containing a JSON array
  std::size_t parse_failures = 0;    // responses without one
  std::size_t skipped_elements = 0;  // malformed or out-of-span entries
  double wall_time = 0.0;
  TokenUsage usage;

  friend bool operator==(const GenerationStats&, const GenerationStats&) = default;
};

struct MutationPool {
  std::string project_id;
  std::string generator_id;
  std::vector<MutationRecord> records;
  GenerationStats stats;

  bool classified() const noexcept;
  const MutationRecord* find(std::string_view id) const noexcept;
  std::vector<const MutationRecord*> viable() const;
};

struct CompileOutcome {
  bool ok = true;
  std::vector<Diagnostic> diagnostics;

  static CompileOutcome success() { return {}; }
  static CompileOutcome failure(std::vector<Diagnostic> diags) {
    return {false, std::move(diags)};
  }
};

using CompileResults = std::map<std::string, CompileOutcome, std::less<>>;

/// Ids that must be compiled before classify(): records that are neither
/// identical to the original nor token-equal to an earlier candidate at the
/// same location.
std::vector<std::string> needs_compilation(const MutationPool& pool);

/// Assigns statuses in precedence order IdenticalToOriginal, NonCompilable,
/// Duplicate, Viable. Records skipped by needs_compilation() inherit the
/// outcome of the earlier token-equal record. Existing EquivalentLabeled
/// statuses survive when the record is still viable.
/// Throws Error(Integrity) for unknown ids in `results` or missing outcomes.
MutationPool classify(MutationPool pool, const CompileResults& results);

struct SetCounts {
  std::size_t all = 0;         // |A|
  std::size_t compilable = 0;  // |C|
  std::size_t useless = 0;     // |U|
  std::size_t viable = 0;      // |C - U|

  friend bool operator==(const SetCounts&, const SetCounts&) = default;
};

/// Throws Error(Unclassified) if any record is still Pending.
SetCounts set_counts(const MutationPool& pool);

/// Token sequence equality with whitespace and comments ignored.
bool token_equal(std::string_view a, std::string_view b);

enum class Verdict { Pass, Fail, Timeout, Crash, NotRun };

char verdict_code(Verdict v) noexcept;
std::optional<Verdict> verdict_from_code(char c) noexcept;
const char* to_string(Verdict v) noexcept;
inline bool is_kill_verdict(Verdict v) noexcept {
  return v == Verdict::Fail || v == Verdict::Timeout || v == Verdict::Crash;
}

struct TestOutcome {
  std::string test_id;
  Verdict verdict = Verdict::NotRun;
  double wall_time = 0.0;
};

/// Per-mutant, per-test verdicts plus the verdicts on the unmutated program.
class KillMatrix {
 public:
  KillMatrix() = default;
  KillMatrix(std::vector<std::string> mutant_ids, std::vector<std::string> test_ids);

  const std::vector<std::string>& mutant_ids() const { return mutants_; }
  const std::vector<std::string>& test_ids() const { return tests_; }

  Verdict cell(std::size_t mutant, std::size_t test) const;
  void set_cell(std::size_t mutant, std::size_t test, Verdict v);
  Verdict baseline(std::size_t test) const { return baseline_.at(test); }
  void set_baseline(std::size_t test, Verdict v) { baseline_.at(test) = v; }

  std::optional<std::size_t> mutant_index(std::string_view id) const;

  /// fT_M: tests passing on the baseline whose verdict on the mutant kills.
  std::set<std::string> killing_tests(std::size_t mutant) const;
  bool killed(std::size_t mutant) const;

  /// Restriction to a subset of tests (order preserved).
  KillMatrix restrict_tests(const std::set<std::string>& keep) const;

  friend bool operator==(const KillMatrix&, const KillMatrix&) = default;

 private:
  std::vector<std::string> mutants_;
  std::vector<std::string> tests_;
  std::vector<Verdict> cells_;  // row-major, mutants x tests
  std::vector<Verdict> baseline_;
};

/// Source files keyed by project-relative path.
struct ProjectSnapshot {
  std::map<std::string, std::string> files;

  const std::string* file(std::string_view path) const;
  friend bool operator==(const ProjectSnapshot&, const ProjectSnapshot&) = default;
};

struct BugCase {
  std::string id;
  ProjectSnapshot fixed;  // includes tests under "tests/"
  ProjectSnapshot buggy;
  SourceLocation bug_location;
  std::set<std::string> triggering_tests;  // fT_B
};

/// Splits text into lines without their terminators; "\r\n" counts as "\n".
std::vector<std::string> split_lines(std::string_view text);

/// Lines [first, last] (1-based, inclusive) joined with '\n'.
std::string line_span(std::string_view text, int first, int last);

}  // namespace mutforge
