#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "core/model.hpp"
#include "harness/harness.hpp"
#include "syntax/tree.hpp"

namespace mutforge::study {

// ---- compile-error taxonomy ------------------------------------------------

enum class ErrorType {
  UnknownMethod,
  StructuralDestruction,
  IncorrectMethodParameters,
  UnknownVariable,
  UnknownType,
  TypeMismatch,
  IncorrectInitialization,
  IncorrectLocation,
  IncorrectExceptions,
  Unclassified,
};

const char* to_string(ErrorType t) noexcept;
std::optional<ErrorType> error_type_from_string(std::string_view s) noexcept;
const std::vector<ErrorType>& all_error_types();

/// Matches a diagnostic when `kind` (if set) equals its kind and `pattern`
/// (if set) is found in its message (ECMAScript regex).
struct ClassifierRule {
  ErrorType type = ErrorType::Unclassified;
  std::string kind;
  std::string pattern;
};

/// Exact mapping of MiniLang diagnostic kinds.
const std::vector<ClassifierRule>& minilang_rules();
/// Message patterns for javac-style compiler output.
const std::vector<ClassifierRule>& javac_rules();

/// Rules are tried in order against every diagnostic; the first rule that
/// matches any of them decides. Unclassified when none does.
/// Throws Error(InvalidArgument) for an empty list, Error(Config) for a bad
/// pattern.
ErrorType classify_compile_error(const std::vector<Diagnostic>& diags,
                                 const std::vector<ClassifierRule>& rules);

/// Error type per NonCompilable record, keyed by record id.
std::map<std::string, ErrorType> classify_pool_errors(const MutationPool& pool,
                                                      const std::vector<ClassifierRule>& rules);

template <typename K>
std::map<K, double> fractions(const std::map<K, std::size_t>& counts) {
  std::size_t total = 0;
  for (const auto& [k, n] : counts) total += n;
  std::map<K, double> out;
  if (total == 0) return out;
  for (const auto& [k, n] : counts) {
    out[k] = static_cast<double>(n) / static_cast<double>(total);
  }
  return out;
}

// ---- origin nodes ------------------------------------------------------------

/// Kind of the innermost node of the fixed file covering the tokens the
/// mutant changes. Empty when the file does not parse or the change cannot
/// be located.
std::optional<syntax::NodeKind> origin_node(const MutationRecord& r, const ProjectSnapshot& fixed);

/// Tally over NonCompilable records; records without an origin are skipped.
std::map<syntax::NodeKind, std::size_t> origin_node_counts(const MutationPool& pool,
                                                           const ProjectSnapshot& fixed);

std::map<syntax::NodeKind, double> origin_node_distribution(const MutationPool& pool,
                                                            const ProjectSnapshot& fixed);

// ---- bug cases ---------------------------------------------------------------

/// Reads fixed/, buggy/, tests/ and bug.json. Test files land under "tests/"
/// in both snapshots. The id is the directory name.
/// Throws Error(FixtureInvalid) for a missing part, Error(Parse) for a bad
/// bug.json.
BugCase read_bug_case(const std::filesystem::path& dir);

/// Both versions must compile, every triggering test must exist, pass on
/// the fixed version and fail on the buggy one. Throws Error(FixtureInvalid).
void validate_bug_case(const BugCase& bug, harness::ToolchainAdapter& adapter);

BugCase load_bug_case(const std::filesystem::path& dir, harness::ToolchainAdapter& adapter);

/// Subdirectories holding a bug.json, sorted by name.
std::vector<std::filesystem::path> discover_bug_cases(const std::filesystem::path& root);

struct BugContext {
  SourceLocation target;          // lines handed to generators
  std::string target_text;
  SourceLocation function;        // the enclosing function
  std::string function_name;
  std::string function_text;
  std::string unit_tests;         // test functions calling the function
};

/// `context_length` lines centred on the first bug line, clipped to the
/// body of the enclosing function. Throws Error(InvalidArgument) unless the
/// length is 1, 2 or 3, Error(FixtureInvalid) when no function encloses the
/// bug.
BugContext extract_context(const BugCase& bug, int context_length);

// ---- subsampling -------------------------------------------------------------

/// Seeded uniform subsets of size min |pool|, records in original order.
/// Throws Error(InvalidArgument) when a pool is empty.
std::vector<MutationPool> equal_count_subsample(const std::vector<MutationPool>& pools,
                                                std::uint64_t seed);

}  // namespace mutforge::study
