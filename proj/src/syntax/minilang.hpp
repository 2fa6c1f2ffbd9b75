#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "syntax/token.hpp"
#include "syntax/tree.hpp"

namespace mutforge::syntax {

// Diagnostic kinds emitted by the MiniLang front end. The error-type
// classifier keys on these strings.
namespace diag {
inline constexpr std::string_view kLexError = "lex-error";
inline constexpr std::string_view kParseError = "parse-error";
inline constexpr std::string_view kNotAStatement = "not-a-statement";
inline constexpr std::string_view kUnknownFunction = "unknown-function";
inline constexpr std::string_view kUnknownVariable = "unknown-variable";
inline constexpr std::string_view kUnknownType = "unknown-type";
inline constexpr std::string_view kArity = "arity";
inline constexpr std::string_view kTypeError = "type-error";
inline constexpr std::string_view kRedeclared = "redeclared-variable";
inline constexpr std::string_view kDuplicateFunction = "duplicate-function";
inline constexpr std::string_view kMissingReturn = "missing-return";
inline constexpr std::string_view kUnreachable = "unreachable-code";
}  // namespace diag

struct MiniDiagnostic {
  std::string kind;
  std::string message;
  std::string file;
  int line = 1;
  int column = 1;
};

enum class ValueType { Int, Bool, Void, Error };

const char* to_string(ValueType t) noexcept;

struct FunctionSig {
  std::string name;
  std::vector<std::string> param_names;
  std::vector<ValueType> param_types;
  ValueType return_type = ValueType::Void;
  NodeId node = kNoNode;
};

/// One parsed source file.
struct ParsedUnit {
  std::string file;
  std::vector<Token> tokens;
  SyntaxTree tree;
  std::vector<FunctionSig> functions;
  std::vector<MiniDiagnostic> diagnostics;

  bool ok() const { return diagnostics.empty(); }
};

/// Parses one MiniLang file. Lexical and syntax errors are reported as
/// diagnostics (parsing stops at the first one); the tree is only meaningful
/// when ok().
ParsedUnit parse_mini_unit(std::string_view source, std::string file = {});

/// parse_mini_unit() that throws Error(Parse) carrying "line:col: message".
SyntaxTree parse_mini(std::string_view source);

struct FunctionRef {
  std::size_t unit = 0;
  const FunctionSig* sig = nullptr;
};

/// A set of files that parsed and type-checked together.
struct CheckedProgram {
  std::vector<ParsedUnit> units;
  std::map<std::string, FunctionRef, std::less<>> functions;
};

struct CheckResult {
  std::vector<MiniDiagnostic> diagnostics;
  std::shared_ptr<const CheckedProgram> program;  // null unless diagnostics empty

  bool ok() const { return diagnostics.empty(); }
};

/// Parses and statically checks a multi-file program: declared-before-use
/// variables, known function names, call arity and int/bool typing, plus
/// missing-return and unreachable-code checks. Files share one function
/// namespace.
CheckResult check_program(const std::vector<std::pair<std::string, std::string>>& files);

// Builtins available to every program.
inline constexpr std::string_view kMathNamespace = "math";
std::optional<FunctionSig> builtin_function(std::string_view qualifier,
                                            std::string_view name);
bool is_builtin_constant(std::string_view qualifier, std::string_view name);

}  // namespace mutforge::syntax
