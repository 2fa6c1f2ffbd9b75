#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mutforge::syntax {

enum class TokenKind {
  Identifier,
  Keyword,
  IntLiteral,
  BoolLiteral,
  StringLiteral,
  Operator,
  Punct,
};

const char* to_string(TokenKind kind) noexcept;

struct Token {
  TokenKind kind;
  std::string text;
  // 1-based position of the first byte; offset is a byte index into the source.
  int line = 1;
  int column = 1;
  std::size_t offset = 0;

  bool operator==(const Token& other) const {
    return kind == other.kind && text == other.text;
  }
};

struct LexDiagnostic {
  std::string message;
  int line = 1;
  int column = 1;
};

struct LexResult {
  std::vector<Token> tokens;
  std::vector<LexDiagnostic> diagnostics;

  bool ok() const { return diagnostics.empty(); }
};

/// Lexes source text. Comments (`//`, `/* */`) and whitespace never produce
/// tokens. Characters outside the MiniLang alphabet are kept as one-byte
/// Operator tokens so foreign code still yields a comparable token stream;
/// only an unterminated string or block comment is a lexical error.
LexResult lex(std::string_view source);

/// lex() that throws Error(Parse) on a lexical diagnostic.
std::vector<Token> tokenize(std::string_view source);

/// Token texts of a never-failing lex: on a lexical error the unlexable tail
/// is appended verbatim as one token. Used for identity/duplicate decisions.
std::vector<std::string> normalized_tokens(std::string_view source);

/// Joins token texts with single spaces.
std::string render(const std::vector<Token>& tokens);

bool is_keyword(std::string_view word) noexcept;

}  // namespace mutforge::syntax
