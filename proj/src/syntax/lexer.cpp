#include <array>
#include <cctype>

#include "core/error.hpp"
#include "syntax/token.hpp"

namespace mutforge::syntax {

const char* to_string(TokenKind kind) noexcept {
  switch (kind) {
    case TokenKind::Identifier: return "Identifier";
    case TokenKind::Keyword: return "Keyword";
    case TokenKind::IntLiteral: return "IntLiteral";
    case TokenKind::BoolLiteral: return "BoolLiteral";
    case TokenKind::StringLiteral: return "StringLiteral";
    case TokenKind::Operator: return "Operator";
    case TokenKind::Punct: return "Punct";
  }
  return "?";
}

namespace {

constexpr std::array<std::string_view, 8> kKeywords = {
    "fn", "let", "if", "else", "while", "return", "int", "bool"};

constexpr std::array<std::string_view, 8> kTwoCharOps = {
    "<=", ">=", "==", "!=", "&&", "||", "->", "::"};

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool is_punct(char c) {
  switch (c) {
    case '(': case ')': case '{': case '}': case '[': case ']':
    case ',': case ';': case '.': case ':':
      return true;
    default:
      return false;
  }
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  LexResult run() {
    LexResult out;
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\n') {
        advance();
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
        continue;
      }
      if (c == '/' && peek(1) == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        continue;
      }
      if (c == '/' && peek(1) == '*') {
        int line = line_, col = col_;
        advance(2);
        bool closed = false;
        while (pos_ < src_.size()) {
          if (src_[pos_] == '*' && peek(1) == '/') {
            advance(2);
            closed = true;
            break;
          }
          advance();
        }
        if (!closed) {
          out.diagnostics.push_back({"unterminated block comment", line, col});
          return out;
        }
        continue;
      }

      Token tok{TokenKind::Punct, {}, line_, col_, pos_};
      std::size_t start = pos_;
      if (is_ident_start(c)) {
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) advance();
        tok.text = std::string(src_.substr(start, pos_ - start));
        if (tok.text == "true" || tok.text == "false") {
          tok.kind = TokenKind::BoolLiteral;
        } else if (is_keyword(tok.text)) {
          tok.kind = TokenKind::Keyword;
        } else {
          tok.kind = TokenKind::Identifier;
        }
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) advance();
        if (pos_ + 1 < src_.size() && src_[pos_] == '.' &&
            std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
          advance();
          while (pos_ < src_.size() && is_ident_char(src_[pos_])) advance();
        }
        tok.kind = TokenKind::IntLiteral;
        tok.text = std::string(src_.substr(start, pos_ - start));
      } else if (c == '"' || c == '\'') {
        advance();
        bool closed = false;
        while (pos_ < src_.size() && src_[pos_] != '\n') {
          if (src_[pos_] == '\\') {
            advance(pos_ + 1 < src_.size() ? 2 : 1);
            continue;
          }
          if (src_[pos_] == c) {
            advance();
            closed = true;
            break;
          }
          advance();
        }
        if (!closed) {
          out.diagnostics.push_back({"unterminated string literal", tok.line, tok.column});
          return out;
        }
        tok.kind = TokenKind::StringLiteral;
        tok.text = std::string(src_.substr(start, pos_ - start));
      } else if (two_char_op()) {
        advance(2);
        tok.text = std::string(src_.substr(start, 2));
        tok.kind = tok.text == "->" || tok.text == "::" ? TokenKind::Punct
                                                         : TokenKind::Operator;
      } else if (is_punct(c)) {
        advance();
        tok.kind = TokenKind::Punct;
        tok.text = std::string(1, c);
      } else {
        advance();
        // Keep UTF-8 continuation bytes with their lead byte.
        while (pos_ < src_.size() &&
               (static_cast<unsigned char>(src_[pos_]) & 0xC0) == 0x80) {
          advance();
        }
        tok.kind = TokenKind::Operator;
        tok.text = std::string(src_.substr(start, pos_ - start));
      }
      out.tokens.push_back(std::move(tok));
    }
    return out;
  }

  std::size_t position() const { return pos_; }

 private:
  char peek(std::size_t ahead) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  bool two_char_op() const {
    if (pos_ + 1 >= src_.size()) return false;
    std::string_view two = src_.substr(pos_, 2);
    for (auto op : kTwoCharOps) {
      if (two == op) return true;
    }
    return false;
  }

  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace

bool is_keyword(std::string_view word) noexcept {
  for (auto kw : kKeywords) {
    if (word == kw) return true;
  }
  return false;
}

LexResult lex(std::string_view source) { return Lexer(source).run(); }

std::vector<Token> tokenize(std::string_view source) {
  LexResult res = lex(source);
  if (!res.ok()) {
    const auto& d = res.diagnostics.front();
    throw Error(ErrorCode::Parse, std::to_string(d.line) + ":" +
                                      std::to_string(d.column) + ": " + d.message);
  }
  return std::move(res.tokens);
}

std::vector<std::string> normalized_tokens(std::string_view source) {
  LexResult res = lex(source);
  std::vector<std::string> out;
  out.reserve(res.tokens.size() + 1);
  std::size_t tail = 0;
  if (!res.tokens.empty()) tail = res.tokens.back().offset + res.tokens.back().text.size();
  for (auto& t : res.tokens) out.push_back(std::move(t.text));
  if (!res.ok()) {
    // Everything after the last good token.
    std::string rest;
    bool pending_space = false;
    for (std::size_t i = tail; i < source.size(); ++i) {
      char c = source[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        pending_space = !rest.empty();
        continue;
      }
      if (pending_space) rest.push_back(' ');
      pending_space = false;
      rest.push_back(c);
    }
    if (!rest.empty()) out.push_back(std::move(rest));
  }
  return out;
}

std::string render(const std::vector<Token>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i].text;
  }
  return out;
}

}  // namespace mutforge::syntax
