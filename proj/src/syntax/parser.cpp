#include <string>

#include "core/error.hpp"
#include "syntax/minilang.hpp"

namespace mutforge::syntax {

namespace {

struct ParseFailure {
  std::string kind;
  std::string message;
  int line;
  int column;
};

class Parser {
 public:
  Parser(std::vector<Token> tokens, ParsedUnit& unit)
      : toks_(std::move(tokens)), unit_(unit) {}

  void parse_program() {
    tree().add(NodeKind::Program);
    while (!at_end()) parse_function(0);
    finish(0, 0);
  }

  std::vector<Token> take_tokens() { return std::move(toks_); }

 private:
  SyntaxTree& tree() { return unit_.tree; }

  bool at_end() const { return pos_ >= toks_.size(); }

  const Token* peek(std::size_t ahead = 0) const {
    return pos_ + ahead < toks_.size() ? &toks_[pos_ + ahead] : nullptr;
  }

  bool check(std::string_view text, std::size_t ahead = 0) const {
    const Token* t = peek(ahead);
    return t != nullptr && t->text == text && t->kind != TokenKind::StringLiteral;
  }

  bool check_kind(TokenKind kind) const {
    const Token* t = peek();
    return t != nullptr && t->kind == kind;
  }

  [[noreturn]] void fail(const std::string& message) const {
    if (at_end()) {
      int line = toks_.empty() ? 1 : toks_.back().line;
      int col = toks_.empty() ? 1
                              : toks_.back().column +
                                    static_cast<int>(toks_.back().text.size());
      throw ParseFailure{std::string(diag::kParseError),
                         message + " at end of input", line, col};
    }
    const Token& t = toks_[pos_];
    throw ParseFailure{std::string(diag::kParseError),
                       message + ", found '" + t.text + "'", t.line, t.column};
  }

  const Token& expect(std::string_view text) {
    if (!check(text)) fail("expected '" + std::string(text) + "'");
    return toks_[pos_++];
  }

  const Token& expect_identifier(const char* what) {
    if (!check_kind(TokenKind::Identifier)) fail(std::string("expected ") + what);
    return toks_[pos_++];
  }

  NodeId open(NodeKind kind, NodeId parent, std::string label = {}) {
    NodeId id = tree().add(kind, std::move(label), parent);
    tree().node(id).token_begin = pos_;
    return id;
  }

  // Closes a node whose range started at `begin` and ends before pos_.
  void finish(NodeId id, std::size_t begin) {
    Node& n = tree().node(id);
    n.token_begin = begin;
    n.token_end = pos_;
    if (pos_ > begin) {
      n.line_begin = toks_[begin].line;
      n.line_end = toks_[pos_ - 1].line;
    } else if (!toks_.empty()) {
      n.line_begin = n.line_end = toks_[std::min(begin, toks_.size() - 1)].line;
    }
  }

  // Re-parents `child` (already in the tree) under `parent` as its last child.
  void adopt(NodeId parent, NodeId child) {
    Node& c = tree().node(child);
    if (c.parent != kNoNode) {
      auto& siblings = tree().node(c.parent).children;
      std::erase(siblings, child);
    }
    c.parent = parent;
    tree().node(parent).children.push_back(child);
  }

  ValueType parse_type() {
    if (check("int")) {
      ++pos_;
      return ValueType::Int;
    }
    if (check("bool")) {
      ++pos_;
      return ValueType::Bool;
    }
    fail("expected type 'int' or 'bool'");
  }

  void parse_function(NodeId parent) {
    std::size_t begin = pos_;
    expect("fn");
    const Token& name = expect_identifier("function name");
    NodeId fn = open(NodeKind::FunctionDecl, parent, name.text);
    FunctionSig sig;
    sig.name = name.text;
    sig.node = fn;
    expect("(");
    if (!check(")")) {
      while (true) {
        std::size_t pbegin = pos_;
        const Token& p = expect_identifier("parameter name");
        NodeId pid = open(NodeKind::Identifier, fn, p.text);
        ValueType t = ValueType::Int;
        if (check(":")) {
          ++pos_;
          t = parse_type();
        }
        finish(pid, pbegin);
        sig.param_names.push_back(p.text);
        sig.param_types.push_back(t);
        if (check(",")) {
          ++pos_;
          continue;
        }
        break;
      }
    }
    expect(")");
    if (check("->")) {
      ++pos_;
      sig.return_type = parse_type();
    }
    parse_block(fn);
    finish(fn, begin);
    unit_.functions.push_back(std::move(sig));
  }

  NodeId parse_block(NodeId parent) {
    std::size_t begin = pos_;
    expect("{");
    NodeId block = open(NodeKind::Block, parent);
    while (!check("}")) {
      if (at_end()) fail("expected '}'");
      parse_statement(block);
    }
    expect("}");
    finish(block, begin);
    return block;
  }

  void parse_statement(NodeId parent) {
    std::size_t begin = pos_;
    if (check(";")) {
      NodeId id = open(NodeKind::EmptyStmt, parent);
      ++pos_;
      finish(id, begin);
      return;
    }
    if (check("let")) {
      ++pos_;
      const Token& name = expect_identifier("variable name");
      NodeId id = open(NodeKind::VarDecl, parent, name.text);
      expect("=");
      parse_expr(id);
      expect(";");
      finish(id, begin);
      return;
    }
    if (check("if")) {
      parse_if(parent);
      return;
    }
    if (check("{")) {
      parse_block(parent);
      return;
    }
    if (check("while")) {
      ++pos_;
      NodeId id = open(NodeKind::WhileStmt, parent);
      expect("(");
      parse_expr(id);
      expect(")");
      parse_block(id);
      finish(id, begin);
      return;
    }
    if (check("return")) {
      ++pos_;
      NodeId id = open(NodeKind::ReturnStmt, parent);
      if (!check(";")) parse_expr(id);
      expect(";");
      finish(id, begin);
      return;
    }
    if (check_kind(TokenKind::Identifier) && check("=", 1)) {
      NodeId id = open(NodeKind::Assignment, parent, "=");
      std::size_t tbegin = pos_;
      const Token& target = toks_[pos_++];
      NodeId tid = open(NodeKind::Identifier, id, target.text);
      finish(tid, tbegin);
      ++pos_;  // '='
      parse_expr(id);
      expect(";");
      finish(id, begin);
      return;
    }
    if (check("fn") || check("else") || check("}")) {
      fail("expected statement");
    }
    NodeId id = open(NodeKind::ExprStmt, parent);
    parse_expr(id);
    expect(";");
    finish(id, begin);
  }

  void parse_if(NodeId parent) {
    std::size_t begin = pos_;
    expect("if");
    NodeId id = open(NodeKind::IfStmt, parent);
    expect("(");
    parse_expr(id);
    expect(")");
    parse_block(id);
    if (check("else")) {
      ++pos_;
      if (check("if")) {
        parse_if(id);
      } else {
        parse_block(id);
      }
    }
    finish(id, begin);
  }

  // Expressions are built bottom-up: each level returns a detached node id
  // that the caller attaches to its parent.
  NodeId parse_expr(NodeId parent) {
    NodeId e = parse_binary(0);
    adopt(parent, e);
    return e;
  }

  static int precedence(std::string_view op) {
    if (op == "||") return 1;
    if (op == "&&") return 2;
    if (op == "==" || op == "!=") return 3;
    if (op == "<" || op == "<=" || op == ">" || op == ">=") return 4;
    if (op == "+" || op == "-") return 5;
    if (op == "*" || op == "/" || op == "%") return 6;
    return 0;
  }

  NodeId parse_binary(int min_prec) {
    std::size_t begin = pos_;
    NodeId lhs = parse_unary();
    while (true) {
      const Token* t = peek();
      if (t == nullptr || t->kind != TokenKind::Operator) break;
      int prec = precedence(t->text);
      if (prec == 0 || prec <= min_prec) break;
      std::string op = t->text;
      ++pos_;
      NodeId rhs = parse_binary(prec);
      NodeId bin = tree().add(NodeKind::BinaryOperation, op);
      adopt(bin, lhs);
      adopt(bin, rhs);
      finish(bin, begin);
      lhs = bin;
    }
    return lhs;
  }

  NodeId parse_unary() {
    std::size_t begin = pos_;
    if (check("-") || check("!")) {
      std::string op = toks_[pos_++].text;
      NodeId operand = parse_unary();
      NodeId un = tree().add(NodeKind::UnaryOperation, op);
      adopt(un, operand);
      finish(un, begin);
      return un;
    }
    return parse_postfix();
  }

  NodeId parse_args(std::size_t) {
    std::size_t begin = pos_;
    expect("(");
    NodeId args = tree().add(NodeKind::ArgumentList);
    if (!check(")")) {
      while (true) {
        NodeId a = parse_binary(0);
        adopt(args, a);
        if (check(",")) {
          ++pos_;
          continue;
        }
        break;
      }
    }
    expect(")");
    finish(args, begin);
    return args;
  }

  NodeId parse_postfix() {
    std::size_t begin = pos_;
    NodeId e = parse_primary();
    while (check(".")) {
      ++pos_;
      const Token& member = expect_identifier("member name");
      if (check("(")) {
        NodeId args = parse_args(begin);
        NodeId call = tree().add(NodeKind::MethodInvocation, member.text);
        adopt(call, e);
        adopt(call, args);
        finish(call, begin);
        e = call;
      } else {
        NodeId ref = tree().add(NodeKind::MemberReference, member.text);
        adopt(ref, e);
        finish(ref, begin);
        e = ref;
      }
    }
    return e;
  }

  NodeId parse_primary() {
    std::size_t begin = pos_;
    const Token* t = peek();
    if (t == nullptr) fail("expected expression");
    switch (t->kind) {
      case TokenKind::IntLiteral:
      case TokenKind::BoolLiteral: {
        NodeId lit = tree().add(NodeKind::Literal, t->text);
        ++pos_;
        finish(lit, begin);
        return lit;
      }
      case TokenKind::Identifier: {
        std::string name = t->text;
        ++pos_;
        if (check("(")) {
          NodeId args = parse_args(begin);
          NodeId call = tree().add(NodeKind::MethodInvocation, name);
          adopt(call, args);
          finish(call, begin);
          return call;
        }
        NodeId id = tree().add(NodeKind::Identifier, name);
        finish(id, begin);
        return id;
      }
      default:
        break;
    }
    if (check("(")) {
      ++pos_;
      NodeId inner = parse_binary(0);
      expect(")");
      // Parentheses belong to the inner node's extent.
      finish(inner, begin);
      return inner;
    }
    fail("expected expression");
  }

  std::vector<Token> toks_;
  ParsedUnit& unit_;
  std::size_t pos_ = 0;
};

}  // namespace

ParsedUnit parse_mini_unit(std::string_view source, std::string file) {
  ParsedUnit unit;
  unit.file = std::move(file);
  LexResult lexed = lex(source);
  if (!lexed.ok()) {
    const auto& d = lexed.diagnostics.front();
    unit.diagnostics.push_back(
        {std::string(diag::kLexError), d.message, unit.file, d.line, d.column});
    unit.tokens = std::move(lexed.tokens);
    return unit;
  }
  Parser parser(std::move(lexed.tokens), unit);
  try {
    parser.parse_program();
  } catch (const ParseFailure& f) {
    unit.diagnostics.push_back({f.kind, f.message, unit.file, f.line, f.column});
  }
  unit.tokens = parser.take_tokens();
  return unit;
}

SyntaxTree parse_mini(std::string_view source) {
  ParsedUnit unit = parse_mini_unit(source);
  if (!unit.ok()) {
    const auto& d = unit.diagnostics.front();
    throw Error(ErrorCode::Parse, std::to_string(d.line) + ":" +
                                      std::to_string(d.column) + ": " + d.kind +
                                      ": " + d.message);
  }
  return std::move(unit.tree);
}

}  // namespace mutforge::syntax
