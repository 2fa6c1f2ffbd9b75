#include "rulegen/rulegen.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <limits>

#include "core/error.hpp"

namespace mutforge::rulegen {

using syntax::Node;
using syntax::NodeId;
using syntax::NodeKind;
using syntax::TokenKind;

const char* to_string(RuleOperator op) noexcept {
  switch (op) {
    case RuleOperator::AOR: return "AOR";
    case RuleOperator::LOR: return "LOR";
    case RuleOperator::LVR: return "LVR";
    case RuleOperator::ROR: return "ROR";
    case RuleOperator::SDL: return "SDL";
    case RuleOperator::UOI: return "UOI";
  }
  return "?";
}

std::optional<RuleOperator> rule_operator_from_string(std::string_view name) noexcept {
  for (auto op : all_operators()) {
    if (name == to_string(op)) return op;
  }
  return std::nullopt;
}

std::set<RuleOperator> all_operators() {
  return {RuleOperator::AOR, RuleOperator::LOR, RuleOperator::LVR,
          RuleOperator::ROR, RuleOperator::SDL, RuleOperator::UOI};
}

std::set<RuleOperator> parse_operators(const std::vector<std::string>& names) {
  std::set<RuleOperator> out;
  for (const auto& n : names) {
    auto op = rule_operator_from_string(n);
    if (!op) throw Error(ErrorCode::Config, "unknown rule operator '" + n + "'");
    out.insert(*op);
  }
  return out;
}

std::vector<std::string> operator_replacements(RuleOperator rule, std::string_view op) {
  static const std::vector<std::string> arith = {"+", "-", "*", "/", "%"};
  switch (rule) {
    case RuleOperator::AOR: {
      if (std::find(arith.begin(), arith.end(), op) == arith.end()) return {};
      std::vector<std::string> out;
      for (const auto& a : arith) {
        if (a != op) out.push_back(a);
      }
      return out;
    }
    case RuleOperator::ROR:
      if (op == "<") return {"<="};
      if (op == "<=") return {"<"};
      if (op == ">") return {">="};
      if (op == ">=") return {">"};
      if (op == "==") return {"!="};
      if (op == "!=") return {"=="};
      return {};
    case RuleOperator::LOR:
      if (op == "&&") return {"||"};
      if (op == "||") return {"&&"};
      return {};
    default:
      return {};
  }
}

std::vector<std::string> literal_replacements(std::string_view literal) {
  if (literal == "true") return {"false"};
  if (literal == "false") return {"true"};
  std::int64_t n = 0;
  auto [ptr, ec] = std::from_chars(literal.data(), literal.data() + literal.size(), n);
  if (ec != std::errc() || ptr != literal.data() + literal.size()) return {};
  std::vector<std::int64_t> cands = {0, 1};
  if (n < std::numeric_limits<std::int64_t>::max()) cands.push_back(n + 1);
  if (n > std::numeric_limits<std::int64_t>::min()) cands.push_back(n - 1);
  std::vector<std::string> out;
  for (auto c : cands) {
    std::string s = std::to_string(c);
    if (c == n || std::find(out.begin(), out.end(), s) != out.end()) continue;
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

bool is_atom(NodeKind k) {
  return k == NodeKind::Literal || k == NodeKind::Identifier ||
         k == NodeKind::MemberReference || k == NodeKind::MethodInvocation;
}

class Enumerator {
 public:
  Enumerator(const syntax::ParsedUnit& unit, std::string_view source,
             const SourceLocation& span, std::string_view prefix)
      : unit_(unit), src_(source), span_(span), prefix_(prefix) {
    line_starts_.push_back(0);
    for (std::size_t i = 0; i < src_.size(); ++i) {
      if (src_[i] == '\n') line_starts_.push_back(i + 1);
    }
  }

  void visit(NodeId id, const std::set<RuleOperator>& ops) {
    const Node& n = tree().node(id);
    bool inside = n.token_end > n.token_begin && n.line_begin >= span_.line_start &&
                  n.line_end <= span_.line_end;
    if (inside) {
      for (auto op : ops) apply(op, id);
    }
    for (NodeId c : n.children) visit(c, ops);
  }

  std::vector<MutationRecord> take() { return std::move(out_); }

 private:
  const syntax::SyntaxTree& tree() const { return unit_.tree; }

  std::size_t byte_begin(std::size_t tok) const { return unit_.tokens[tok].offset; }
  std::size_t byte_end(std::size_t tok) const {
    return unit_.tokens[tok].offset + unit_.tokens[tok].text.size();
  }

  std::string text_of(NodeId id) const {
    const Node& n = tree().node(id);
    std::size_t b = byte_begin(n.token_begin), e = byte_end(n.token_end - 1);
    return std::string(src_.substr(b, e - b));
  }

  // Replaces bytes [b, e) and records a mutant covering the touched lines.
  void emit(RuleOperator op, std::size_t b, std::size_t e, const std::string& replacement) {
    int first = line_of(b), last = line_of(e == b ? b : e - 1);
    std::size_t lb = line_starts_[static_cast<std::size_t>(first - 1)];
    std::size_t le = static_cast<std::size_t>(last) < line_starts_.size()
                         ? line_starts_[static_cast<std::size_t>(last)] - 1
                         : src_.size();
    std::string original(src_.substr(lb, le - lb));
    std::string mutated = std::string(src_.substr(lb, b - lb)) + replacement +
                          std::string(src_.substr(e, le - e));
    auto newlines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
    // Leading padding: a trailing newline would read as a line terminator.
    auto missing = newlines(original) - newlines(mutated);
    if (missing > 0) mutated.insert(0, static_cast<std::size_t>(missing), '\n');
    if (mutated == original) return;
    SourceLocation loc{span_.file, first, last};
    for (const auto& r : out_) {
      if (r.location == loc && r.mutated_text == mutated) return;
    }
    MutationRecord r;
    r.id = prefix_ + "-" + std::to_string(out_.size() + 1);
    r.origin = to_string(op);
    r.location = loc;
    r.original_text = std::move(original);
    r.mutated_text = std::move(mutated);
    out_.push_back(std::move(r));
  }

  int line_of(std::size_t byte) const {
    auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), byte);
    return static_cast<int>(it - line_starts_.begin());
  }

  syntax::ValueType return_type_at(NodeId id) const {
    NodeId cur = id;
    while (cur != syntax::kNoNode && tree().node(cur).kind != NodeKind::FunctionDecl) {
      cur = tree().node(cur).parent;
    }
    for (const auto& f : unit_.functions) {
      if (f.node == cur) return f.return_type;
    }
    return syntax::ValueType::Int;
  }

  void apply(RuleOperator op, NodeId id) {
    const Node& n = tree().node(id);
    switch (op) {
      case RuleOperator::AOR:
      case RuleOperator::ROR:
      case RuleOperator::LOR: {
        if (n.kind != NodeKind::BinaryOperation) return;
        std::size_t tok = tree().node(n.children[0]).token_end;
        if (tok >= unit_.tokens.size() || unit_.tokens[tok].text != n.label) return;
        for (const auto& r : operator_replacements(op, n.label)) {
          emit(op, byte_begin(tok), byte_end(tok), r);
        }
        return;
      }
      case RuleOperator::LVR: {
        if (n.kind != NodeKind::Literal) return;
        std::size_t tok = n.token_begin;
        // A parenthesized literal's range includes the parens; find the literal token.
        while (tok < n.token_end && unit_.tokens[tok].text != n.label) ++tok;
        if (tok == n.token_end) return;
        for (const auto& r : literal_replacements(n.label)) {
          emit(op, byte_begin(tok), byte_end(tok), r);
        }
        return;
      }
      case RuleOperator::UOI: {
        if (n.parent == syntax::kNoNode) return;
        const Node& p = tree().node(n.parent);
        if (p.children.empty() || p.children[0] != id) return;
        std::string sign;
        if (p.kind == NodeKind::IfStmt || p.kind == NodeKind::WhileStmt) {
          sign = "!";
        } else if (p.kind == NodeKind::ReturnStmt) {
          auto t = return_type_at(id);
          if (t == syntax::ValueType::Int) {
            sign = "-";
          } else if (t == syntax::ValueType::Bool) {
            sign = "!";
          } else {
            return;
          }
        } else {
          return;
        }
        std::string text = text_of(id);
        std::string repl = is_atom(n.kind) ? sign + text : sign + "(" + text + ")";
        emit(op, byte_begin(n.token_begin), byte_end(n.token_end - 1), repl);
        return;
      }
      case RuleOperator::SDL: {
        if (n.kind != NodeKind::Assignment && n.kind != NodeKind::ExprStmt &&
            n.kind != NodeKind::ReturnStmt) {
          return;
        }
        emit(op, byte_begin(n.token_begin), byte_end(n.token_end - 1), ";");
        return;
      }
    }
  }

  const syntax::ParsedUnit& unit_;
  std::string_view src_;
  SourceLocation span_;
  std::string prefix_;
  std::vector<std::size_t> line_starts_;
  std::vector<MutationRecord> out_;
};

}  // namespace

std::vector<MutationRecord> enumerate_rule_mutants(const syntax::ParsedUnit& unit,
                                                   std::string_view source,
                                                   const std::set<RuleOperator>& operators,
                                                   const SourceLocation& span,
                                                   std::string_view id_prefix) {
  if (!unit.ok() || unit.tree.empty() || operators.empty()) return {};
  Enumerator e(unit, source, span, id_prefix);
  e.visit(unit.tree.root(), operators);
  return e.take();
}

std::vector<std::string> line_substitutions(std::string_view line) {
  auto lexed = syntax::lex(line);
  const auto& toks = lexed.tokens;
  std::vector<std::string> out;
  auto replace = [&](std::size_t i, const std::string& r) {
    const auto& t = toks[i];
    std::string s(line.substr(0, t.offset));
    s += r;
    s += line.substr(t.offset + t.text.size());
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(std::move(s));
  };
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    if (t.kind == TokenKind::IntLiteral || t.kind == TokenKind::BoolLiteral) {
      for (const auto& r : literal_replacements(t.text)) replace(i, r);
      continue;
    }
    if (t.kind != TokenKind::Operator) continue;
    // Binary position only: the previous token ends an operand.
    bool binary = i > 0 && (toks[i - 1].kind == TokenKind::Identifier ||
                            toks[i - 1].kind == TokenKind::IntLiteral ||
                            toks[i - 1].kind == TokenKind::BoolLiteral ||
                            toks[i - 1].text == ")");
    if (!binary) continue;
    for (auto op : {RuleOperator::AOR, RuleOperator::LOR, RuleOperator::ROR}) {
      for (const auto& r : operator_replacements(op, t.text)) replace(i, r);
    }
  }
  return out;
}

}  // namespace mutforge::rulegen
