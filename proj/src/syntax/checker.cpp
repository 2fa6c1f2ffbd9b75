#include <charconv>
#include <cstdint>
#include <set>

#include "syntax/minilang.hpp"

namespace mutforge::syntax {

const char* to_string(ValueType t) noexcept {
  switch (t) {
    case ValueType::Int: return "int";
    case ValueType::Bool: return "bool";
    case ValueType::Void: return "void";
    case ValueType::Error: return "<error>";
  }
  return "?";
}

std::optional<FunctionSig> builtin_function(std::string_view qualifier,
                                            std::string_view name) {
  FunctionSig sig;
  sig.name = std::string(name);
  if (qualifier.empty()) {
    if (name == "assert") {
      sig.param_names = {"cond"};
      sig.param_types = {ValueType::Bool};
      sig.return_type = ValueType::Void;
      return sig;
    }
    return std::nullopt;
  }
  if (qualifier != kMathNamespace) return std::nullopt;
  if (name == "abs") {
    sig.param_names = {"x"};
    sig.param_types = {ValueType::Int};
  } else if (name == "min" || name == "max") {
    sig.param_names = {"a", "b"};
    sig.param_types = {ValueType::Int, ValueType::Int};
  } else {
    return std::nullopt;
  }
  sig.return_type = ValueType::Int;
  return sig;
}

bool is_builtin_constant(std::string_view qualifier, std::string_view name) {
  return qualifier == kMathNamespace && (name == "maxint" || name == "minint");
}

namespace {

bool is_arith(std::string_view op) {
  return op == "+" || op == "-" || op == "*" || op == "/" || op == "%";
}
bool is_rel(std::string_view op) {
  return op == "<" || op == "<=" || op == ">" || op == ">=";
}
bool is_eq(std::string_view op) { return op == "==" || op == "!="; }
bool is_logic(std::string_view op) { return op == "&&" || op == "||"; }

class Checker {
 public:
  Checker(const ParsedUnit& unit, const CheckedProgram& prog,
          std::vector<MiniDiagnostic>& out)
      : unit_(unit), prog_(prog), out_(out) {}

  void check_function(const FunctionSig& sig) {
    fn_ = &sig;
    scopes_.clear();
    scopes_.emplace_back();
    for (std::size_t i = 0; i < sig.param_names.size(); ++i) {
      if (!declare(sig.param_names[i], sig.param_types[i])) {
        report(diag::kRedeclared, "duplicate parameter '" + sig.param_names[i] + "'",
               tree().node(sig.node).children[i]);
      }
    }
    const Node& fn = tree().node(sig.node);
    NodeId body = fn.children.back();
    bool completes = check_block(body, /*new_scope=*/false);
    if (completes && sig.return_type != ValueType::Void) {
      report(diag::kMissingReturn, "missing return statement in '" + sig.name + "'",
             body, /*at_end=*/true);
    }
  }

 private:
  const SyntaxTree& tree() const { return unit_.tree; }

  void report(std::string_view kind, std::string message, NodeId at,
              bool at_end = false) {
    const Node& n = tree().node(at);
    int line = n.line_begin, col = 1;
    if (!unit_.tokens.empty()) {
      std::size_t idx = at_end && n.token_end > 0 ? n.token_end - 1 : n.token_begin;
      idx = std::min(idx, unit_.tokens.size() - 1);
      line = unit_.tokens[idx].line;
      col = unit_.tokens[idx].column;
    }
    out_.push_back({std::string(kind), std::move(message), unit_.file, line, col});
  }

  bool declare(const std::string& name, ValueType t) {
    auto& scope = scopes_.back();
    for (auto& [n, _] : scope) {
      if (n == name) return false;
    }
    scope.emplace_back(name, t);
    return true;
  }

  std::optional<ValueType> lookup(std::string_view name) const {
    for (auto s = scopes_.rbegin(); s != scopes_.rend(); ++s) {
      for (auto& [n, t] : *s) {
        if (n == name) return t;
      }
    }
    return std::nullopt;
  }

  // Returns whether control can fall off the end of the block.
  bool check_block(NodeId block, bool new_scope) {
    if (new_scope) scopes_.emplace_back();
    bool completes = true;
    bool reported_unreachable = false;
    for (NodeId s : tree().node(block).children) {
      if (!completes && !reported_unreachable) {
        report(diag::kUnreachable, "unreachable statement", s);
        reported_unreachable = true;
      }
      bool c = check_statement(s);
      completes = completes && c;
    }
    if (new_scope) scopes_.pop_back();
    return completes;
  }

  void expect_type(NodeId expr, ValueType want, const char* context) {
    ValueType got = check_expr(expr);
    if (got == ValueType::Error || got == want) return;
    report(diag::kTypeError,
           std::string(context) + " expects " + to_string(want) + ", found " +
               to_string(got),
           expr);
  }

  bool check_statement(NodeId id) {
    const Node& n = tree().node(id);
    switch (n.kind) {
      case NodeKind::EmptyStmt:
        return true;
      case NodeKind::Block:
        return check_block(id, true);
      case NodeKind::VarDecl: {
        ValueType t = check_expr(n.children[0]);
        if (t == ValueType::Void) {
          report(diag::kTypeError, "cannot initialize '" + n.label + "' with void", id);
          t = ValueType::Error;
        }
        if (!declare(n.label, t)) {
          report(diag::kRedeclared, "variable '" + n.label + "' is already declared", id);
        }
        return true;
      }
      case NodeKind::Assignment: {
        const Node& target = tree().node(n.children[0]);
        auto t = lookup(target.label);
        if (!t) {
          report(diag::kUnknownVariable, "unknown variable '" + target.label + "'",
                 n.children[0]);
          check_expr(n.children[1]);
          return true;
        }
        if (*t == ValueType::Error) {
          check_expr(n.children[1]);
        } else {
          expect_type(n.children[1], *t, "assignment");
        }
        return true;
      }
      case NodeKind::IfStmt: {
        expect_type(n.children[0], ValueType::Bool, "if condition");
        bool then_completes = check_block(n.children[1], true);
        if (n.children.size() < 3) return true;
        NodeId alt = n.children[2];
        bool else_completes = tree().node(alt).kind == NodeKind::IfStmt
                                  ? check_statement(alt)
                                  : check_block(alt, true);
        return then_completes || else_completes;
      }
      case NodeKind::WhileStmt: {
        expect_type(n.children[0], ValueType::Bool, "while condition");
        check_block(n.children[1], true);
        const Node& cond = tree().node(n.children[0]);
        // No break statement exists, so `while (true)` never completes.
        return !(cond.kind == NodeKind::Literal && cond.label == "true");
      }
      case NodeKind::ReturnStmt: {
        if (n.children.empty()) {
          if (fn_->return_type != ValueType::Void) {
            report(diag::kTypeError, "missing return value", id);
          }
          return false;
        }
        if (fn_->return_type == ValueType::Void) {
          check_expr(n.children[0]);
          report(diag::kTypeError, "void function cannot return a value", id);
          return false;
        }
        expect_type(n.children[0], fn_->return_type, "return");
        return false;
      }
      case NodeKind::ExprStmt: {
        const Node& e = tree().node(n.children[0]);
        if (e.kind != NodeKind::MethodInvocation) {
          report(diag::kNotAStatement, "expression is not a statement", id);
        }
        check_expr(n.children[0]);
        return true;
      }
      default:
        report(diag::kParseError, "unexpected node in statement position", id);
        return true;
    }
  }

  ValueType check_call(NodeId id) {
    const Node& n = tree().node(id);
    NodeId args_id = n.children.back();
    const auto& args = tree().node(args_id).children;
    std::vector<NodeId> actuals;
    std::optional<FunctionSig> builtin;
    const FunctionSig* sig = nullptr;

    if (n.children.size() == 1) {
      auto it = prog_.functions.find(n.label);
      if (it != prog_.functions.end()) {
        sig = it->second.sig;
      } else if ((builtin = builtin_function({}, n.label))) {
        sig = &*builtin;
      } else {
        for (NodeId a : args) check_expr(a);
        report(diag::kUnknownFunction, "unknown function '" + n.label + "'", id);
        return ValueType::Error;
      }
    } else {
      NodeId qual = n.children[0];
      const Node& q = tree().node(qual);
      bool namespace_qualifier = q.kind == NodeKind::Identifier && !lookup(q.label);
      if (namespace_qualifier) {
        if (q.label != kMathNamespace) {
          for (NodeId a : args) check_expr(a);
          report(diag::kUnknownType, "unknown type or namespace '" + q.label + "'", qual);
          return ValueType::Error;
        }
        if ((builtin = builtin_function(q.label, n.label))) {
          sig = &*builtin;
        } else {
          for (NodeId a : args) check_expr(a);
          report(diag::kUnknownFunction,
                 "unknown function '" + q.label + "." + n.label + "'", id);
          return ValueType::Error;
        }
      } else {
        // Receiver-call sugar: x.f(a) calls f(x, a).
        auto it = prog_.functions.find(n.label);
        if (it == prog_.functions.end()) {
          check_expr(qual);
          for (NodeId a : args) check_expr(a);
          report(diag::kUnknownFunction, "unknown function '" + n.label + "'", id);
          return ValueType::Error;
        }
        sig = it->second.sig;
        actuals.push_back(qual);
      }
    }
    actuals.insert(actuals.end(), args.begin(), args.end());
    if (actuals.size() != sig->param_types.size()) {
      for (NodeId a : actuals) check_expr(a);
      report(diag::kArity,
             "'" + sig->name + "' expects " + std::to_string(sig->param_types.size()) +
                 " argument(s), found " + std::to_string(actuals.size()),
             id);
      return sig->return_type;
    }
    for (std::size_t i = 0; i < actuals.size(); ++i) {
      expect_type(actuals[i], sig->param_types[i], "argument");
    }
    return sig->return_type;
  }

  ValueType check_expr(NodeId id) {
    const Node& n = tree().node(id);
    switch (n.kind) {
      case NodeKind::Literal: {
        if (n.label == "true" || n.label == "false") return ValueType::Bool;
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(n.label.data(), n.label.data() + n.label.size(), v);
        if (ec != std::errc() || ptr != n.label.data() + n.label.size()) {
          report(diag::kTypeError, "invalid integer literal '" + n.label + "'", id);
          return ValueType::Error;
        }
        return ValueType::Int;
      }
      case NodeKind::Identifier: {
        auto t = lookup(n.label);
        if (!t) {
          report(diag::kUnknownVariable, "unknown variable '" + n.label + "'", id);
          return ValueType::Error;
        }
        return *t;
      }
      case NodeKind::MemberReference: {
        const Node& q = tree().node(n.children[0]);
        if (q.kind == NodeKind::Identifier && !lookup(q.label)) {
          if (q.label != kMathNamespace) {
            report(diag::kUnknownType, "unknown type or namespace '" + q.label + "'",
                   n.children[0]);
            return ValueType::Error;
          }
          if (!is_builtin_constant(q.label, n.label)) {
            report(diag::kUnknownVariable,
                   "unknown member '" + q.label + "." + n.label + "'", id);
            return ValueType::Error;
          }
          return ValueType::Int;
        }
        ValueType qt = check_expr(n.children[0]);
        if (qt != ValueType::Error) {
          report(diag::kTypeError,
                 std::string("type ") + to_string(qt) + " has no member '" + n.label + "'",
                 id);
        }
        return ValueType::Error;
      }
      case NodeKind::MethodInvocation:
        return check_call(id);
      case NodeKind::UnaryOperation: {
        ValueType want = n.label == "!" ? ValueType::Bool : ValueType::Int;
        expect_type(n.children[0], want, n.label == "!" ? "operator '!'" : "unary '-'");
        return want;
      }
      case NodeKind::BinaryOperation: {
        const std::string& op = n.label;
        if (is_arith(op) || is_rel(op)) {
          expect_type(n.children[0], ValueType::Int, ("operator '" + op + "'").c_str());
          expect_type(n.children[1], ValueType::Int, ("operator '" + op + "'").c_str());
          return is_arith(op) ? ValueType::Int : ValueType::Bool;
        }
        if (is_logic(op)) {
          expect_type(n.children[0], ValueType::Bool, ("operator '" + op + "'").c_str());
          expect_type(n.children[1], ValueType::Bool, ("operator '" + op + "'").c_str());
          return ValueType::Bool;
        }
        if (is_eq(op)) {
          ValueType a = check_expr(n.children[0]);
          ValueType b = check_expr(n.children[1]);
          if (a == ValueType::Error || b == ValueType::Error) return ValueType::Bool;
          if (a != b || a == ValueType::Void) {
            report(diag::kTypeError,
                   "cannot compare " + std::string(to_string(a)) + " with " + to_string(b),
                   id);
          }
          return ValueType::Bool;
        }
        report(diag::kParseError, "unknown operator '" + op + "'", id);
        return ValueType::Error;
      }
      default:
        report(diag::kParseError, "unexpected node in expression position", id);
        return ValueType::Error;
    }
  }

  const ParsedUnit& unit_;
  const CheckedProgram& prog_;
  std::vector<MiniDiagnostic>& out_;
  const FunctionSig* fn_ = nullptr;
  std::vector<std::vector<std::pair<std::string, ValueType>>> scopes_;
};

}  // namespace

CheckResult check_program(const std::vector<std::pair<std::string, std::string>>& files) {
  CheckResult result;
  auto prog = std::make_shared<CheckedProgram>();
  prog->units.reserve(files.size());
  for (const auto& [path, source] : files) {
    prog->units.push_back(parse_mini_unit(source, path));
    const auto& diags = prog->units.back().diagnostics;
    result.diagnostics.insert(result.diagnostics.end(), diags.begin(), diags.end());
  }
  if (!result.diagnostics.empty()) return result;

  for (std::size_t u = 0; u < prog->units.size(); ++u) {
    const ParsedUnit& unit = prog->units[u];
    for (const FunctionSig& sig : unit.functions) {
      bool clash = prog->functions.count(sig.name) > 0 ||
                   builtin_function({}, sig.name).has_value() ||
                   sig.name == kMathNamespace;
      if (clash) {
        const Node& n = unit.tree.node(sig.node);
        const Token& t = unit.tokens[n.token_begin];
        result.diagnostics.push_back({std::string(diag::kDuplicateFunction),
                                      "function '" + sig.name + "' is already defined",
                                      unit.file, t.line, t.column});
        continue;
      }
      prog->functions.emplace(sig.name, FunctionRef{u, &sig});
    }
  }
  for (const ParsedUnit& unit : prog->units) {
    Checker checker(unit, *prog, result.diagnostics);
    for (const FunctionSig& sig : unit.functions) checker.check_function(sig);
  }
  if (result.diagnostics.empty()) result.program = std::move(prog);
  return result;
}

}  // namespace mutforge::syntax
