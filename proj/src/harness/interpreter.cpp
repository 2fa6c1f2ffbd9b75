#include "harness/interpreter.hpp"

#include <charconv>
#include <limits>

#include "core/error.hpp"

namespace mutforge::harness {

using syntax::Node;
using syntax::NodeId;
using syntax::NodeKind;

namespace {

struct Abort {
  Verdict verdict;
  std::string message;
};

std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
std::int64_t wrap_sub(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
std::int64_t wrap_mul(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

constexpr std::int64_t kMin = std::numeric_limits<std::int64_t>::min();
constexpr std::int64_t kMax = std::numeric_limits<std::int64_t>::max();

class Machine {
 public:
  Machine(const syntax::CheckedProgram& p, std::uint64_t fuel) : prog_(p), fuel_(fuel) {}

  std::uint64_t steps() const { return steps_; }

  std::int64_t invoke(const syntax::FunctionRef& ref, const std::vector<std::int64_t>& args) {
    if (depth_ >= kMaxCallDepth) throw Abort{Verdict::Crash, "call depth exceeded"};
    const syntax::ParsedUnit& unit = prog_.units[ref.unit];
    const syntax::FunctionSig& sig = *ref.sig;
    Frame frame{&unit.tree, {}, false, 0};
    frame.scopes.emplace_back();
    for (std::size_t i = 0; i < sig.param_names.size(); ++i) {
      frame.scopes.back().emplace_back(sig.param_names[i], args.at(i));
    }
    ++depth_;
    frames_.push_back(std::move(frame));
    NodeId body = unit.tree.node(sig.node).children.back();
    exec_block(body, false);
    std::int64_t rv = frames_.back().return_value;
    frames_.pop_back();
    --depth_;
    return rv;
  }

 private:
  struct Frame {
    const syntax::SyntaxTree* tree;
    std::vector<std::vector<std::pair<std::string, std::int64_t>>> scopes;
    bool returning;
    std::int64_t return_value;
  };

  Frame& frame() { return frames_.back(); }
  const Node& node(NodeId id) { return frame().tree->node(id); }

  void tick() {
    if (++steps_ > fuel_) throw Abort{Verdict::Timeout, "step budget exhausted"};
  }

  std::int64_t* find_var(std::string_view name) {
    auto& scopes = frame().scopes;
    for (auto s = scopes.rbegin(); s != scopes.rend(); ++s) {
      for (auto& [n, v] : *s) {
        if (n == name) return &v;
      }
    }
    return nullptr;
  }

  void exec_block(NodeId id, bool new_scope) {
    if (new_scope) frame().scopes.emplace_back();
    for (NodeId s : node(id).children) {
      exec(s);
      if (frame().returning) break;
    }
    if (new_scope) frame().scopes.pop_back();
  }

  void exec(NodeId id) {
    tick();
    const Node& n = node(id);
    switch (n.kind) {
      case NodeKind::EmptyStmt:
        return;
      case NodeKind::Block:
        exec_block(id, true);
        return;
      case NodeKind::VarDecl: {
        std::int64_t v = eval(n.children[0]);
        frame().scopes.back().emplace_back(n.label, v);
        return;
      }
      case NodeKind::Assignment: {
        std::int64_t v = eval(n.children[1]);
        std::int64_t* slot = find_var(node(n.children[0]).label);
        if (!slot) throw Abort{Verdict::Crash, "assignment to undeclared variable"};
        *slot = v;
        return;
      }
      case NodeKind::IfStmt: {
        if (eval(n.children[0])) {
          exec_block(n.children[1], true);
        } else if (n.children.size() > 2) {
          NodeId alt = n.children[2];
          if (node(alt).kind == NodeKind::Block) {
            exec_block(alt, true);
          } else {
            exec(alt);
          }
        }
        return;
      }
      case NodeKind::WhileStmt:
        while (eval(n.children[0])) {
          exec_block(n.children[1], true);
          if (frame().returning) return;
          tick();
        }
        return;
      case NodeKind::ReturnStmt:
        frame().return_value = n.children.empty() ? 0 : eval(n.children[0]);
        frame().returning = true;
        return;
      case NodeKind::ExprStmt:
        eval(n.children[0]);
        return;
      default:
        throw Abort{Verdict::Crash, "unexpected statement node"};
    }
  }

  std::int64_t eval(NodeId id) {
    tick();
    const Node& n = node(id);
    switch (n.kind) {
      case NodeKind::Literal: {
        if (n.label == "true") return 1;
        if (n.label == "false") return 0;
        std::int64_t v = 0;
        std::from_chars(n.label.data(), n.label.data() + n.label.size(), v);
        return v;
      }
      case NodeKind::Identifier: {
        std::int64_t* v = find_var(n.label);
        if (!v) throw Abort{Verdict::Crash, "read of undeclared variable"};
        return *v;
      }
      case NodeKind::MemberReference:
        return n.label == "maxint" ? kMax : kMin;
      case NodeKind::UnaryOperation: {
        std::int64_t v = eval(n.children[0]);
        return n.label == "!" ? !v : wrap_sub(0, v);
      }
      case NodeKind::BinaryOperation:
        return binary(n);
      case NodeKind::MethodInvocation:
        return call(n);
      default:
        throw Abort{Verdict::Crash, "unexpected expression node"};
    }
  }

  std::int64_t binary(const Node& n) {
    const std::string& op = n.label;
    if (op == "&&") return eval(n.children[0]) ? eval(n.children[1]) != 0 : 0;
    if (op == "||") return eval(n.children[0]) ? 1 : eval(n.children[1]) != 0;
    std::int64_t a = eval(n.children[0]);
    std::int64_t b = eval(n.children[1]);
    if (op == "+") return wrap_add(a, b);
    if (op == "-") return wrap_sub(a, b);
    if (op == "*") return wrap_mul(a, b);
    if (op == "/" || op == "%") {
      if (b == 0) throw Abort{Verdict::Crash, "division by zero"};
      if (a == kMin && b == -1) return op == "/" ? kMin : 0;
      return op == "/" ? a / b : a % b;
    }
    if (op == "<") return a < b;
    if (op == "<=") return a <= b;
    if (op == ">") return a > b;
    if (op == ">=") return a >= b;
    if (op == "==") return a == b;
    if (op == "!=") return a != b;
    throw Abort{Verdict::Crash, "unknown operator " + op};
  }

  std::int64_t call(const Node& n) {
    const auto& arg_nodes = node(n.children.back()).children;
    std::vector<std::int64_t> args;
    if (n.children.size() == 2) {
      const Node& q = node(n.children[0]);
      bool is_namespace = q.kind == NodeKind::Identifier && !find_var(q.label);
      if (is_namespace) {
        for (NodeId a : arg_nodes) args.push_back(eval(a));
        if (n.label == "abs") return args[0] < 0 ? wrap_sub(0, args[0]) : args[0];
        if (n.label == "min") return std::min(args[0], args[1]);
        if (n.label == "max") return std::max(args[0], args[1]);
        throw Abort{Verdict::Crash, "unknown builtin " + n.label};
      }
      args.push_back(eval(n.children[0]));
    }
    for (NodeId a : arg_nodes) args.push_back(eval(a));
    auto it = prog_.functions.find(n.label);
    if (it == prog_.functions.end()) {
      if (n.label == "assert") {
        if (!args.at(0)) throw Abort{Verdict::Fail, "assertion failed"};
        return 0;
      }
      throw Abort{Verdict::Crash, "unknown function " + n.label};
    }
    return invoke(it->second, args);
  }

  const syntax::CheckedProgram& prog_;
  std::uint64_t fuel_;
  std::uint64_t steps_ = 0;
  int depth_ = 0;
  std::vector<Frame> frames_;
};

}  // namespace

Interpreter::Interpreter(const syntax::CheckedProgram& program, std::uint64_t fuel)
    : program_(program), fuel_(fuel) {}

RunResult Interpreter::call(std::string_view function, const std::vector<std::int64_t>& args,
                            std::int64_t* result) {
  auto it = program_.functions.find(function);
  if (it == program_.functions.end()) {
    throw Error(ErrorCode::InvalidArgument, "no function named '" + std::string(function) + "'");
  }
  if (it->second.sig->param_names.size() != args.size()) {
    throw Error(ErrorCode::InvalidArgument, "wrong argument count for '" + std::string(function) + "'");
  }
  Machine m(program_, fuel_);
  RunResult out;
  try {
    std::int64_t v = m.invoke(it->second, args);
    if (result) *result = v;
    out.verdict = Verdict::Pass;
  } catch (const Abort& a) {
    out.verdict = a.verdict;
    out.message = a.message;
  }
  out.steps = m.steps();
  return out;
}

std::vector<std::string> list_minilang_tests(const syntax::CheckedProgram& program) {
  std::vector<std::string> out;
  for (const auto& unit : program.units) {
    if (unit.file.rfind("tests/", 0) != 0) continue;
    for (const auto& sig : unit.functions) {
      if (sig.name.rfind("test_", 0) == 0 && sig.param_names.empty() &&
          sig.return_type == syntax::ValueType::Void) {
        out.push_back(sig.name);
      }
    }
  }
  return out;
}

}  // namespace mutforge::harness
