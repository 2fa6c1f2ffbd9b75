#include "syntax/tree.hpp"

#include <array>
#include <functional>

namespace mutforge::syntax {

namespace {

constexpr std::array<const char*, kNodeKindCount> kKindNames = {
    "Program",          "FunctionDecl",    "Block",           "IfStmt",
    "WhileStmt",        "ReturnStmt",      "Assignment",      "VarDecl",
    "ExprStmt",         "MethodInvocation", "MemberReference", "BinaryOperation",
    "UnaryOperation",   "Literal",         "Identifier",      "ArgumentList",
    "EmptyStmt"};

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

}  // namespace

const char* to_string(NodeKind kind) noexcept {
  return kKindNames[static_cast<std::size_t>(kind)];
}

std::optional<NodeKind> node_kind_from_string(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (name == kKindNames[i]) return static_cast<NodeKind>(i);
  }
  return std::nullopt;
}

bool is_statement(NodeKind kind) noexcept {
  switch (kind) {
    case NodeKind::IfStmt:
    case NodeKind::WhileStmt:
    case NodeKind::ReturnStmt:
    case NodeKind::Assignment:
    case NodeKind::VarDecl:
    case NodeKind::ExprStmt:
    case NodeKind::EmptyStmt:
    case NodeKind::Block:
      return true;
    default:
      return false;
  }
}

NodeId SyntaxTree::add(NodeKind kind, std::string label, NodeId parent) {
  auto id = static_cast<NodeId>(nodes_.size());
  Node n;
  n.kind = kind;
  n.label = std::move(label);
  n.parent = parent;
  nodes_.push_back(std::move(n));
  if (parent != kNoNode) node(parent).children.push_back(id);
  return id;
}

std::vector<NodeId> SyntaxTree::preorder() const {
  std::vector<NodeId> out;
  if (nodes_.empty()) return out;
  out.reserve(nodes_.size());
  std::vector<NodeId> stack{0};
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    out.push_back(id);
    const auto& ch = node(id).children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

std::vector<NodeId> SyntaxTree::postorder() const {
  std::vector<NodeId> out;
  if (nodes_.empty()) return out;
  out.reserve(nodes_.size());
  // (node, next child index)
  std::vector<std::pair<NodeId, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto& [id, next] = stack.back();
    const auto& ch = node(id).children;
    if (next < ch.size()) {
      NodeId c = ch[next++];
      stack.emplace_back(c, 0);
    } else {
      out.push_back(id);
      stack.pop_back();
    }
  }
  return out;
}

SyntaxTree SyntaxTree::subtree(NodeId id) const {
  SyntaxTree out;
  std::function<void(NodeId, NodeId)> copy = [&](NodeId src, NodeId parent) {
    const Node& n = node(src);
    NodeId dst = out.add(n.kind, n.label, parent);
    Node& d = out.node(dst);
    d.token_begin = n.token_begin;
    d.token_end = n.token_end;
    d.line_begin = n.line_begin;
    d.line_end = n.line_end;
    for (NodeId c : n.children) copy(c, dst);
  };
  copy(id, kNoNode);
  return out;
}

bool SyntaxTree::equal_at(NodeId a, const SyntaxTree& other, NodeId b) const {
  const Node& x = node(a);
  const Node& y = other.node(b);
  if (x.kind != y.kind || x.label != y.label || x.children.size() != y.children.size()) {
    return false;
  }
  for (std::size_t i = 0; i < x.children.size(); ++i) {
    if (!equal_at(x.children[i], other, y.children[i])) return false;
  }
  return true;
}

bool SyntaxTree::same_as(const SyntaxTree& other) const {
  if (size() != other.size()) return false;
  if (empty()) return true;
  return equal_at(0, other, 0);
}

std::uint64_t SyntaxTree::subtree_hash(NodeId id) const {
  const Node& n = node(id);
  std::uint64_t h = fnv1a(n.label, fnv1a(to_string(n.kind)));
  h = mix(h, n.children.size());
  for (NodeId c : n.children) h = mix(h, subtree_hash(c));
  return h;
}

NodeId SyntaxTree::innermost_covering(std::size_t begin, std::size_t end) const {
  if (nodes_.empty()) return kNoNode;
  if (begin == end) ++end;
  auto covers = [&](const Node& n) {
    if (n.token_end <= n.token_begin) return false;
    return n.token_begin <= begin && end <= n.token_end;
  };
  if (!covers(node(0))) return kNoNode;
  NodeId cur = 0;
  bool descended = true;
  while (descended) {
    descended = false;
    for (NodeId c : node(cur).children) {
      if (covers(node(c))) {
        cur = c;
        descended = true;
        break;
      }
    }
  }
  return cur;
}

void SyntaxTree::sexpr_at(NodeId id, std::string& out) const {
  const Node& n = node(id);
  out += '(';
  out += to_string(n.kind);
  if (!n.label.empty()) {
    out += ':';
    out += n.label;
  }
  for (NodeId c : n.children) {
    out += ' ';
    sexpr_at(c, out);
  }
  out += ')';
}

std::string SyntaxTree::to_sexpr() const {
  std::string out;
  if (!nodes_.empty()) sexpr_at(0, out);
  return out;
}

}  // namespace mutforge::syntax
