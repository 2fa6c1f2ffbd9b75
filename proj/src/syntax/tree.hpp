#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mutforge::syntax {

// Names are part of the report format; do not rename.
enum class NodeKind {
  Program,
  FunctionDecl,
  Block,
  IfStmt,
  WhileStmt,
  ReturnStmt,
  Assignment,
  VarDecl,
  ExprStmt,
  MethodInvocation,
  MemberReference,
  BinaryOperation,
  UnaryOperation,
  Literal,
  Identifier,
  ArgumentList,
  EmptyStmt,
};

inline constexpr std::size_t kNodeKindCount = 17;

const char* to_string(NodeKind kind) noexcept;
std::optional<NodeKind> node_kind_from_string(std::string_view name) noexcept;
bool is_statement(NodeKind kind) noexcept;

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

struct Node {
  NodeKind kind = NodeKind::Program;
  std::string label;
  std::vector<NodeId> children;
  NodeId parent = kNoNode;
  // Half-open token index range [token_begin, token_end) in the source the
  // tree was parsed from. Synthetic trees leave both at 0.
  std::size_t token_begin = 0;
  std::size_t token_end = 0;
  int line_begin = 0;
  int line_end = 0;
};

/// Ordered rooted tree stored as an arena; node 0 is the root.
class SyntaxTree {
 public:
  SyntaxTree() = default;

  NodeId add(NodeKind kind, std::string label = {}, NodeId parent = kNoNode);

  const Node& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  Node& node(NodeId id) { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  NodeId root() const { return nodes_.empty() ? kNoNode : 0; }
  const std::vector<Node>& nodes() const { return nodes_; }

  /// Node ids in pre-order (parent before children, children left to right).
  std::vector<NodeId> preorder() const;
  /// Node ids in post-order.
  std::vector<NodeId> postorder() const;

  /// Copies the subtree rooted at `id` into a new tree.
  SyntaxTree subtree(NodeId id) const;

  /// Structural equality: same kinds, labels and shape.
  bool same_as(const SyntaxTree& other) const;

  /// Hash of kind, label and children hashes of the subtree at `id`.
  std::uint64_t subtree_hash(NodeId id) const;

  /// Innermost node whose token range covers [begin, end); an empty range is
  /// treated as the single token at `begin`. kNoNode when nothing covers it.
  NodeId innermost_covering(std::size_t begin, std::size_t end) const;

  /// S-expression rendering, e.g. (Program (FunctionDecl:f (Block))).
  std::string to_sexpr() const;

 private:
  bool equal_at(NodeId a, const SyntaxTree& other, NodeId b) const;
  void sexpr_at(NodeId id, std::string& out) const;

  std::vector<Node> nodes_;
};

}  // namespace mutforge::syntax
