#pragma once

#include <map>
#include <string>
#include <vector>

#include "syntax/tree.hpp"

namespace mutforge::syntax {

enum class EditType { Insert, Delete, Update, Move };

const char* to_string(EditType t) noexcept;

struct EditAction {
  EditType type;
  // Node in `before` (Delete/Update/Move) or kNoNode.
  NodeId before = kNoNode;
  // Node in `after` (Insert/Update/Move) or kNoNode.
  NodeId after = kNoNode;
  // Kind and label the affected node ends up with (Insert/Update).
  NodeKind kind = NodeKind::Program;
  std::string label;
};

struct EditScript {
  std::vector<EditAction> actions;
  std::size_t distance() const { return actions.size(); }
};

/// Minimum-cost ordered tree edit script with unit-cost insert, delete and
/// update (Zhang-Shasha). Identical trees short-circuit on subtree hashes.
/// Never emits Move: a minimal insert/delete/update script has none.
EditScript tree_diff(const SyntaxTree& before, const SyntaxTree& after);

/// Distance only; same value as tree_diff(...).distance().
std::size_t tree_distance(const SyntaxTree& before, const SyntaxTree& after);

using KindHistogram = std::map<NodeKind, std::size_t>;

/// Kinds of nodes in `after` whose (kind, label, ancestor-kind path) does
/// not occur anywhere in `before`, counted with multiplicity.
KindHistogram new_node_kinds(const SyntaxTree& before, const SyntaxTree& after);

/// True iff `mutated` is obtained from `original` by removing at least one
/// token and adding none (strict subsequence, the empty sequence included).
bool is_deletion(const std::vector<std::string>& original,
                 const std::vector<std::string>& mutated);

}  // namespace mutforge::syntax
