#include "syntax/diff.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace mutforge::syntax {

const char* to_string(EditType t) noexcept {
  switch (t) {
    case EditType::Insert: return "Insert";
    case EditType::Delete: return "Delete";
    case EditType::Update: return "Update";
    case EditType::Move: return "Move";
  }
  return "?";
}

namespace {

// Post-order view of a tree with 1-based indices, as Zhang-Shasha expects.
struct Indexed {
  std::vector<NodeId> ids;  // ids[k] = tree node at post-order index k (1-based)
  std::vector<int> lmd;     // leftmost leaf descendant, post-order index
  std::vector<int> keyroots;

  explicit Indexed(const SyntaxTree& t) {
    ids.push_back(kNoNode);
    lmd.push_back(0);
    if (t.empty()) return;
    std::vector<NodeId> post = t.postorder();
    std::vector<int> index_of(t.size(), 0);
    for (NodeId id : post) {
      ids.push_back(id);
      index_of[static_cast<std::size_t>(id)] = static_cast<int>(ids.size()) - 1;
    }
    lmd.resize(ids.size());
    for (std::size_t k = 1; k < ids.size(); ++k) {
      const Node& n = t.node(ids[k]);
      lmd[k] = n.children.empty()
                   ? static_cast<int>(k)
                   : lmd[static_cast<std::size_t>(
                         index_of[static_cast<std::size_t>(n.children.front())])];
    }
    // A keyroot is the highest node for each distinct leftmost leaf.
    std::vector<bool> seen(ids.size(), false);
    for (int k = static_cast<int>(ids.size()) - 1; k >= 1; --k) {
      if (!seen[static_cast<std::size_t>(lmd[static_cast<std::size_t>(k)])]) {
        seen[static_cast<std::size_t>(lmd[static_cast<std::size_t>(k)])] = true;
        keyroots.push_back(k);
      }
    }
    std::sort(keyroots.begin(), keyroots.end());
  }

  int size() const { return static_cast<int>(ids.size()) - 1; }
};

class ZhangShasha {
 public:
  ZhangShasha(const SyntaxTree& a, const SyntaxTree& b)
      : a_(a), b_(b), ia_(a), ib_(b),
        td_(static_cast<std::size_t>(ia_.size() + 1),
            std::vector<int>(static_cast<std::size_t>(ib_.size() + 1), 0)) {}

  int run() {
    for (int i : ia_.keyroots) {
      for (int j : ib_.keyroots) forest(i, j, /*fill=*/true);
    }
    return td_[static_cast<std::size_t>(ia_.size())][static_cast<std::size_t>(ib_.size())];
  }

  EditScript script() {
    EditScript out;
    std::vector<bool> a_mapped(static_cast<std::size_t>(ia_.size() + 1), false);
    std::vector<bool> b_mapped(static_cast<std::size_t>(ib_.size() + 1), false);
    std::vector<std::pair<int, int>> pending{{ia_.size(), ib_.size()}};
    while (!pending.empty()) {
      auto [i, j] = pending.back();
      pending.pop_back();
      auto fd = forest(i, j, /*fill=*/false);
      int li = ia_.lmd[static_cast<std::size_t>(i)];
      int lj = ib_.lmd[static_cast<std::size_t>(j)];
      int x = i, y = j;
      auto at = [&](int p, int q) -> int {
        return fd[static_cast<std::size_t>(p - li + 1)][static_cast<std::size_t>(q - lj + 1)];
      };
      while (x >= li || y >= lj) {
        if (x >= li && at(x, y) == at(x - 1, y) + 1) {
          --x;  // x stays unmapped: deleted
          continue;
        }
        if (y >= lj && at(x, y) == at(x, y - 1) + 1) {
          --y;  // y stays unmapped: inserted
          continue;
        }
        // Diagonal step: either both are the roots of their current forests
        // (map them) or recurse into a subtree pair.
        int lx = ia_.lmd[static_cast<std::size_t>(x)];
        int ly = ib_.lmd[static_cast<std::size_t>(y)];
        if (lx == li && ly == lj) {
          a_mapped[static_cast<std::size_t>(x)] = true;
          b_mapped[static_cast<std::size_t>(y)] = true;
          if (cost(x, y) != 0) {
            const Node& nb = b_.node(ib_.ids[static_cast<std::size_t>(y)]);
            out.actions.push_back({EditType::Update, ia_.ids[static_cast<std::size_t>(x)],
                                   ib_.ids[static_cast<std::size_t>(y)], nb.kind, nb.label});
          }
          --x;
          --y;
        } else {
          pending.emplace_back(x, y);
          x = lx - 1;
          y = ly - 1;
        }
      }
    }
    for (int k = 1; k <= ia_.size(); ++k) {
      if (!a_mapped[static_cast<std::size_t>(k)]) {
        const Node& n = a_.node(ia_.ids[static_cast<std::size_t>(k)]);
        out.actions.push_back({EditType::Delete, ia_.ids[static_cast<std::size_t>(k)],
                               kNoNode, n.kind, n.label});
      }
    }
    for (int k = 1; k <= ib_.size(); ++k) {
      if (!b_mapped[static_cast<std::size_t>(k)]) {
        const Node& n = b_.node(ib_.ids[static_cast<std::size_t>(k)]);
        out.actions.push_back({EditType::Insert, kNoNode,
                               ib_.ids[static_cast<std::size_t>(k)], n.kind, n.label});
      }
    }
    return out;
  }

 private:
  using Table = std::vector<std::vector<int>>;

  int cost(int x, int y) const {
    const Node& na = a_.node(ia_.ids[static_cast<std::size_t>(x)]);
    const Node& nb = b_.node(ib_.ids[static_cast<std::size_t>(y)]);
    return na.kind == nb.kind && na.label == nb.label ? 0 : 1;
  }

  // Forest distance table for the subtrees rooted at i and j; row/column 0
  // are the empty forests. With fill, tree distances of root pairs are
  // recorded in td_.
  Table forest(int i, int j, bool fill) {
    int li = ia_.lmd[static_cast<std::size_t>(i)];
    int lj = ib_.lmd[static_cast<std::size_t>(j)];
    std::size_t rows = static_cast<std::size_t>(i - li + 2);
    std::size_t cols = static_cast<std::size_t>(j - lj + 2);
    Table fd(rows, std::vector<int>(cols, 0));
    for (std::size_t r = 1; r < rows; ++r) fd[r][0] = fd[r - 1][0] + 1;
    for (std::size_t c = 1; c < cols; ++c) fd[0][c] = fd[0][c - 1] + 1;
    for (int x = li; x <= i; ++x) {
      std::size_t r = static_cast<std::size_t>(x - li + 1);
      int lx = ia_.lmd[static_cast<std::size_t>(x)];
      for (int y = lj; y <= j; ++y) {
        std::size_t c = static_cast<std::size_t>(y - lj + 1);
        int ly = ib_.lmd[static_cast<std::size_t>(y)];
        int del = fd[r - 1][c] + 1;
        int ins = fd[r][c - 1] + 1;
        if (lx == li && ly == lj) {
          int upd = fd[r - 1][c - 1] + cost(x, y);
          fd[r][c] = std::min({del, ins, upd});
          if (fill) td_[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)] = fd[r][c];
        } else {
          std::size_t pr = static_cast<std::size_t>(lx - li);
          std::size_t pc = static_cast<std::size_t>(ly - lj);
          int sub = fd[pr][pc] + td_[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)];
          fd[r][c] = std::min({del, ins, sub});
        }
      }
    }
    return fd;
  }

  const SyntaxTree& a_;
  const SyntaxTree& b_;
  Indexed ia_;
  Indexed ib_;
  Table td_;
};

void add_all(const SyntaxTree& t, EditType type, EditScript& out) {
  for (NodeId id : t.postorder()) {
    const Node& n = t.node(id);
    if (type == EditType::Delete) {
      out.actions.push_back({type, id, kNoNode, n.kind, n.label});
    } else {
      out.actions.push_back({type, kNoNode, id, n.kind, n.label});
    }
  }
}

}  // namespace

EditScript tree_diff(const SyntaxTree& before, const SyntaxTree& after) {
  EditScript out;
  if (before.empty() || after.empty()) {
    add_all(before, EditType::Delete, out);
    add_all(after, EditType::Insert, out);
    return out;
  }
  if (before.size() == after.size() && before.subtree_hash(0) == after.subtree_hash(0) &&
      before.same_as(after)) {
    return out;
  }
  ZhangShasha zs(before, after);
  zs.run();
  return zs.script();
}

std::size_t tree_distance(const SyntaxTree& before, const SyntaxTree& after) {
  if (before.empty() || after.empty()) return before.size() + after.size();
  if (before.same_as(after)) return 0;
  ZhangShasha zs(before, after);
  return static_cast<std::size_t>(zs.run());
}

KindHistogram new_node_kinds(const SyntaxTree& before, const SyntaxTree& after) {
  using Key = std::tuple<NodeKind, std::string, std::vector<NodeKind>>;
  auto keys_of = [](const SyntaxTree& t, auto&& visit) {
    if (t.empty()) return;
    std::vector<std::pair<NodeId, std::vector<NodeKind>>> stack{{0, {}}};
    while (!stack.empty()) {
      auto [id, path] = std::move(stack.back());
      stack.pop_back();
      const Node& n = t.node(id);
      visit(Key{n.kind, n.label, path});
      path.push_back(n.kind);
      for (NodeId c : n.children) stack.emplace_back(c, path);
    }
  };
  std::set<Key> seen;
  keys_of(before, [&](Key k) { seen.insert(std::move(k)); });
  KindHistogram out;
  keys_of(after, [&](Key k) {
    if (!seen.count(k)) ++out[std::get<0>(k)];
  });
  return out;
}

bool is_deletion(const std::vector<std::string>& original,
                 const std::vector<std::string>& mutated) {
  if (mutated.size() >= original.size()) return false;
  std::size_t j = 0;
  for (std::size_t i = 0; i < original.size() && j < mutated.size(); ++i) {
    if (original[i] == mutated[j]) ++j;
  }
  return j == mutated.size();
}

}  // namespace mutforge::syntax
