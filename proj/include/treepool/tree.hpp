#pragma once

#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace treepool {

// Parse failure; `offset` is the 1-based byte position of the problem.
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, std::size_t offset_)
      : std::runtime_error(msg + " at offset " + std::to_string(offset_)), offset(offset_) {}
  std::size_t offset;
};

struct TreeNode {
  int id = 0;
  int parent = -1;  // -1 for the root
  std::string label;
  std::vector<int> children;
};

// Labeled ordered rooted tree. Node ids are depth-first pre-order from the
// root with children left to right; every matrix over nodes uses this order.
class ConstituencyTree {
 public:
  ConstituencyTree() = default;
  explicit ConstituencyTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  int n_nodes() const { return static_cast<int>(nodes_.size()); }
  int root() const { return 0; }
  const TreeNode& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  TreeNode& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }

  bool is_leaf(int id) const { return node(id).children.empty(); }

  int n_leaves() const {
    int c = 0;
    for (const auto& n : nodes_)
      if (n.children.empty()) ++c;
    return c;
  }

  // Edge depth of the deepest node.
  int depth() const {
    int best = 0;
    for (const auto& n : nodes_) {
      int d = 0;
      for (int p = n.parent; p != -1; p = node(p).parent) ++d;
      best = std::max(best, d);
    }
    return best;
  }

  bool structurally_equal(const ConstituencyTree& o) const {
    if (n_nodes() != o.n_nodes()) return false;
    for (int i = 0; i < n_nodes(); ++i) {
      const TreeNode& a = node(i);
      const TreeNode& b = o.node(i);
      if (a.label != b.label || a.parent != b.parent || a.children != b.children) return false;
    }
    return true;
  }

 private:
  std::vector<TreeNode> nodes_;
};

struct ParseOptions {
  int max_nodes = 256;            // larger trees are rejected with a diagnostic
  bool lowercase_tokens = false;  // lowercase leaf labels (off: kernel identity is case-sensitive)
};

namespace detail {

inline bool is_delim(char c) {
  return c == '(' || c == ')' || std::isspace(static_cast<unsigned char>(c));
}

}  // namespace detail

// Parses a Penn-style bracketed tree: "(S (NP (PRP it)) (VP (VBZ works)))".
// Labels are whitespace-delimited; a bare atom inside a parent is a leaf
// token. Exactly one top-level tree is allowed.
inline ConstituencyTree parse_bracketed(std::string_view text, const ParseOptions& opt = {}) {
  std::vector<TreeNode> nodes;
  std::vector<int> stack;  // open internal nodes
  std::size_t i = 0;
  bool saw_root = false;

  auto add_node = [&](std::string label, std::size_t at) -> int {
    if (static_cast<int>(nodes.size()) >= opt.max_nodes)
      throw ParseError("tree exceeds node cap of " + std::to_string(opt.max_nodes), at + 1);
    TreeNode n;
    n.id = static_cast<int>(nodes.size());
    n.label = std::move(label);
    if (!stack.empty()) {
      n.parent = stack.back();
      nodes[static_cast<std::size_t>(stack.back())].children.push_back(n.id);
    }
    nodes.push_back(std::move(n));
    return nodes.back().id;
  };

  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '(') {
      if (saw_root && stack.empty())
        throw ParseError("multiple top-level trees", i + 1);
      std::size_t open_at = i;
      ++i;
      while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      std::size_t start = i;
      while (i < text.size() && !detail::is_delim(text[i])) ++i;
      if (i == start) throw ParseError("empty label", i + 1);
      int id = add_node(std::string(text.substr(start, i - start)), open_at);
      stack.push_back(id);
      saw_root = true;
      continue;
    }
    if (c == ')') {
      if (stack.empty()) throw ParseError("unbalanced ')'", i + 1);
      stack.pop_back();
      ++i;
      continue;
    }
    // bare atom: a leaf token
    if (stack.empty()) throw ParseError("token outside any tree", i + 1);
    std::size_t start = i;
    while (i < text.size() && !detail::is_delim(text[i])) ++i;
    add_node(std::string(text.substr(start, i - start)), start);
  }

  if (!stack.empty()) throw ParseError("unbalanced '(': input ended early", text.size() + 1);
  if (!saw_root) throw ParseError("empty input", 1);

  if (opt.lowercase_tokens) {
    for (TreeNode& n : nodes)
      if (n.children.empty())
        for (char& ch : n.label) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return ConstituencyTree(std::move(nodes));
}

namespace detail {

inline void render_node(const ConstituencyTree& t, int id, std::string& out) {
  const TreeNode& n = t.node(id);
  if (n.children.empty()) {
    out += n.label;
    return;
  }
  out += '(';
  out += n.label;
  for (int c : n.children) {
    out += ' ';
    render_node(t, c, out);
  }
  out += ')';
}

}  // namespace detail

// Canonical single-space bracketed form. Childless non-root nodes render as
// bare labels, so fragment frontiers read as "(S NP VP)"; the root is always
// parenthesized ("(NN)" for a one-node tree). parse(render(t)) is structurally
// identical to t.
inline std::string render_bracketed(const ConstituencyTree& t) {
  const TreeNode& r = t.node(t.root());
  std::string out;
  if (r.children.empty()) {
    out += '(';
    out += r.label;
    out += ')';
    return out;
  }
  detail::render_node(t, t.root(), out);
  return out;
}

}  // namespace treepool
