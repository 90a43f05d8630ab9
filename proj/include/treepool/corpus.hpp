#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "treepool/dataset.hpp"
#include "treepool/enumeration.hpp"
#include "treepool/tree.hpp"

namespace treepool {

// Structural pattern containment: `pattern` matches at a node when labels
// agree and the pattern's children embed, in order, into the node's children
// (extra siblings allowed). Childless pattern nodes are frontiers and match
// any node with that label.
namespace detail {

inline bool pattern_matches_at(const ConstituencyTree& t, int v, const ConstituencyTree& p, int pn);

inline bool pattern_children_embed(const ConstituencyTree& t, const std::vector<int>& vc,
                                   const ConstituencyTree& p, const std::vector<int>& pc,
                                   std::size_t vi, std::size_t pi) {
  if (pi == pc.size()) return true;
  if (vi == vc.size()) return false;
  if (pattern_matches_at(t, vc[vi], p, pc[pi]) &&
      pattern_children_embed(t, vc, p, pc, vi + 1, pi + 1))
    return true;
  return pattern_children_embed(t, vc, p, pc, vi + 1, pi);
}

inline bool pattern_matches_at(const ConstituencyTree& t, int v, const ConstituencyTree& p, int pn) {
  if (t.node(v).label != p.node(pn).label) return false;
  const auto& pc = p.node(pn).children;
  if (pc.empty()) return true;  // frontier
  return pattern_children_embed(t, t.node(v).children, p, pc, 0, 0);
}

}  // namespace detail

inline bool contains_pattern(const ConstituencyTree& tree, const ConstituencyTree& pattern) {
  for (int v = 0; v < tree.n_nodes(); ++v)
    if (detail::pattern_matches_at(tree, v, pattern, pattern.root())) return true;
  return false;
}

// Small random trees over a deliberately tiny alphabet (label collisions are
// the interesting case for kernels). Used by the kernel/constraint oracle
// suites and property tests.
inline ConstituencyTree random_tree(Rng& rng, int max_nodes) {
  if (max_nodes < 1) throw std::invalid_argument("random_tree: max_nodes must be >= 1");
  const char* tags[] = {"A", "B", "C"};
  const char* toks[] = {"x", "y"};
  int budget = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_nodes)));
  std::function<std::string(int&, int)> grow = [&](int& left, int depth) -> std::string {
    if (left <= 1 || (depth > 0 && rng.uniform() < 0.3)) {
      left -= 1;
      return toks[rng.below(2)];
    }
    left -= 1;
    std::string s = "(";
    s += tags[rng.below(3)];
    int n_children = 1 + static_cast<int>(rng.below(3));
    for (int c = 0; c < n_children && left > 0; ++c) {
      s += ' ';
      s += grow(left, depth + 1);
    }
    s += ')';
    return s;
  };
  int left = budget;
  std::string src = grow(left, 0);
  if (src[0] != '(') src = "(A " + src + ")";  // budget of 1 grows a bare token
  return parse_bracketed(src);
}

// ---- planted-pattern corpus --------------------------------------------------

struct SynthCorpusSpec {
  struct ClassSpec {
    std::string name;
    std::string pattern;  // bracketed fragment planted in every sample; may be empty
  };
  int n_per_class = 500;
  std::vector<ClassSpec> classes = {{"claim", "(VP (MD should) VP)"}, {"noarg", ""}};
  int max_depth = 4;
  double noise_rate = 0.0;  // probability a sample omits its class pattern
  int max_nodes = 64;
  std::uint64_t seed = 1;

  void validate() const {
    if (classes.size() < 2) throw std::invalid_argument("corpus spec needs >= 2 classes");
    if (n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
    if (noise_rate < 0.0 || noise_rate > 1.0)
      throw std::invalid_argument("noise_rate must be in [0,1]");
    if (max_depth < 2) throw std::invalid_argument("max_depth must be >= 2");
  }
};

namespace detail {

// Fixed toy grammar for sentence skeletons. The pattern vocabulary (MD,
// "should", "their", "studies", ...) never appears here, so a class pattern
// cannot arise by chance in another class's trees; generation still rejects
// cross-class matches as a belt check.
struct SkeletonGrammar {
  std::map<std::string, std::vector<std::string>> token_pool = {
      {"DT", {"the", "a", "this", "some"}},
      {"NN", {"dog", "idea", "house", "time", "argument", "point"}},
      {"NNS", {"dogs", "ideas", "houses", "reasons"}},
      {"JJ", {"big", "red", "good", "new"}},
      {"VB", {"run", "see", "make", "take"}},
      {"VBZ", {"runs", "sees", "makes", "stays"}},
      {"IN", {"in", "of", "with", "on"}},
      {"PRP", {"it", "they", "he"}},
  };

  std::string expand(Rng& rng, const std::string& cat, int depth) const {
    auto tok = [&](const char* tag) {
      const auto& pool = token_pool.at(tag);
      return "(" + std::string(tag) + " " + pool[rng.below(pool.size())] + ")";
    };
    if (cat == "S") return "(S " + expand(rng, "NP", depth - 1) + " " + expand(rng, "VP", depth - 1) + ")";
    if (cat == "NP") {
      if (depth > 1 && rng.uniform() < 0.25)
        return "(NP " + tok("DT") + " " + tok("JJ") + " " + tok("NN") + ")";
      if (depth > 2 && rng.uniform() < 0.2)
        return "(NP (NP " + tok("DT") + " " + tok("NN") + ") " + expand(rng, "PP", depth - 1) + ")";
      switch (rng.below(3)) {
        case 0: return "(NP " + tok("DT") + " " + tok("NN") + ")";
        case 1: return "(NP " + tok("NNS") + ")";
        default: return "(NP " + tok("PRP") + ")";
      }
    }
    if (cat == "VP") {
      if (depth <= 1) return "(VP " + tok("VBZ") + ")";
      if (depth > 2 && rng.uniform() < 0.25)
        return "(VP " + tok("VBZ") + " " + expand(rng, "NP", depth - 1) + " " +
               expand(rng, "PP", depth - 1) + ")";
      switch (rng.below(3)) {
        case 0: return "(VP " + tok("VBZ") + " " + expand(rng, "NP", depth - 1) + ")";
        case 1: return "(VP " + tok("VB") + " " + expand(rng, "NP", depth - 1) + ")";
        default: return "(VP " + tok("VBZ") + ")";
      }
    }
    if (cat == "PP") return "(PP " + tok("IN") + " " + expand(rng, "NP", depth - 1) + ")";
    // unknown category: a pre-terminal with a generic token
    return "(" + cat + " " + token_pool.at("NN")[rng.below(4)] + ")";
  }
};

// Renders the pattern, expanding frontier categories through the grammar so
// the planted fragment embeds in ordinary structure.
inline std::string instantiate_pattern(Rng& rng, const SkeletonGrammar& g,
                                       const ConstituencyTree& pattern, int id, int depth) {
  const TreeNode& n = pattern.node(id);
  if (n.children.empty()) {
    bool is_category = g.token_pool.count(n.label) > 0 || n.label == "S" || n.label == "NP" ||
                       n.label == "VP" || n.label == "PP";
    if (is_category && id != pattern.root()) return g.expand(rng, n.label, depth);
    return n.label;  // literal token
  }
  std::string s = "(" + n.label;
  for (int c : n.children) s += " " + instantiate_pattern(rng, g, pattern, c, depth - 1);
  s += ")";
  return s;
}

inline int count_label(const ConstituencyTree& t, const std::string& label) {
  int c = 0;
  for (const auto& n : t.nodes())
    if (n.label == label && !n.children.empty()) ++c;
  return c;
}

// Replace the subtree at `at` with freshly parsed `replacement` text, by
// splicing bracketed strings.
inline std::string splice(const ConstituencyTree& t, int at, const std::string& replacement) {
  std::string out;
  std::function<void(int)> walk = [&](int id) {
    if (id == at) {
      out += replacement;
      return;
    }
    const TreeNode& n = t.node(id);
    if (n.children.empty() && id != t.root()) {
      out += n.label;
      return;
    }
    out += "(" + n.label;
    for (int c : n.children) {
      out += ' ';
      walk(c);
    }
    out += ')';
  };
  walk(t.root());
  return out;
}

}  // namespace detail

// Deterministic planted-pattern corpus: every sample of a class embeds that
// class's pattern (unless dropped by noise); no sample matches another
// class's pattern. Trees stay under spec.max_nodes.
inline std::vector<Record> gen_corpus(const SynthCorpusSpec& spec) {
  spec.validate();
  detail::SkeletonGrammar grammar;
  std::vector<ConstituencyTree> patterns;
  for (const auto& c : spec.classes)
    patterns.push_back(c.pattern.empty() ? ConstituencyTree() : parse_bracketed(c.pattern));

  Rng rng(spec.seed);
  std::vector<Record> out;
  for (std::size_t ci = 0; ci < spec.classes.size(); ++ci) {
    const auto& cls = spec.classes[ci];
    bool has_pattern = !cls.pattern.empty();
    for (int s = 0; s < spec.n_per_class; ++s) {
      ConstituencyTree tree;
      for (int attempt = 0;; ++attempt) {
        if (attempt > 200)
          throw std::runtime_error("corpus generation: cannot satisfy spec for class " + cls.name +
                                   " (pattern may not fit the grammar/depth)");
        std::string src = grammar.expand(rng, "S", spec.max_depth);
        ConstituencyTree skel = parse_bracketed(src, ParseOptions{spec.max_nodes * 2, false});
        bool implant = has_pattern && rng.uniform() >= spec.noise_rate;
        if (implant) {
          const std::string& root_cat = patterns[ci].node(0).label;
          int sites = detail::count_label(skel, root_cat);
          if (sites == 0) continue;
          int pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(sites)));
          int at = -1;
          for (const auto& n : skel.nodes())
            if (n.label == root_cat && !n.children.empty() && pick-- == 0) {
              at = n.id;
              break;
            }
          std::string inst = detail::instantiate_pattern(rng, grammar, patterns[ci],
                                                         patterns[ci].root(), spec.max_depth - 1);
          src = detail::splice(skel, at, inst);
        }
        ConstituencyTree candidate = parse_bracketed(src, ParseOptions{spec.max_nodes * 2, false});
        if (candidate.n_nodes() > spec.max_nodes) continue;
        if (implant && !contains_pattern(candidate, patterns[ci])) continue;
        bool cross = false;
        for (std::size_t cj = 0; cj < patterns.size(); ++cj) {
          if (cj == ci || spec.classes[cj].pattern.empty()) continue;
          if (contains_pattern(candidate, patterns[cj])) {
            cross = true;
            break;
          }
        }
        if (cross) continue;
        tree = std::move(candidate);
        break;
      }
      Record r;
      r.id = cls.name + "-" + std::to_string(s);
      r.label = cls.name;
      r.tree = render_bracketed(tree);
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace treepool
