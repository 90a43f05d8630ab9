#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "treepool/constraints.hpp"
#include "treepool/corpus.hpp"
#include "treepool/model.hpp"

namespace treepool {

// Renders the structure induced by a node subset. Members whose tree children
// are not all included render only the included ones; a member with no
// included children renders as a bare frontier label, matching the kernel
// fragment form. Disconnected sets render each component in pre-order,
// joined by " ++ ".
inline std::string render_node_set(const ConstituencyTree& tree, const std::vector<int>& nodes,
                                   bool largest_component_only = false) {
  std::set<int> in(nodes.begin(), nodes.end());
  if (in.empty()) return "";
  std::function<void(int, std::string&)> walk = [&](int id, std::string& out) {
    std::vector<int> kept;
    for (int c : tree.node(id).children)
      if (in.count(c)) kept.push_back(c);
    if (kept.empty()) {
      out += tree.node(id).label;
      return;
    }
    out += '(';
    out += tree.node(id).label;
    for (int c : kept) {
      out += ' ';
      walk(c, out);
    }
    out += ')';
  };
  // component roots: members whose parent is not a member, ascending pre-order
  std::vector<int> roots;
  for (int v : in) {
    int p = tree.node(v).parent;
    if (p == -1 || !in.count(p)) roots.push_back(v);
  }
  std::sort(roots.begin(), roots.end());
  if (largest_component_only && roots.size() > 1) {
    // component sizes via membership walk from each root
    std::function<int(int)> size_of = [&](int id) -> int {
      int s = 1;
      for (int c : tree.node(id).children)
        if (in.count(c)) s += size_of(c);
      return s;
    };
    int best = roots[0], best_size = size_of(roots[0]);
    for (std::size_t i = 1; i < roots.size(); ++i) {
      int s = size_of(roots[i]);
      if (s > best_size) {
        best = roots[i];
        best_size = s;
      }
    }
    roots = {best};
  }
  std::string out;
  for (std::size_t i = 0; i < roots.size(); ++i) {
    if (i) out += " ++ ";
    walk(roots[i], out);
  }
  return out;
}

// One thresholded cluster from a trained assignment matrix.
struct ExtractedSet {
  int cluster = 0;
  std::vector<int> nodes;
  double mean_activation = 0.0;
  bool connected = false;
  bool st_valid = false;   // unions of complete internal-rooted subtrees
  bool sst_valid = false;  // production-complete over non-leaf children
  std::string canonical;
};

// Active nodes per cluster column: {i : P_ic >= threshold}. Empty sets are
// dropped; each survivor carries oracle validity flags.
inline std::vector<ExtractedSet> extract(const Tensor& p, const ConstituencyTree& tree,
                                         const TreeGraph& graph, double threshold,
                                         bool largest_component_only = false) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("extraction threshold must lie in (0,1)");
  std::vector<ExtractedSet> out;
  for (std::size_t c = 0; c < p.cols(); ++c) {
    ExtractedSet s;
    s.cluster = static_cast<int>(c);
    double activation = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i)
      if (p.at(i, c) >= threshold) {
        s.nodes.push_back(static_cast<int>(i));
        activation += p.at(i, c);
      }
    if (s.nodes.empty()) continue;
    s.mean_activation = activation / static_cast<double>(s.nodes.size());
    s.connected = binary_validity_oracle(graph, s.nodes, OracleKind::Connected);
    s.st_valid = binary_validity_oracle(graph, s.nodes, OracleKind::ST);
    s.sst_valid = binary_validity_oracle(graph, s.nodes, OracleKind::SST);
    s.canonical = render_node_set(tree, s.nodes, largest_component_only);
    out.push_back(std::move(s));
  }
  return out;
}

// Extraction reads the first pooling layer: its rows are the tree's nodes.
inline std::vector<ExtractedSet> extract(const ForwardTrace& trace, const ConstituencyTree& tree,
                                         const TreeGraph& graph, double threshold,
                                         bool largest_component_only = false) {
  if (trace.blocks.empty()) throw std::invalid_argument("extract: empty forward trace");
  return extract(trace.blocks.front().p, tree, graph, threshold, largest_component_only);
}

struct FragmentRecord {
  std::string canonical;
  std::string class_label;
  int frequency = 0;  // one count per (sample, cluster) occurrence
  double mean_activation = 0.0;
  std::vector<std::string> sources;  // sample ids, deduplicated, sorted
  bool connected = false;
  bool st_valid = false;
  bool sst_valid = false;
};

// Aggregates per-sample extractions into per-class fragment inventories.
inline std::vector<FragmentRecord> collect_records(
    const std::vector<std::pair<std::string, std::string>>& sample_id_and_class,
    const std::vector<std::vector<ExtractedSet>>& extractions) {
  if (sample_id_and_class.size() != extractions.size())
    throw std::invalid_argument("collect_records: length mismatch");
  std::map<std::pair<std::string, std::string>, FragmentRecord> agg;  // (class, canon) -> record
  for (std::size_t s = 0; s < extractions.size(); ++s) {
    for (const ExtractedSet& e : extractions[s]) {
      auto key = std::make_pair(sample_id_and_class[s].second, e.canonical);
      FragmentRecord& r = agg[key];
      if (r.frequency == 0) {
        r.canonical = e.canonical;
        r.class_label = sample_id_and_class[s].second;
        r.connected = e.connected;
        r.st_valid = e.st_valid;
        r.sst_valid = e.sst_valid;
      }
      r.mean_activation =
          (r.mean_activation * r.frequency + e.mean_activation) / (r.frequency + 1);
      r.frequency += 1;
      r.sources.push_back(sample_id_and_class[s].first);
    }
  }
  std::vector<FragmentRecord> out;
  out.reserve(agg.size());
  for (auto& [key, r] : agg) {
    std::sort(r.sources.begin(), r.sources.end());
    r.sources.erase(std::unique(r.sources.begin(), r.sources.end()), r.sources.end());
    out.push_back(std::move(r));
  }
  return out;
}

// Fragments kept for a class only if no other class ever produced the same
// canonical form; ranked by frequency, ties by canonical form.
inline std::map<std::string, std::vector<FragmentRecord>> class_unique(
    const std::vector<FragmentRecord>& records) {
  std::set<std::string> classes;
  for (const auto& r : records) classes.insert(r.class_label);
  if (classes.size() < 2)
    throw std::invalid_argument("class_unique: needs records from >= 2 classes");
  std::map<std::string, std::set<std::string>> seen_by_class;
  for (const auto& r : records) seen_by_class[r.class_label].insert(r.canonical);
  std::map<std::string, std::vector<FragmentRecord>> out;
  for (const std::string& c : classes) out[c] = {};
  for (const auto& r : records) {
    bool unique = true;
    for (const auto& [other, canon_set] : seen_by_class) {
      if (other == r.class_label) continue;
      if (canon_set.count(r.canonical)) {
        unique = false;
        break;
      }
    }
    if (unique) out[r.class_label].push_back(r);
  }
  for (auto& [c, list] : out)
    std::sort(list.begin(), list.end(), [](const FragmentRecord& a, const FragmentRecord& b) {
      if (a.frequency != b.frequency) return a.frequency > b.frequency;
      return a.canonical < b.canonical;
    });
  return out;
}

// Does any record in the list embed the given pattern?
inline bool any_matches_pattern(const std::vector<FragmentRecord>& records,
                                const ConstituencyTree& pattern, std::size_t top_n) {
  std::size_t limit = std::min(top_n, records.size());
  for (std::size_t i = 0; i < limit; ++i) {
    const std::string& canon = records[i].canonical;
    if (canon.empty() || canon.find("++") != std::string::npos) continue;
    ConstituencyTree frag =
        parse_bracketed(canon.front() == '(' ? canon : "(" + canon + ")");
    if (contains_pattern(frag, pattern)) return true;
  }
  return false;
}

// Human-readable inventory with validity statistics; deterministic order.
inline std::string render_report(const std::vector<FragmentRecord>& records) {
  std::vector<const FragmentRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const FragmentRecord* a, const FragmentRecord* b) {
    if (a->class_label != b->class_label) return a->class_label < b->class_label;
    if (a->frequency != b->frequency) return a->frequency > b->frequency;
    return a->canonical < b->canonical;
  });
  std::size_t connected = 0;
  for (const auto& r : records)
    if (r.connected) ++connected;
  std::ostringstream out;
  out << "fragments: " << records.size() << "  connected: " << connected << "/" << records.size()
      << "\n";
  for (const FragmentRecord* r : sorted) {
    out << r->class_label << "\tx" << r->frequency << "\t" << (r->connected ? "C" : "-")
        << (r->st_valid ? "S" : "-") << (r->sst_valid ? "P" : "-") << "\t" << r->canonical << "\n";
  }
  return out.str();
}

}  // namespace treepool
