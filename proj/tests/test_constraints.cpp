#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "treepool/constraints.hpp"
#include "treepool/corpus.hpp"
#include "treepool/gradcheck.hpp"

using namespace treepool;

namespace {

TreeGraph graph_of(const std::string& src) {
  ConstituencyTree t = parse_bracketed(src);
  return to_graph(t, Vocabulary::build({t}));
}

Tensor binary_column(int n, std::initializer_list<int> nodes) {
  Tensor p(static_cast<std::size_t>(n), 1);
  for (int i : nodes) p.at(static_cast<std::size_t>(i), 0) = 1.0;
  return p;
}

ConstraintSet default_set() {
  ConstraintSet s;
  return s;
}

// Soft assignments clear of the contiguity activity threshold and the
// overlap/intensity hinge points, so finite differences are valid.
Tensor safe_assignment(Rng& rng, std::size_t n, std::size_t k) {
  Tensor p(n, k);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = rng.uniform(0.05, 0.95);
  return p;
}

}  // namespace

TEST_CASE("contiguity on a chain: connected, disconnected, full tree", "[constraints]") {
  TreeGraph g = graph_of("(A (B c))");  // chain 0->1->2
  ConstraintSet set = default_set();

  auto connected = evaluate_constraint(ConstraintKind::Contiguity, binary_column(3, {0, 1}), g, set);
  REQUIRE_FALSE(connected.degenerate);
  REQUIRE(connected.value <= 1e-9);  // 1 edge over (2 - 2/2) = 1

  auto disconnected =
      evaluate_constraint(ConstraintKind::Contiguity, binary_column(3, {0, 2}), g, set);
  REQUIRE(disconnected.value > 0.1);

  auto full = evaluate_constraint(ConstraintKind::Contiguity, binary_column(3, {0, 1, 2}), g, set);
  REQUIRE(full.value <= 1e-9);  // n-1 edges over n nodes
}

TEST_CASE("whole tree is contiguity-zero for any tree", "[constraints][property]") {
  Rng rng(5150);
  for (int i = 0; i < 20; ++i) {
    ConstituencyTree t = random_tree(rng, 10);
    TreeGraph g = to_graph(t, Vocabulary::build({t}));
    Tensor p(static_cast<std::size_t>(g.n), 1, 1.0);
    auto c = evaluate_constraint(ConstraintKind::Contiguity, p, g, default_set());
    if (g.n >= 2) REQUIRE(c.value <= 1e-9);
  }
}

TEST_CASE("all-zero column is degenerate, defined zero", "[constraints]") {
  TreeGraph g = graph_of("(A (B c))");
  Tensor p(3, 1);  // all zeros
  for (ConstraintKind k :
       {ConstraintKind::Contiguity, ConstraintKind::Subtree, ConstraintKind::SubsetTree}) {
    auto c = evaluate_constraint(k, p, g, default_set());
    REQUIRE(c.degenerate);
    REQUIRE(c.value == 0.0);
  }
}

TEST_CASE("subtree constraint: complete subtree, missing leaves, singleton leaf", "[constraints]") {
  TreeGraph g = graph_of("(S (A a) (B b))");  // S=0 A=1 a=2 B=3 b=4
  ConstraintSet set = default_set();

  auto complete = evaluate_constraint(ConstraintKind::Subtree, binary_column(5, {0, 1, 2, 3, 4}), g, set);
  REQUIRE(complete.value <= 1e-9);

  auto no_leaves = evaluate_constraint(ConstraintKind::Subtree, binary_column(5, {0, 1, 3}), g, set);
  REQUIRE(no_leaves.value > 0.1);  // ST needs all leaf nodes in the root span

  auto leaf_only = evaluate_constraint(ConstraintKind::Subtree, binary_column(5, {2}), g, set);
  REQUIRE_FALSE(leaf_only.degenerate);
  REQUIRE(leaf_only.value == Catch::Approx(1.0));  // numerator 0, denominator = backward degree 1

  auto sub = evaluate_constraint(ConstraintKind::Subtree, binary_column(5, {1, 2}), g, set);
  REQUIRE(sub.value <= 1e-9);  // (A a) is a complete internal-rooted subtree
}

TEST_CASE("subset-tree constraint: pre-terminal frontier is allowed", "[constraints]") {
  ConstraintSet set = default_set();
  TreeGraph g = graph_of("(S (A a) (B b))");  // S=0 A=1 a=2 B=3 b=4
  auto at_preterminals =
      evaluate_constraint(ConstraintKind::SubsetTree, binary_column(5, {0, 1, 3}), g, set);
  REQUIRE_FALSE(at_preterminals.degenerate);
  REQUIRE(at_preterminals.value <= 1e-9);

  TreeGraph g2 = graph_of("(S (A (C c)) (B b))");  // S=0 A=1 C=2 c=3 B=4 b=5
  auto missing_nonleaf =
      evaluate_constraint(ConstraintKind::SubsetTree, binary_column(6, {0, 1, 4}), g2, set);
  REQUIRE(missing_nonleaf.value > 0.1);  // C is a missing non-leaf child of A

  auto leaf_only = evaluate_constraint(ConstraintKind::SubsetTree, binary_column(5, {2, 4}), g, set);
  REQUIRE(leaf_only.degenerate);
  REQUIRE(leaf_only.value == 0.0);  // vacuous: no non-leaf structure to violate
}

TEST_CASE("overlap: hand-computed excess, disjoint columns, delta = 1", "[constraints]") {
  // two identical binary columns over 4 nodes, delta 0.3:
  // co-intensity 4, total self-intensity 8, ratio 0.5, excess 0.2 twice
  Tensor p(4, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    p.at(i, 0) = 1.0;
    p.at(i, 1) = 1.0;
  }
  ad::Tape tape;
  auto c = overlap(tape, tape.constant(p), 0.3);
  REQUIRE(c.value == Catch::Approx(std::sqrt(2.0 * 0.04)).epsilon(1e-9));

  Tensor q(4, 2);
  q.at(0, 0) = 1.0;
  q.at(1, 0) = 1.0;
  q.at(2, 1) = 1.0;
  q.at(3, 1) = 1.0;
  ad::Tape tape2;
  REQUIRE(overlap(tape2, tape2.constant(q), 0.0).value == 0.0);  // disjoint columns

  ad::Tape tape3;
  REQUIRE(overlap(tape3, tape3.constant(p), 1.0).value == 0.0);  // ratio never exceeds 1

  ad::Tape tape4;
  Tensor single(4, 1, 0.7);
  REQUIRE(overlap(tape4, tape4.constant(single), 0.3).value == 0.0);  // k = 1
}

TEST_CASE("minimum intensity: hand-computed deficit and edge cases", "[constraints]") {
  // n=4, k=2, alpha=0.5 -> threshold 1.0; self-intensities 1.5 and 0.2
  Tensor p(4, 2);
  p.at(0, 0) = 1.0;
  p.at(1, 0) = 0.5;
  p.at(2, 0) = 0.5;
  p.at(0, 1) = 0.2;
  p.at(1, 1) = 0.4;
  ad::Tape tape;
  auto c = min_intensity(tape, tape.constant(p), 0.5);
  REQUIRE(c.value == Catch::Approx(0.8).epsilon(1e-9));

  ad::Tape tape2;
  REQUIRE(min_intensity(tape2, tape2.constant(p), 0.0).value == 0.0);  // alpha = 0

  Tensor uniform(4, 2, 0.9);  // self-intensity 3.24 per cluster, threshold 2 at alpha 1
  ad::Tape tape3;
  REQUIRE(min_intensity(tape3, tape3.constant(uniform), 1.0).value == 0.0);
}

TEST_CASE("binary validity oracle basics", "[constraints][oracle]") {
  TreeGraph g = graph_of("(S (A a) (B b))");
  std::vector<int> full{0, 1, 2, 3, 4};
  REQUIRE(binary_validity_oracle(g, full, OracleKind::Connected));
  REQUIRE(binary_validity_oracle(g, full, OracleKind::ST));
  REQUIRE(binary_validity_oracle(g, full, OracleKind::SST));

  // single internal node with non-leaf children fails ST and SST
  TreeGraph g2 = graph_of("(S (A (C c)) (B (D d)))");
  REQUIRE(binary_validity_oracle(g2, {0}, OracleKind::Connected));
  REQUIRE_FALSE(binary_validity_oracle(g2, {0}, OracleKind::ST));
  REQUIRE_FALSE(binary_validity_oracle(g2, {0}, OracleKind::SST));
  // with all-leaf children, SST is vacuously fine, ST still not
  REQUIRE(binary_validity_oracle(g, {1}, OracleKind::SST));
  REQUIRE_FALSE(binary_validity_oracle(g, {1}, OracleKind::ST));
}

TEST_CASE("master equivalence: binary zero-sets match the oracles on all subsets",
          "[constraints][oracle]") {
  Rng rng(20260810);
  std::vector<ConstituencyTree> trees;
  for (int i = 0; i < 12; ++i) trees.push_back(random_tree(rng, 8));
  SweepStats stats = constraint_oracle_sweep(trees, default_set());
  for (const auto& ex : stats.examples) UNSCOPED_INFO(ex);
  REQUIRE(stats.mismatches == 0);
  REQUIRE(stats.checked > 1000);
}

TEST_CASE("constraints are invariant under column permutation", "[constraints][property]") {
  Rng rng(9090);
  TreeGraph g = graph_of("(S (NP (DT the) (NN dog)) (VP (VBZ runs)))");
  ConstraintSet set = default_set();
  for (int iter = 0; iter < 10; ++iter) {
    Tensor p = safe_assignment(rng, static_cast<std::size_t>(g.n), 4);
    Tensor perm(static_cast<std::size_t>(g.n), 4);
    std::vector<std::size_t> order{2, 0, 3, 1};
    for (std::size_t i = 0; i < p.rows(); ++i)
      for (std::size_t c = 0; c < 4; ++c) perm.at(i, c) = p.at(i, order[c]);
    for (ConstraintKind k :
         {ConstraintKind::Contiguity, ConstraintKind::Subtree, ConstraintKind::SubsetTree,
          ConstraintKind::Overlap, ConstraintKind::MinIntensity}) {
      double a = evaluate_constraint(k, p, g, set).value;
      double b = evaluate_constraint(k, perm, g, set).value;
      REQUIRE(a == Catch::Approx(b).margin(1e-12));
    }
  }
}

TEST_CASE("binary tree-constraint values stay within [0, 1]", "[constraints][property]") {
  Rng rng(111);
  ConstraintSet set = default_set();
  for (int i = 0; i < 15; ++i) {
    ConstituencyTree t = random_tree(rng, 8);
    TreeGraph g = to_graph(t, Vocabulary::build({t}));
    std::size_t n = static_cast<std::size_t>(g.n);
    for (int trial = 0; trial < 10; ++trial) {
      Tensor p(n, 1);
      for (std::size_t j = 0; j < n; ++j) p.at(j, 0) = rng.uniform() < 0.5 ? 1.0 : 0.0;
      for (ConstraintKind k :
           {ConstraintKind::Contiguity, ConstraintKind::Subtree, ConstraintKind::SubsetTree}) {
        auto c = evaluate_constraint(k, p, g, set);
        if (c.degenerate) continue;
        REQUIRE(c.value >= -1e-12);
        REQUIRE(c.value <= 1.0 + 1e-12);
      }
    }
  }
}

TEST_CASE("all five constraints pass the finite-difference check", "[constraints][gradcheck]") {
  TreeGraph g = graph_of("(S (NP (DT the) (NN dog)) (VP (VBZ runs)))");
  ConstraintSet set = default_set();
  set.delta = 0.1;   // keep the overlap hinge active
  set.alpha = 0.9;   // keep the intensity hinge active
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    Tensor p = safe_assignment(rng, static_cast<std::size_t>(g.n), 3);
    for (ConstraintKind k :
         {ConstraintKind::Contiguity, ConstraintKind::Subtree, ConstraintKind::SubsetTree,
          ConstraintKind::Overlap, ConstraintKind::MinIntensity}) {
      auto rep = check_gradients(
          [&](ad::Tape& tape, const std::vector<ad::Var>& v) {
            return evaluate_constraint(tape, k, v[0], g, set).var;
          },
          {p});
      INFO(constraint_name(k) << " seed " << seed << " worst " << rep.worst);
      REQUIRE(rep.max_rel_err < 1e-4);
    }
  }
}

TEST_CASE("standalone evaluation equals the tape evaluation bit for bit", "[constraints]") {
  TreeGraph g = graph_of("(S (A a) (B b))");
  Rng rng(77);
  Tensor p = safe_assignment(rng, 5, 2);
  ConstraintSet set = default_set();
  for (ConstraintKind k :
       {ConstraintKind::Contiguity, ConstraintKind::Subtree, ConstraintKind::SubsetTree,
        ConstraintKind::Overlap, ConstraintKind::MinIntensity}) {
    ad::Tape tape;
    ConstraintValue cv = evaluate_constraint(tape, k, tape.constant(p), g, set);
    StandaloneConstraint sc = evaluate_constraint(k, p, g, set);
    REQUIRE(cv.value == sc.value);
  }
}
