#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "oracles.hpp"
#include "treepool/corpus.hpp"
#include "treepool/enumeration.hpp"
#include "treepool/kernels.hpp"

using namespace treepool;

namespace {
KernelConfig unit_cfg(KernelKind k) {
  KernelConfig c;
  c.kind = k;
  c.decay_lambda = 1.0;
  c.decay_mu = 1.0;
  c.normalized = false;
  return c;
}
}  // namespace

TEST_CASE("ST fragments of a 3-edge chain: one complete subtree per internal node", "[kernels]") {
  ConstituencyTree t = parse_bracketed("(A (B (C c)))");
  auto frags = enumerate_fragments(t, KernelKind::STK);
  REQUIRE(frags.size() == 3);
  std::set<std::string> canon;
  for (const auto& f : frags) canon.insert(f.canonical);
  REQUIRE(canon == std::set<std::string>{"(A (B (C c)))", "(B (C c))", "(C c)"});
}

TEST_CASE("SST fragments of (S (A a) (B b)) are the production-complete set", "[kernels]") {
  ConstituencyTree t = parse_bracketed("(S (A a) (B b))");
  auto frags = enumerate_fragments(t, KernelKind::SSTK);
  std::set<std::string> canon;
  for (const auto& f : frags) canon.insert(f.canonical);
  REQUIRE(canon == std::set<std::string>{"(S A B)", "(S (A a) B)", "(S A (B b))",
                                         "(S (A a) (B b))", "(A a)", "(B b)"});
}

TEST_CASE("PTK fragments of a single node is that node only", "[kernels]") {
  ConstituencyTree t = parse_bracketed("(NN)");
  auto frags = enumerate_fragments(t, KernelKind::PTK);
  REQUIRE(frags.size() == 1);
  REQUIRE(frags[0].canonical == "NN");
}

TEST_CASE("PTK enumeration is refused above the node cap", "[kernels]") {
  Rng rng(4);
  ConstituencyTree big = parse_bracketed(
      "(A (B x y) (B x y) (B x y) (B x y) (B x y) (B x y))");  // 19 nodes
  REQUIRE(big.n_nodes() > 12);
  REQUIRE_THROWS_AS(enumerate_fragments(big, KernelKind::PTK), SizeError);
}

TEST_CASE("fragment multiplicity: identical children count separately", "[kernels]") {
  ConstituencyTree t = parse_bracketed("(A x x)");
  auto frags = enumerate_fragments(t, KernelKind::PTK);
  // A, (A x), (A x x), x
  REQUIRE(frags.size() == 4);
  for (const auto& f : frags) {
    if (f.canonical == "(A x)") REQUIRE(f.anchors.size() == 2);
    if (f.canonical == "x") REQUIRE(f.anchors.size() == 2);
  }
  REQUIRE(kernel(t, t, unit_cfg(KernelKind::PTK)) == 10.0);
  REQUIRE(fragment_pair_count(t, t, KernelKind::PTK) == 10.0);
}

TEST_CASE("trees with disjoint label sets have zero kernel", "[kernels]") {
  ConstituencyTree a = parse_bracketed("(A (B x))");
  ConstituencyTree b = parse_bracketed("(C (D y))");
  for (KernelKind k : {KernelKind::STK, KernelKind::SSTK, KernelKind::PTK}) {
    KernelConfig cfg;
    cfg.kind = k;
    REQUIRE(kernel(a, b, cfg) == 0.0);
    cfg.normalized = false;
    REQUIRE(kernel(a, b, cfg) == 0.0);
    REQUIRE(kernel(a, a, cfg) > 0.0);  // self-similarity positive for nonempty trees
  }
}

TEST_CASE("recursive kernels equal brute-force pair counts at unit decay",
          "[kernels][oracle]") {
  Rng rng(20260810);
  int trees_checked = 0;
  for (int i = 0; i < 40; ++i) {
    ConstituencyTree tx = random_tree(rng, 12);
    ConstituencyTree tz = random_tree(rng, 12);
    for (KernelKind k : {KernelKind::STK, KernelKind::SSTK, KernelKind::PTK}) {
      double recursive = kernel(tx, tz, unit_cfg(k));
      double brute = fragment_pair_count(tx, tz, k);
      INFO(kernel_name(k) << " on " << render_bracketed(tx) << " vs " << render_bracketed(tz));
      REQUIRE(recursive == brute);  // exact integer match
      REQUIRE(kernel(tx, tx, unit_cfg(k)) == fragment_pair_count(tx, tx, k));
    }
    ++trees_checked;
  }
  REQUIRE(trees_checked == 40);
}

TEST_CASE("kernel symmetry and non-negativity on random pairs", "[kernels][property]") {
  Rng rng(777);
  for (int i = 0; i < 25; ++i) {
    ConstituencyTree tx = random_tree(rng, 10);
    ConstituencyTree tz = random_tree(rng, 10);
    for (KernelKind k : {KernelKind::STK, KernelKind::SSTK, KernelKind::PTK}) {
      KernelConfig cfg;
      cfg.kind = k;
      double kxz = kernel(tx, tz, cfg);
      REQUIRE(kxz >= 0.0);
      REQUIRE(kxz == kernel(tz, tx, cfg));
      cfg.normalized = false;
      REQUIRE(kernel(tx, tz, cfg) == kernel(tz, tx, cfg));
    }
  }
}

TEST_CASE("normalized self-kernel is one", "[kernels]") {
  Rng rng(31);
  for (int i = 0; i < 10; ++i) {
    ConstituencyTree t = random_tree(rng, 10);
    for (KernelKind k : {KernelKind::STK, KernelKind::SSTK, KernelKind::PTK}) {
      KernelConfig cfg;
      cfg.kind = k;
      if (t.n_nodes() == 1 && k != KernelKind::PTK) continue;  // no fragments at all
      REQUIRE(kernel(t, t, cfg) == Catch::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("grafting the same subtree onto both roots never decreases the kernel",
          "[kernels][property]") {
  Rng rng(555);
  for (int i = 0; i < 15; ++i) {
    ConstituencyTree tx = random_tree(rng, 8);
    ConstituencyTree tz = random_tree(rng, 8);
    ConstituencyTree extra = random_tree(rng, 4);
    auto graft = [&](const ConstituencyTree& t) {
      std::string s = render_bracketed(t);
      s.pop_back();  // drop closing paren of the root
      return parse_bracketed(s + " " + render_bracketed(extra) + ")");
    };
    ConstituencyTree gx = graft(tx), gz = graft(tz);
    for (KernelKind k : {KernelKind::STK, KernelKind::SSTK, KernelKind::PTK}) {
      KernelConfig cfg = unit_cfg(k);
      REQUIRE(kernel(gx, gz, cfg) >= kernel(tx, tz, cfg));
      if (k == KernelKind::STK) continue;  // decayed STK can shrink: lambda^n becomes lambda^(n+m)
      cfg.decay_lambda = 0.4;
      cfg.decay_mu = 0.4;
      REQUIRE(kernel(gx, gz, cfg) >= kernel(tx, tz, cfg) - 1e-12);
    }
  }
}

TEST_CASE("fragment-set inclusion STK within SSTK within PTK", "[kernels][property]") {
  Rng rng(606);
  for (int i = 0; i < 15; ++i) {
    ConstituencyTree t = random_tree(rng, 9);
    auto canon_set = [&](KernelKind k) {
      std::set<std::string> s;
      for (const auto& f : enumerate_fragments(t, k)) s.insert(f.canonical);
      return s;
    };
    auto st = canon_set(KernelKind::STK);
    auto sst = canon_set(KernelKind::SSTK);
    auto pt = canon_set(KernelKind::PTK);
    for (const auto& f : st) REQUIRE(sst.count(f) == 1);
    for (const auto& f : sst) REQUIRE(pt.count(f) == 1);
  }
}

TEST_CASE("gram: symmetric, unit diagonal, entries equal pairwise kernels, PSD",
          "[kernels][oracle]") {
  Rng rng(808);
  std::vector<ConstituencyTree> trees;
  for (int i = 0; i < 10; ++i) trees.push_back(random_tree(rng, 9));
  KernelConfig cfg;
  cfg.kind = KernelKind::SSTK;
  Tensor g = gram(trees, cfg);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j) {
      REQUIRE(g.at(i, j) == g.at(j, i));
      REQUIRE(g.at(i, j) == Catch::Approx(kernel(trees[i], trees[j], cfg)).margin(1e-12));
    }
  auto ev = testutil::symmetric_eigenvalues(g);
  for (double e : ev) REQUIRE(e >= -1e-8);

  // identical trees: all-ones normalized Gram
  std::vector<ConstituencyTree> same(4, parse_bracketed("(S (A a) (B b))"));
  Tensor g1 = gram(same, cfg);
  for (std::size_t i = 0; i < g1.size(); ++i) REQUIRE(g1[i] == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gram is deterministic across thread counts", "[kernels]") {
  Rng rng(19);
  std::vector<ConstituencyTree> trees;
  for (int i = 0; i < 12; ++i) trees.push_back(random_tree(rng, 8));
  KernelConfig cfg;
  cfg.kind = KernelKind::PTK;
  REQUIRE(gram(trees, cfg, 1) == gram(trees, cfg, 4));
}
