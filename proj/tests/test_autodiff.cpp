#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "treepool/autodiff.hpp"
#include "treepool/gradcheck.hpp"

using namespace treepool;

TEST_CASE("identity matmul returns the input", "[autodiff]") {
  Rng rng(7);
  Tensor x = testutil::random_tensor(rng, 4, 3);
  ad::Tape tape;
  ad::Var xv = tape.param(x);
  ad::Var iv = tape.constant(Tensor::identity(4));
  ad::Var y = ad::matmul(iv, xv);
  REQUIRE(testutil::max_abs_diff(y.val(), x) == 0.0);
}

TEST_CASE("matmul matches the naive triple loop and (AB)^T = B^T A^T", "[autodiff]") {
  Rng rng(11);
  Tensor a = testutil::random_tensor(rng, 3, 4);
  Tensor b = testutil::random_tensor(rng, 4, 2);
  ad::Tape tape;
  ad::Var av = tape.param(a), bv = tape.param(b);
  ad::Var ab = ad::matmul(av, bv);
  REQUIRE(testutil::max_abs_diff(ab.val(), testutil::naive_matmul(a, b)) < 1e-14);

  ad::Var lhs = ad::transpose(ab);
  ad::Var rhs = ad::matmul(ad::transpose(bv), ad::transpose(av));
  REQUIRE(testutil::max_abs_diff(lhs.val(), rhs.val()) < 1e-14);
}

TEST_CASE("matmul rejects incompatible shapes naming both", "[autodiff]") {
  ad::Tape tape;
  ad::Var a = tape.param(Tensor(3, 4));
  ad::Var b = tape.param(Tensor(5, 2));
  REQUIRE_THROWS_MATCHES(ad::matmul(a, b), DimensionError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("3x4") &&
                             Catch::Matchers::ContainsSubstring("5x2")));
}

TEST_CASE("gradient of tr(X^T X) is 2X", "[autodiff]") {
  Rng rng(3);
  Tensor x = testutil::random_tensor(rng, 3, 3);
  ad::Tape tape;
  ad::Var xv = tape.param(x);
  ad::Var f = ad::trace(ad::matmul(ad::transpose(xv), xv));
  tape.backward(f);
  for (std::size_t i = 0; i < x.size(); ++i)
    REQUIRE(xv.grad()[i] == Catch::Approx(2.0 * x[i]).margin(1e-12));
}

TEST_CASE("softmax rows: symmetry, stabilization, row sums", "[autodiff]") {
  ad::Tape tape;
  ad::Var x = tape.param(Tensor::from_rows({{0.0, 0.0, 0.0}, {1000.0, 0.0, -5.0}}));
  ad::Var p = ad::softmax_rows(x);
  for (std::size_t j = 0; j < 3; ++j) REQUIRE(p.val().at(0, j) == Catch::Approx(1.0 / 3.0));
  REQUIRE(p.val().at(1, 0) == Catch::Approx(1.0));
  REQUIRE(p.val().at(1, 1) < 1e-300);
  for (std::size_t i = 0; i < 2; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 3; ++j) s += p.val().at(i, j);
    REQUIRE(s == Catch::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sigmoid(0)=0.5 and relu kills negatives", "[autodiff]") {
  ad::Tape tape;
  ad::Var x = tape.param(Tensor::from_rows({{0.0, -3.5, 2.0}}));
  REQUIRE(ad::sigmoid(x).val()[0] == Catch::Approx(0.5));
  ad::Var r = ad::relu(x);
  REQUIRE(r.val()[1] == 0.0);
  REQUIRE(r.val()[2] == 2.0);
}

TEST_CASE("trace requires square input; equals sum of squares via P~^T P~", "[autodiff]") {
  ad::Tape tape;
  ad::Var bad = tape.param(Tensor(2, 3));
  REQUIRE_THROWS_AS(ad::trace(bad), DimensionError);

  Rng rng(5);
  Tensor p = testutil::random_tensor(rng, 4, 2);
  ad::Var pv = tape.param(p);
  double tr = ad::trace(ad::matmul(ad::transpose(pv), pv)).item();
  double naive = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) naive += p[i] * p[i];
  REQUIRE(tr == Catch::Approx(naive).epsilon(1e-12));
}

TEST_CASE("cross entropy: analytic values and bounds", "[autodiff]") {
  ad::Tape tape;
  ad::Var logits = tape.param(Tensor::from_rows({{0.0, 0.0}}));
  REQUIRE(ad::cross_entropy(logits, 0).item() == Catch::Approx(std::log(2.0)));

  ad::Var dominant = tape.param(Tensor::from_rows({{50.0, 0.0, 0.0}}));
  REQUIRE(ad::cross_entropy(dominant, 0).item() < 1e-20);

  REQUIRE_THROWS_AS(ad::cross_entropy(logits, 2), std::out_of_range);
  REQUIRE_THROWS_AS(ad::cross_entropy(logits, -1), std::out_of_range);
}

TEST_CASE("every differentiable op passes central finite differences", "[autodiff][gradcheck]") {
  // random inputs in [-2, 2]; rel. err < 1e-4 at h = 1e-5
  const double tol = 1e-4;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    Tensor a = testutil::random_tensor(rng, 3, 4);
    Tensor b = testutil::random_tensor(rng, 4, 2);
    Tensor c = testutil::random_tensor(rng, 3, 4);
    Tensor s = testutil::random_tensor(rng, 1, 1, 0.5, 2.0);
    Tensor sq = testutil::random_tensor(rng, 3, 3);
    Tensor col = testutil::random_tensor(rng, 3, 1);
    Tensor pos = testutil::random_tensor(rng, 3, 4, 0.5, 2.0);

    auto check = [&](const char* name, auto builder, std::vector<Tensor> pts) {
      auto rep = check_gradients(builder, std::move(pts));
      INFO(name << " seed " << seed << " worst " << rep.worst);
      REQUIRE(rep.max_rel_err < tol);
    };

    check("matmul", [](ad::Tape&, const std::vector<ad::Var>& v) {
      return ad::sum(ad::matmul(v[0], v[1]));
    }, {a, b});
    check("transpose", [](ad::Tape&, const std::vector<ad::Var>& v) {
      return ad::sum(ad::mul(ad::transpose(v[0]), ad::transpose(v[0])));
    }, {a});
    check("add+sub", [](ad::Tape&, const std::vector<ad::Var>& v) {
      return ad::sum(ad::sub(ad::add(v[0], v[1]), ad::mul(v[1], v[1])));
    }, {a, c});
    check("scalar broadcast", [](ad::Tape&, const std::vector<ad::Var>& v) {
      return ad::sum(ad::div(ad::mul(v[0], v[1]), ad::add_const(v[1], 1.0)));
    }, {a, s});
    check("hadamard/div", [](ad::Tape&, const std::vector<ad::Var>& v) {
      return ad::sum(ad::div(v[0], v[1]));
    }, {a, pos});
    check("trace/diag", [](ad::Tape&, const std::vector<ad::Var>& v) {
      return ad::add(ad::trace(v[0]), ad::sum(ad::diag_part(v[0])));
    }, {sq});
    check("rowsum/scale_rows", [](ad::Tape&, const std::vector<ad::Var>& v) {
      return ad::sum(ad::scale_rows(v[0], ad::rowsum(ad::mul(v[0], v[0]))));
    }, {sq});
    check("sigmoid", [](ad::Tape&, const std::vector<ad::Var>& v) {
      return ad::sum(ad::sigmoid(v[0]));
    }, {a});
    check("softmax", [](ad::Tape&, const std::vector<ad::Var>& v) {
      return ad::sum(ad::mul(ad::softmax_rows(v[0]), v[1]));
    }, {a, c});
    check("sqrt", [](ad::Tape&, const std::vector<ad::Var>& v) {
      return ad::sum(ad::sqrt_guarded(v[0]));
    }, {pos});
    check("gather", [](ad::Tape&, const std::vector<ad::Var>& v) {
      return ad::sum(ad::gather_rows(v[0], {2, 0, 2, 1}));
    }, {a});
    check("cross_entropy", [](ad::Tape&, const std::vector<ad::Var>& v) {
      return ad::cross_entropy(v[0], 1);
    }, {testutil::random_tensor(rng, 1, 4)});
    // relu checked away from the kink
    Tensor shifted = a;
    for (std::size_t i = 0; i < shifted.size(); ++i)
      if (std::fabs(shifted[i]) < 1e-3) shifted[i] = 0.5;
    check("relu", [](ad::Tape&, const std::vector<ad::Var>& v) {
      return ad::sum(ad::relu(v[0]));
    }, {shifted});
  }
}

TEST_CASE("backward is deterministic given identical inputs", "[autodiff]") {
  auto run = [] {
    Rng rng(99);
    Tensor a = testutil::random_tensor(rng, 5, 5);
    ad::Tape tape;
    ad::Var av = tape.param(a);
    ad::Var loss = ad::sum(ad::mul(ad::softmax_rows(ad::matmul(av, av)), av));
    tape.backward(loss);
    return av.grad();
  };
  Tensor g1 = run(), g2 = run();
  REQUIRE(g1 == g2);
}

TEST_CASE("grad check reports non-finite objectives", "[gradcheck]") {
  auto builder = [](ad::Tape& tape, const std::vector<ad::Var>& v) {
    return ad::sum(ad::div(tape.constant(1.0), v[0]));
  };
  // the minus-h stencil point lands exactly on the 1/x pole
  std::vector<Tensor> pts{Tensor::scalar(1e-5)};
  REQUIRE_THROWS_WITH(check_gradients(builder, pts, 1e-5),
                      Catch::Matchers::ContainsSubstring("non-finite"));
}
