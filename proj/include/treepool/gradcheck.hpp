#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "treepool/autodiff.hpp"

namespace treepool {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t n_entries = 0;
  std::string worst;  // "tensor 2 entry 14" style locator

  bool pass(double tol) const { return max_rel_err < tol; }
};

// Compares the tape's reverse-mode gradient against central finite
// differences, coordinate by coordinate. `build` must construct the scalar
// loss from the leaves it is handed; it is re-run from scratch for every
// perturbed evaluation, so it must be a pure function of the leaf values.
//
// Relative error uses the usual unit-floored denominator
// |a - d| / max(|a|, |d|, 1) so near-zero coordinates are judged absolutely.
inline GradCheckReport check_gradients(
    const std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>& build,
    std::vector<Tensor> points, double step = 1e-5) {
  auto eval = [&](const std::vector<Tensor>& pts) {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    leaves.reserve(pts.size());
    for (const Tensor& p : pts) leaves.push_back(tape.param(p));
    ad::Var loss = build(tape, leaves);
    double v = loss.item();
    if (!std::isfinite(v))
      throw std::runtime_error("grad check: non-finite objective at perturbed point");
    return v;
  };

  // analytic pass
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  leaves.reserve(points.size());
  for (const Tensor& p : points) leaves.push_back(tape.param(p));
  ad::Var loss = build(tape, leaves);
  tape.backward(loss);
  std::vector<Tensor> analytic;
  analytic.reserve(leaves.size());
  for (const ad::Var& v : leaves) analytic.push_back(v.grad());

  GradCheckReport rep;
  for (std::size_t t = 0; t < points.size(); ++t) {
    for (std::size_t i = 0; i < points[t].size(); ++i) {
      double orig = points[t][i];
      points[t][i] = orig + step;
      double fp = eval(points);
      points[t][i] = orig - step;
      double fm = eval(points);
      points[t][i] = orig;
      double numeric = (fp - fm) / (2.0 * step);
      double a = analytic[t][i];
      double denom = std::max({std::fabs(a), std::fabs(numeric), 1.0});
      double rel = std::fabs(a - numeric) / denom;
      ++rep.n_entries;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst = "tensor " + std::to_string(t) + " entry " + std::to_string(i) +
                    " (analytic " + std::to_string(a) + ", numeric " + std::to_string(numeric) + ")";
      }
    }
  }
  return rep;
}

}  // namespace treepool
