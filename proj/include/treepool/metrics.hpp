#pragma once

#include <string>
#include <vector>

#include "treepool/tensor.hpp"

namespace treepool {

struct F1Report {
  std::vector<double> precision, recall, f1;  // per class
  double macro_f1 = 0.0;
  std::vector<std::string> warnings;
};

// Standard per-class precision/recall/F1 with unweighted macro average.
// A class absent from both predictions and golds gets F1 = 0 with a warning.
inline F1Report f1_scores(const std::vector<int>& predictions, const std::vector<int>& golds,
                          int n_classes) {
  if (predictions.size() != golds.size())
    throw std::invalid_argument("f1_scores: " + std::to_string(predictions.size()) +
                                " predictions vs " + std::to_string(golds.size()) + " golds");
  std::vector<double> tp(static_cast<std::size_t>(n_classes), 0.0);
  std::vector<double> fp(static_cast<std::size_t>(n_classes), 0.0);
  std::vector<double> fn(static_cast<std::size_t>(n_classes), 0.0);
  for (std::size_t i = 0; i < golds.size(); ++i) {
    int p = predictions[i], g = golds[i];
    if (p < 0 || p >= n_classes || g < 0 || g >= n_classes)
      throw std::out_of_range("f1_scores: class index out of range");
    if (p == g)
      tp[static_cast<std::size_t>(p)] += 1.0;
    else {
      fp[static_cast<std::size_t>(p)] += 1.0;
      fn[static_cast<std::size_t>(g)] += 1.0;
    }
  }
  F1Report r;
  for (int c = 0; c < n_classes; ++c) {
    std::size_t uc = static_cast<std::size_t>(c);
    double denom_p = tp[uc] + fp[uc];
    double denom_r = tp[uc] + fn[uc];
    double prec = denom_p > 0.0 ? tp[uc] / denom_p : 0.0;
    double rec = denom_r > 0.0 ? tp[uc] / denom_r : 0.0;
    double f = (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    if (denom_p == 0.0 && denom_r == 0.0)
      r.warnings.push_back("class " + std::to_string(c) + " absent from predictions and golds");
    r.precision.push_back(prec);
    r.recall.push_back(rec);
    r.f1.push_back(f);
    r.macro_f1 += f;
  }
  r.macro_f1 /= static_cast<double>(n_classes);
  return r;
}

}  // namespace treepool
