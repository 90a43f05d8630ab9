#pragma once

#include <set>
#include <string>
#include <vector>

#include "treepool/kernels.hpp"

namespace treepool {

// Dual-form kernel perceptron over trees: a light sanity classifier for
// checking that a kernel separates a corpus, not a tuned model.
class KernelPerceptron {
 public:
  KernelPerceptron(const std::vector<ConstituencyTree>& trees,
                   const std::vector<std::string>& labels, KernelConfig cfg, int epochs)
      : cfg_(cfg) {
    if (trees.size() != labels.size())
      throw std::invalid_argument("kernel perceptron: trees/labels length mismatch");
    std::set<std::string> classes(labels.begin(), labels.end());
    if (classes.size() != 2)
      throw std::invalid_argument("kernel perceptron: needs exactly 2 classes, got " +
                                  std::to_string(classes.size()));
    neg_class_ = *classes.begin();
    pos_class_ = *std::next(classes.begin());
    tie_class_ = labels.front();  // zero scores fall back to the first training label
    trees_ = trees;
    y_.reserve(labels.size());
    for (const auto& l : labels) y_.push_back(l == pos_class_ ? 1.0 : -1.0);
    alpha_.assign(trees.size(), 0.0);

    Tensor g = gram(trees_, cfg_);
    for (int epoch = 0; epoch < epochs; ++epoch) {
      int mistakes = 0;
      for (std::size_t i = 0; i < trees_.size(); ++i) {
        double score = 0.0;
        for (std::size_t j = 0; j < trees_.size(); ++j)
          score += alpha_[j] * y_[j] * g.at(j, i);
        if (y_[i] * score <= 0.0) {
          alpha_[i] += 1.0;
          ++mistakes;
        }
      }
      if (mistakes == 0) break;
    }
  }

  double decision(const ConstituencyTree& t) const {
    double score = 0.0;
    for (std::size_t j = 0; j < trees_.size(); ++j) {
      if (alpha_[j] == 0.0) continue;
      score += alpha_[j] * y_[j] * kernel(trees_[j], t, cfg_);
    }
    return score;
  }

  const std::string& predict(const ConstituencyTree& t) const {
    double s = decision(t);
    if (s > 0.0) return pos_class_;
    if (s < 0.0) return neg_class_;
    return tie_class_;
  }

  std::vector<std::string> predict_all(const std::vector<ConstituencyTree>& ts) const {
    std::vector<std::string> out;
    out.reserve(ts.size());
    for (const auto& t : ts) out.push_back(predict(t));
    return out;
  }

  double train_accuracy() const {
    int ok = 0;
    for (std::size_t i = 0; i < trees_.size(); ++i)
      if ((decision(trees_[i]) > 0.0 ? 1.0 : -1.0) == y_[i]) ++ok;
    return static_cast<double>(ok) / static_cast<double>(trees_.size());
  }

  const std::string& positive_class() const { return pos_class_; }

 private:
  KernelConfig cfg_;
  std::vector<ConstituencyTree> trees_;
  std::vector<double> y_;
  std::vector<double> alpha_;
  std::string pos_class_, neg_class_, tie_class_;
};

}  // namespace treepool
