#pragma once

#include <map>
#include <string>
#include <vector>

#include "treepool/dataset.hpp"
#include "treepool/tensor.hpp"

namespace treepool {

// Index-based split of a dataset; indices refer to the input record list.
struct Split {
  std::vector<std::size_t> train, val, test;
  std::vector<std::string> warnings;
};

namespace detail {

// label -> shuffled record indices, deterministic per seed
inline std::map<std::string, std::vector<std::size_t>> by_label_shuffled(
    const std::vector<Record>& records, Rng& rng) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) groups[records[i].label].push_back(i);
  for (auto& [label, idx] : groups) rng.shuffle(idx);
  return groups;
}

}  // namespace detail

// Stratified holdout: per-class proportional allocation into train/val/test.
inline Split holdout_split(const std::vector<Record>& records, double train_frac, double val_frac,
                           std::uint64_t seed) {
  if (train_frac <= 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0)
    throw std::invalid_argument("holdout fractions must satisfy 0 < train, 0 <= val, train+val <= 1");
  Rng rng(seed);
  Split s;
  for (auto& [label, idx] : detail::by_label_shuffled(records, rng)) {
    std::size_t n = idx.size();
    std::size_t n_train = static_cast<std::size_t>(train_frac * static_cast<double>(n) + 0.5);
    std::size_t n_val = static_cast<std::size_t>(val_frac * static_cast<double>(n) + 0.5);
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);
    if (n_train == 0 || (val_frac > 0.0 && n_val == 0))
      s.warnings.push_back("class " + label + " too small for requested fractions");
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n_train)
        s.train.push_back(idx[i]);
      else if (i < n_train + n_val)
        s.val.push_back(idx[i]);
      else
        s.test.push_back(idx[i]);
    }
  }
  return s;
}

// Stratified k-fold; fold f becomes validation, the rest training.
inline std::vector<Split> kfold_split(const std::vector<Record>& records, int k,
                                      std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold: k must be >= 2");
  if (records.size() < static_cast<std::size_t>(k))
    throw std::invalid_argument("kfold: dataset smaller than fold count");
  Rng rng(seed);
  auto groups = detail::by_label_shuffled(records, rng);
  std::vector<Split> folds(static_cast<std::size_t>(k));
  for (auto& [label, idx] : groups) {
    if (idx.size() < static_cast<std::size_t>(k))
      for (auto& f : folds)
        f.warnings.push_back("class " + label + " has fewer samples than folds; best-effort stratification");
    for (std::size_t i = 0; i < idx.size(); ++i) {
      std::size_t fold = i % static_cast<std::size_t>(k);
      for (std::size_t f = 0; f < folds.size(); ++f)
        (f == fold ? folds[f].val : folds[f].train).push_back(idx[i]);
    }
  }
  return folds;
}

// Repeated stratified holdout with derived seeds.
inline std::vector<Split> repeated_split(const std::vector<Record>& records, int repeats,
                                         double train_frac, double val_frac, std::uint64_t seed) {
  if (repeats < 1) throw std::invalid_argument("repeated: repeats must be >= 1");
  std::vector<Split> out;
  for (int r = 0; r < repeats; ++r)
    out.push_back(holdout_split(records, train_frac, val_frac, seed + static_cast<std::uint64_t>(r)));
  return out;
}

}  // namespace treepool
