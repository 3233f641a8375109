#pragma once

// Accuracy and macro-F1 counted straight from (truth, prediction) pairs,
// one class at a time, without a confusion matrix.

#include <set>
#include <vector>

namespace oracle {

struct Scores {
  double accuracy;
  double macro_f1;
};

inline Scores brute_force_metrics(const std::vector<int>& truth, const std::vector<int>& pred) {
  std::set<int> classes(truth.begin(), truth.end());
  classes.insert(pred.begin(), pred.end());
  long correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == pred[i];
  double f1_sum = 0;
  for (int c : classes) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (pred[i] == c && truth[i] == c) ++tp;
      if (pred[i] == c && truth[i] != c) ++fp;
      if (pred[i] != c && truth[i] == c) ++fn;
    }
    // F1 = 2TP / (2TP + FP + FN), zero when there are no true positives.
    f1_sum += tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
  }
  return {static_cast<double>(correct) / truth.size(), f1_sum / classes.size()};
}

}  // namespace oracle
