#pragma once

#include <span>
#include <vector>

#include <json.hpp>

namespace retroid::harness {

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  /// confusion[true][predicted]
  std::vector<std::vector<long>> confusion;
  long n_samples = 0;

  nlohmann::json to_json() const;
  static Metrics from_json(const nlohmann::json& j);
  bool operator==(const Metrics&) const = default;
};

/// Accuracy, macro-F1 and the confusion matrix over `num_classes` labels.
/// Macro-F1 averages over classes present in the truth or the predictions;
/// a class with P + R = 0 contributes F1 = 0.
/// Throws ValidationError on empty input.
Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted, int num_classes);

}  // namespace retroid::harness
