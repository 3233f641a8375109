#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "retroid/harness/classifier.hpp"

namespace retroid::eval {

struct ScreenRow {
  std::string model;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

using ScreenTable = std::vector<ScreenRow>;

struct SelectionThresholds {
  double min_accuracy = 0.40;
  double min_f1 = 0.35;
  void validate() const;
};

/// Accuracy descending; ties broken by higher macro-F1, then by name.
void rank_table(ScreenTable& table);

/// Rows with accuracy > min_accuracy AND macro_f1 > min_f1 (strict), in table order.
ScreenTable select_models(const ScreenTable& table, const SelectionThresholds& thresholds = {});

/// Trains each backend on the first screening set and scores it on the second.
/// Both sets must contain the same individuals. Result is ranked.
ScreenTable screen_models(const std::vector<std::string>& backends, const harness::LabeledSet& set1,
                          const harness::LabeledSet& set2, const harness::Hyperparams& hp,
                          const harness::TrainOptions& opts = {});

nlohmann::json to_json(const ScreenTable& t);
ScreenTable table_from_json(const nlohmann::json& j);

}  // namespace retroid::eval
