#include "retroid/eval/selection.hpp"

#include <algorithm>

#include "retroid/errors.hpp"

namespace retroid::eval {

void SelectionThresholds::validate() const {
  if (!(min_accuracy > 0.0 && min_accuracy < 1.0) || !(min_f1 > 0.0 && min_f1 < 1.0)) {
    throw ConfigError("selection thresholds must lie in (0, 1)");
  }
}

void rank_table(ScreenTable& table) {
  std::sort(table.begin(), table.end(), [](const ScreenRow& a, const ScreenRow& b) {
    if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
    if (a.macro_f1 != b.macro_f1) return a.macro_f1 > b.macro_f1;
    return a.model < b.model;
  });
}

ScreenTable select_models(const ScreenTable& table, const SelectionThresholds& thresholds) {
  thresholds.validate();
  if (table.empty()) throw ValidationError("select_models: empty table");
  ScreenTable out;
  std::copy_if(table.begin(), table.end(), std::back_inserter(out), [&](const ScreenRow& r) {
    return r.accuracy > thresholds.min_accuracy && r.macro_f1 > thresholds.min_f1;
  });
  return out;
}

ScreenTable screen_models(const std::vector<std::string>& backends, const harness::LabeledSet& set1,
                          const harness::LabeledSet& set2, const harness::Hyperparams& hp,
                          const harness::TrainOptions& opts) {
  if (backends.empty()) throw ValidationError("screen_models: no backends given");
  if (set1.label_set() != set2.label_set()) {
    throw ValidationError("screen_models: screening sets do not cover the same individuals");
  }
  ScreenTable table;
  for (const auto& b : backends) {
    const auto clf = harness::train(set1, b, hp, opts);
    const auto m = harness::evaluate(clf, set2, opts.jobs);
    table.push_back({b, m.accuracy, m.macro_f1});
  }
  rank_table(table);
  return table;
}

nlohmann::json to_json(const ScreenTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t) rows.push_back({{"model", r.model}, {"accuracy", r.accuracy}, {"macro_f1", r.macro_f1}});
  return rows;
}

ScreenTable table_from_json(const nlohmann::json& j) {
  const auto& rows = j.is_object() ? j.at("rows") : j;
  ScreenTable t;
  for (const auto& r : rows) {
    t.push_back({r.at("model").get<std::string>(), r.at("accuracy").get<double>(), r.at("macro_f1").get<double>()});
  }
  return t;
}

}  // namespace retroid::eval
