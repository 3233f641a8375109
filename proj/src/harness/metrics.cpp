#include "retroid/harness/metrics.hpp"

#include "retroid/errors.hpp"

namespace retroid::harness {

Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted, int num_classes) {
  if (truth.empty()) throw ValidationError("evaluate: empty test set");
  if (truth.size() != predicted.size()) throw ValidationError("evaluate: label/prediction length mismatch");
  if (num_classes < 1) throw ValidationError("evaluate: need at least one class");

  Metrics m;
  m.n_samples = static_cast<long>(truth.size());
  m.confusion.assign(num_classes, std::vector<long>(num_classes, 0));
  long correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) throw ValidationError("evaluate: label out of range");
    ++m.confusion[t][p];
    if (t == p) ++correct;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n_samples);

  // Average over classes that occur in the truth or the predictions.
  double f1_sum = 0.0;
  int counted = 0;
  for (int k = 0; k < num_classes; ++k) {
    long tp = m.confusion[k][k], row = 0, col = 0;
    for (int j = 0; j < num_classes; ++j) {
      row += m.confusion[k][j];
      col += m.confusion[j][k];
    }
    if (row == 0 && col == 0) continue;
    ++counted;
    const double precision = col > 0 ? static_cast<double>(tp) / col : 0.0;
    const double recall = row > 0 ? static_cast<double>(tp) / row : 0.0;
    if (precision + recall > 0.0) f1_sum += 2.0 * precision * recall / (precision + recall);
  }
  m.macro_f1 = f1_sum / counted;
  return m;
}

nlohmann::json Metrics::to_json() const {
  return {{"accuracy", accuracy}, {"macro_f1", macro_f1}, {"n_samples", n_samples}, {"confusion", confusion}};
}

Metrics Metrics::from_json(const nlohmann::json& j) {
  Metrics m;
  m.accuracy = j.at("accuracy").get<double>();
  m.macro_f1 = j.at("macro_f1").get<double>();
  m.n_samples = j.value("n_samples", 0L);
  if (j.contains("confusion")) m.confusion = j["confusion"].get<std::vector<std::vector<long>>>();
  return m;
}

}  // namespace retroid::harness
