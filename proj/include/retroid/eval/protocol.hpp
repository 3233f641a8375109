#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "retroid/data/image_store.hpp"
#include "retroid/data/manifest.hpp"
#include "retroid/data/segregation.hpp"
#include "retroid/eval/schedule.hpp"
#include "retroid/eval/stats.hpp"
#include "retroid/harness/classifier.hpp"

namespace retroid::eval {

/// Per-model, per-test-session metrics for one schedule. Columns follow the
/// schedule's test order; `offsets` holds |test day - train day| per column.
struct EvalGrid {
  Schedule schedule;
  std::vector<std::string> models;
  std::vector<int> offsets;
  std::vector<std::vector<harness::Metrics>> cells;  // [model][column]
  nlohmann::json config = nlohmann::json::object();

  std::size_t columns() const { return schedule.test.size(); }
  std::vector<double> accuracies(std::size_t model) const;
  /// Mean and sample std of accuracy across models, per column.
  std::vector<double> mean_accuracy() const;
  std::vector<double> std_accuracy() const;

  nlohmann::json to_json() const;
  static EvalGrid from_json(const nlohmann::json& j);
  void validate() const;
};

/// Builds a grid from bare accuracy / F1 values (fixtures, external results).
EvalGrid grid_from_values(const Schedule& schedule, const std::vector<std::string>& models,
                          const std::vector<std::vector<double>>& accuracy,
                          const std::vector<std::vector<double>>& macro_f1 = {});

struct ProtocolOptions {
  harness::TrainOptions train;
  int jobs = 1;
};

/// Trains every backend on the schedule's training session and evaluates it on
/// each test session. Discarded crops are dropped; every remaining crop must be
/// enhanced. Every (train, test) pair is checked with verify_segregation first;
/// any overlap aborts with LeakageError before training starts.
EvalGrid run_protocol(const data::Manifest& manifest, const data::ImageSource& images, const Schedule& schedule,
                      const std::vector<std::string>& backends, const harness::Hyperparams& hp,
                      const ProtocolOptions& opts = {});

struct DirectionComparison {
  std::vector<double> forward_means, backward_means;
  std::vector<double> forward_std, backward_std;
  TTestResult test;
  double alpha = 0.05;

  bool significant() const { return test.p < alpha; }
  std::string decision() const { return significant() ? "significant difference" : "no significant difference"; }
  nlohmann::json to_json(const nlohmann::json& config = nlohmann::json::object()) const;
};

/// t-test of forward vs backward per-offset mean accuracy. Grids must cover the
/// same models and the same number of columns (ValidationError otherwise).
DirectionComparison compare_directions(const EvalGrid& forward, const EvalGrid& backward, double alpha = 0.05,
                                       TTestVariant variant = TTestVariant::pooled);

/// Writes report.json, table.csv and one SVG chart per model into `dir`.
/// Returns the written paths.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& dir, const DirectionComparison& cmp,
                                                const EvalGrid& forward, const EvalGrid& backward,
                                                const nlohmann::json& config = nlohmann::json::object());

std::string table_csv(const EvalGrid& forward, const EvalGrid& backward);
std::string accuracy_chart_svg(const std::string& model, const std::vector<double>& forward,
                               const std::vector<double>& backward);

}  // namespace retroid::eval
