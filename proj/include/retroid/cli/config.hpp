#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "retroid/align/align.hpp"
#include "retroid/clahe/clahe.hpp"
#include "retroid/eval/selection.hpp"
#include "retroid/eval/stats.hpp"
#include "retroid/harness/hyperparams.hpp"
#include "retroid/synth/synth.hpp"

namespace retroid::cli {

/// Everything a run can be configured with. The JSON form has one object per
/// stage ("synth", "align", "enhance", "train", "select", "compare") plus
/// top-level "jobs" and "backbone_dir"; missing keys keep their defaults.
struct RunConfig {
  synth::DriftConfig synth;
  align::AlignParams align;
  clahe::ClaheConfig clahe;
  harness::Hyperparams hp;
  eval::SelectionThresholds thresholds;
  double alpha = 0.05;
  eval::TTestVariant ttest = eval::TTestVariant::pooled;
  int jobs = 0;  // 0: all available cores
  std::string backbone_dir;

  void validate() const;
  nlohmann::json to_json() const;
  /// Unknown sections or keys are ConfigErrors.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
};

/// Applies RETROID_SEED (if set) to both the synth and training seeds.
void apply_seed_env(RunConfig& cfg);

/// "8x8" -> (8, 8).
std::pair<int, int> parse_grid(const std::string& s);

/// Tool name, version, command line and the resolved config.
nlohmann::json provenance(const RunConfig& cfg, const std::string& command);

}  // namespace retroid::cli
