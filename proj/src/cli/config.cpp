#include "retroid/cli/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>

#include "retroid/errors.hpp"
#include "retroid/version.hpp"

namespace retroid::cli {

using nlohmann::json;

namespace {

void check_keys(const json& section, const std::string& name, const std::set<std::string>& allowed) {
  if (!section.is_object()) throw ConfigError("config section '" + name + "' must be an object");
  for (const auto& [k, _] : section.items()) {
    if (!allowed.contains(k)) throw ConfigError("unknown key '" + k + "' in config section '" + name + "'");
  }
}

}  // namespace

void RunConfig::validate() const {
  synth.validate();
  if (align.crop_px < 1 || align.out_px < 1) throw ConfigError("align: crop_px and out_px must be positive");
  clahe.validate();
  hp.validate();
  thresholds.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("compare: alpha must lie in (0, 1)");
  if (jobs < 0) throw ConfigError("jobs must be >= 0");
}

json RunConfig::to_json() const {
  return {{"synth", synth.to_json()},
          {"align",
           {{"crop_px", align.crop_px}, {"out_px", align.out_px}, {"pad_mode", data::to_string(align.pad_mode)}}},
          {"enhance", {{"clip_limit", clahe.clip_limit}, {"grid", {clahe.tiles_x, clahe.tiles_y}}}},
          {"train", hp.to_json()},
          {"select", {{"min_accuracy", thresholds.min_accuracy}, {"min_f1", thresholds.min_f1}}},
          {"compare", {{"alpha", alpha}, {"test", eval::to_string(ttest)}}},
          {"jobs", jobs},
          {"backbone_dir", backbone_dir}};
}

RunConfig RunConfig::from_json(const json& j) {
  check_keys(j, "<root>", {"synth", "align", "enhance", "train", "select", "compare", "jobs", "backbone_dir"});
  RunConfig c;
  try {
    if (j.contains("synth")) {
      check_keys(j["synth"], "synth",
                 {"num_individuals", "num_days", "images_per_session", "drift_rate", "intra_session_noise", "seed",
                  "frame_size", "final_day_sets", "sensor_noise", "subject_scale"});
      c.synth = synth::DriftConfig::from_json(j["synth"]);
    }
    if (j.contains("align")) {
      const auto& a = j["align"];
      check_keys(a, "align", {"crop_px", "out_px", "pad_mode"});
      c.align.crop_px = a.value("crop_px", c.align.crop_px);
      c.align.out_px = a.value("out_px", c.align.out_px);
      if (a.contains("pad_mode")) c.align.pad_mode = data::parse_pad_mode(a["pad_mode"].get<std::string>());
    }
    if (j.contains("enhance")) {
      const auto& e = j["enhance"];
      check_keys(e, "enhance", {"clip_limit", "grid"});
      c.clahe.clip_limit = e.value("clip_limit", c.clahe.clip_limit);
      if (e.contains("grid")) {
        c.clahe.tiles_x = e["grid"].at(0).get<int>();
        c.clahe.tiles_y = e["grid"].at(1).get<int>();
      }
    }
    if (j.contains("train")) {
      check_keys(j["train"], "train",
                 {"optimizer", "learning_rate", "weight_decay", "epochs", "loss", "batch_size", "seed"});
      c.hp = harness::Hyperparams::from_json(j["train"]);
    }
    if (j.contains("select")) {
      const auto& s = j["select"];
      check_keys(s, "select", {"min_accuracy", "min_f1"});
      c.thresholds.min_accuracy = s.value("min_accuracy", c.thresholds.min_accuracy);
      c.thresholds.min_f1 = s.value("min_f1", c.thresholds.min_f1);
    }
    if (j.contains("compare")) {
      const auto& s = j["compare"];
      check_keys(s, "compare", {"alpha", "test"});
      c.alpha = s.value("alpha", c.alpha);
      if (s.contains("test")) c.ttest = eval::parse_ttest_variant(s["test"].get<std::string>());
    }
    c.jobs = j.value("jobs", c.jobs);
    c.backbone_dir = j.value("backbone_dir", c.backbone_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

void apply_seed_env(RunConfig& cfg) {
  const char* env = std::getenv("RETROID_SEED");
  if (!env || !*env) return;
  std::uint64_t seed = 0;
  const std::string s(env);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ConfigError("RETROID_SEED must be an unsigned integer");
  cfg.synth.seed = seed;
  cfg.hp.seed = seed;
}

std::pair<int, int> parse_grid(const std::string& s) {
  const auto x = s.find('x');
  int a = 0, b = 0;
  if (x == std::string::npos) throw ConfigError("grid must look like 8x8, got '" + s + "'");
  auto r1 = std::from_chars(s.data(), s.data() + x, a);
  auto r2 = std::from_chars(s.data() + x + 1, s.data() + s.size(), b);
  if (r1.ec != std::errc{} || r1.ptr != s.data() + x || r2.ec != std::errc{} || r2.ptr != s.data() + s.size() ||
      a < 1 || b < 1) {
    throw ConfigError("grid must look like 8x8, got '" + s + "'");
  }
  return {a, b};
}

json provenance(const RunConfig& cfg, const std::string& command) {
  return {{"tool", kToolName}, {"version", kVersion}, {"command", command}, {"config", cfg.to_json()}};
}

}  // namespace retroid::cli
