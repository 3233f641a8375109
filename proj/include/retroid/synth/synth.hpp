#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "retroid/align/detection.hpp"
#include "retroid/data/manifest.hpp"
#include "retroid/image.hpp"
#include "retroid/rng.hpp"

namespace retroid::synth {

/// Appearance dimensions, each normalized to [0, 1] and mapped to render units.
enum AppearanceDim : int {
  kHalfLength = 0,
  kHalfWidth,
  kBodyIntensity,
  kStripeFrequency,
  kStripePhase,
  kStripeContrast,
  kHeadLength,
  kHeadIntensity,
  kSpotX,
  kSpotY,
  kSpotSize,
  kNumDims
};

using Appearance = std::array<double, kNumDims>;

struct DriftConfig {
  int num_individuals = 15;
  int num_days = 5;
  int images_per_session = 200;
  /// Parameter-space distance travelled per day along each individual's drift direction.
  double drift_rate = 0.05;
  /// Per-image std-dev of appearance jitter (normalized units); also scales lighting jitter.
  double intra_session_noise = 0.03;
  std::uint64_t seed = 1;
  int frame_width = 640;
  int frame_height = 480;
  /// Replicate sets recorded on the final day (2 adds a screening set).
  int final_day_sets = 1;
  /// Std-dev of per-pixel sensor noise, in gray levels.
  double sensor_noise = 2.0;
  /// Multiplies every geometric length (subject size, pose margin, background
  /// texture). 0.5 with a 320x240 frame is the same scene at half resolution.
  double subject_scale = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
  static DriftConfig from_json(const nlohmann::json& j);

  std::vector<data::SessionKey> sessions() const;
};

/// Per-individual generative parameters. Day-k appearance is
///   clamp(base + (k - (D+1)/2) * drift_rate * direction)
/// so reversing day order is the same process with the direction negated.
struct IndividualParams {
  std::string id;
  Appearance base{};
  Appearance direction{};  // unit vector

  Appearance at_day(int day, const DriftConfig& cfg) const;
  IndividualParams reversed() const;
};

std::vector<IndividualParams> individual_params(const DriftConfig& cfg);

/// Where and how the subject sits in the scene.
struct Pose {
  double cx = 320.0;
  double cy = 240.0;
  double rotation_deg = 0.0;  // clockwise from "head up"
};

/// Optional rotation of the whole scene about a pivot, applied at render time.
struct SceneRotation {
  double degrees = 0.0;
  align::Point pivot{};
};

struct RenderSettings {
  int width = 640;
  int height = 480;
  double sensor_noise = 2.0;
  double subject_scale = 1.0;
  double lighting_gain = 1.0;
  std::uint64_t background_seed = 0;
  std::uint64_t noise_seed = 0;
  SceneRotation scene{};
};

struct Rendered {
  Image frame;
  align::Detection detection;
};

/// Deterministic render of one subject on a procedural background.
Rendered render_subject(const Appearance& a, const Pose& pose, const RenderSettings& settings);

/// Random pose, lighting and background drawn from `rng`; appearance as given.
Rendered render_individual(const Appearance& a, Rng& rng, const DriftConfig& cfg);

/// Frames and detections for one (individual, session), rendered in memory.
struct SessionRender {
  std::string individual;
  data::SessionKey session;
  std::vector<Rendered> frames;
};

SessionRender render_session(const DriftConfig& cfg, const IndividualParams& ind, int individual_index,
                             const data::SessionKey& session);

std::string individual_id(int index);

struct DatasetOutput {
  std::filesystem::path root;
  std::filesystem::path manifest_path;
  data::Manifest manifest;  // raw-stage ground truth, one record per frame
};

/// Writes <out>/frames/<ind>/d<day>_s<set>/f<index>.png plus a detections.jsonl
/// sidecar per session, <out>/params.json and <out>/manifest.jsonl.
DatasetOutput generate_dataset(const DriftConfig& cfg, const std::filesystem::path& out_dir,
                               const nlohmann::json& provenance = nlohmann::json::object(), int jobs = 1);

nlohmann::json params_to_json(const DriftConfig& cfg, const std::vector<IndividualParams>& inds);

std::filesystem::path session_dir(const std::string& individual, const data::SessionKey& s);

}  // namespace retroid::synth
