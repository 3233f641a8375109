#pragma once

#include <compare>
#include <functional>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace retroid::data {

enum class Stage { raw, aligned, enhanced };
enum class QcStatus { pending, keep, discard };
enum class PadMode { edge, zero };

std::string_view to_string(Stage s);
std::string_view to_string(QcStatus q);
std::string_view to_string(PadMode p);
Stage parse_stage(std::string_view s);
QcStatus parse_qc(std::string_view s);
PadMode parse_pad_mode(std::string_view s);

/// Throws ValidationError unless `to` is the next stage after `from`.
void check_stage_transition(Stage from, Stage to);

/// One recording session: day is 1-based, set is the intra-day replicate.
struct SessionKey {
  int day = 1;
  int set = 1;
  auto operator<=>(const SessionKey&) const = default;
};

std::string to_string(const SessionKey& s);

struct TransformParams {
  double rotation_deg = 0.0;
  double center_x = 0.0;
  double center_y = 0.0;
  int crop_px = 400;
  int out_px = 256;
  PadMode pad_mode = PadMode::edge;

  void validate() const;
  bool operator==(const TransformParams&) const = default;
};

struct CropRecord {
  std::string crop_id;
  std::string sha256;
  std::string individual;
  SessionKey session;
  int frame_index = 0;
  std::string source;
  TransformParams transform;
  Stage stage = Stage::raw;
  QcStatus qc = QcStatus::pending;
  std::optional<std::string> capture_time;

  bool operator==(const CropRecord&) const = default;
};

struct ManifestMeta {
  int num_days = 0;
  std::vector<std::string> individuals;
  /// Free-form provenance: tool version, resolved run config, generator settings.
  nlohmann::json generator = nlohmann::json::object();

  bool operator==(const ManifestMeta&) const = default;
};

struct Manifest {
  ManifestMeta meta;
  std::vector<CropRecord> records;

  /// Checks every record-level and manifest-level invariant; throws ValidationError.
  void validate() const;

  std::vector<SessionKey> sessions() const;
  Manifest filter(const std::function<bool(const CropRecord&)>& keep) const;
  Manifest session_subset(const SessionKey& s) const;

  bool operator==(const Manifest&) const = default;
};

nlohmann::json to_json(const CropRecord& r);
CropRecord record_from_json(const nlohmann::json& j);

/// JSONL: line 1 metadata, one crop record per following line.
std::filesystem::path write_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

/// Records whose QC status is not `discard`.
Manifest usable(const Manifest& m);
/// Throws ValidationError if any record is discarded or not at `required` stage.
void require_usable(const Manifest& m, Stage required);

bool is_safe_id(std::string_view id);

}  // namespace retroid::data
