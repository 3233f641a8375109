#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "retroid/data/manifest.hpp"

namespace retroid::qc {

struct Decision {
  std::string crop_id;
  data::QcStatus status = data::QcStatus::keep;  // keep or discard only
  std::string reviewer;
  std::string timestamp;  // UTC ISO-8601, e.g. 2024-05-01T12:00:00Z

  nlohmann::json to_json() const;
  /// Throws ValidationError on missing fields, bad status or bad timestamp.
  static Decision from_json(const nlohmann::json& j);
};

/// Nanoseconds since the Unix epoch. Accepts YYYY-MM-DDTHH:MM:SS[.frac] with a
/// trailing Z or +00:00; anything else is a ValidationError.
std::int64_t parse_utc_timestamp(const std::string& s);
std::string utc_now();

struct DecisionLog {
  std::vector<Decision> decisions;  // file order
  std::vector<std::string> warnings;
};

/// Malformed lines are skipped with a warning naming the line number.
/// A missing file is an IoError.
DecisionLog read_decisions(const std::filesystem::path& path);

/// Latest decision per crop wins (timestamp order; ties go to the later entry).
/// Crops without a decision keep their qc; decisions for unknown crops are
/// ignored and reported through `warnings` when given.
data::Manifest apply_decisions(const data::Manifest& m, const std::vector<Decision>& decisions,
                               std::vector<std::string>* warnings = nullptr);
data::Manifest apply_decisions(const data::Manifest& m, const std::filesystem::path& decisions_path,
                               std::vector<std::string>* warnings = nullptr);

}  // namespace retroid::qc
