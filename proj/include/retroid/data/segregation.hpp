#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "retroid/data/manifest.hpp"

namespace retroid::data {

/// Temporal-leakage check between a training and a test manifest.
struct SegregationReport {
  std::vector<std::string> shared_hashes;   // sorted, unique
  std::vector<SessionKey> shared_sessions;  // sorted, unique

  bool pass() const { return shared_hashes.empty() && shared_sessions.empty(); }
  std::string summary() const;
  nlohmann::json to_json() const;
};

/// Both manifests must be non-empty (ValidationError otherwise).
SegregationReport verify_segregation(const Manifest& train, const Manifest& test);

/// Thrown by stages that refuse to run on leaking train/test pairs.
class LeakageError : public std::runtime_error {
 public:
  explicit LeakageError(SegregationReport report);
  const SegregationReport& report() const { return report_; }

 private:
  SegregationReport report_;
};

}  // namespace retroid::data
