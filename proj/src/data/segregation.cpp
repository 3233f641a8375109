#include "retroid/data/segregation.hpp"

#include <algorithm>
#include <iterator>
#include <set>

#include "retroid/errors.hpp"

namespace retroid::data {

SegregationReport verify_segregation(const Manifest& train, const Manifest& test) {
  if (train.records.empty() || test.records.empty()) {
    throw ValidationError("verify_segregation: both manifests must be non-empty");
  }
  std::set<std::string> train_hashes, test_hashes;
  std::set<SessionKey> train_sessions, test_sessions;
  for (const auto& r : train.records) {
    train_hashes.insert(r.sha256);
    train_sessions.insert(r.session);
  }
  for (const auto& r : test.records) {
    test_hashes.insert(r.sha256);
    test_sessions.insert(r.session);
  }

  SegregationReport rep;
  std::set_intersection(train_hashes.begin(), train_hashes.end(), test_hashes.begin(), test_hashes.end(),
                        std::back_inserter(rep.shared_hashes));
  std::set_intersection(train_sessions.begin(), train_sessions.end(), test_sessions.begin(), test_sessions.end(),
                        std::back_inserter(rep.shared_sessions));
  return rep;
}

std::string SegregationReport::summary() const {
  if (pass()) return "PASS";
  std::string s = "FAIL: " + std::to_string(shared_hashes.size()) + " shared image hash(es), " +
                  std::to_string(shared_sessions.size()) + " shared session(s)";
  for (const auto& h : shared_hashes) s += "\n  hash " + h;
  for (const auto& k : shared_sessions) s += "\n  session " + to_string(k);
  return s;
}

nlohmann::json SegregationReport::to_json() const {
  nlohmann::json sessions = nlohmann::json::array();
  for (const auto& k : shared_sessions) sessions.push_back({{"day", k.day}, {"set", k.set}});
  return {{"pass", pass()}, {"shared_hashes", shared_hashes}, {"shared_sessions", sessions}};
}

LeakageError::LeakageError(SegregationReport report)
    : std::runtime_error("temporal leakage detected: " + report.summary()), report_(std::move(report)) {}

}  // namespace retroid::data
