#include "retroid/qc/decisions.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <unordered_map>

#include "retroid/errors.hpp"

namespace retroid::qc {

using nlohmann::json;

json Decision::to_json() const {
  return {{"crop_id", crop_id}, {"status", data::to_string(status)}, {"reviewer", reviewer}, {"timestamp", timestamp}};
}

Decision Decision::from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("decision must be a JSON object");
  Decision d;
  try {
    d.crop_id = j.at("crop_id").get<std::string>();
    const auto status = j.at("status").get<std::string>();
    if (status == "keep")
      d.status = data::QcStatus::keep;
    else if (status == "discard")
      d.status = data::QcStatus::discard;
    else
      throw ValidationError("decision status must be keep or discard, got '" + status + "'");
    d.reviewer = j.value("reviewer", std::string{});
    d.timestamp = j.at("timestamp").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed decision: ") + e.what());
  }
  if (d.crop_id.empty()) throw ValidationError("decision has empty crop_id");
  parse_utc_timestamp(d.timestamp);
  return d;
}

std::int64_t parse_utc_timestamp(const std::string& s) {
  int y, mo, d, h, mi, sec, n = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &y, &mo, &d, &h, &mi, &sec, &n) != 6 || n != 19) {
    throw ValidationError("bad timestamp '" + s + "'");
  }
  std::size_t i = 19;
  std::int64_t frac_ns = 0;
  if (i < s.size() && s[i] == '.') {
    ++i;
    std::int64_t scale = 100000000;
    const std::size_t start = i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
      frac_ns += (s[i] - '0') * scale;
      scale /= 10;
      ++i;
    }
    if (i == start) throw ValidationError("bad timestamp '" + s + "'");
  }
  const std::string zone = s.substr(i);
  if (zone != "Z" && zone != "+00:00") throw ValidationError("timestamp must be UTC: '" + s + "'");

  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) throw ValidationError("bad timestamp '" + s + "'");
  const auto secs = sys_days{ymd}.time_since_epoch() + hours{h} + minutes{mi} + seconds{sec};
  return duration_cast<nanoseconds>(secs).count() + frac_ns;
}

std::string utc_now() {
  using namespace std::chrono;
  const auto now = time_point_cast<milliseconds>(system_clock::now());
  const auto days = floor<std::chrono::days>(now);
  const year_month_day ymd{days};
  const hh_mm_ss tod{now - days};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()), static_cast<int>(tod.subseconds().count()));
  return buf;
}

DecisionLog read_decisions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open decisions file " + path.string());
  DecisionLog log;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      log.decisions.push_back(Decision::from_json(json::parse(line)));
    } catch (const std::exception& e) {
      log.warnings.push_back(path.string() + ":" + std::to_string(lineno) + ": skipped: " + e.what());
    }
  }
  return log;
}

data::Manifest apply_decisions(const data::Manifest& m, const std::vector<Decision>& decisions,
                               std::vector<std::string>* warnings) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < m.records.size(); ++i) index.emplace(m.records[i].crop_id, i);

  // crop -> (timestamp, position) of the winning decision
  std::map<std::string, std::pair<std::int64_t, std::size_t>> winner;
  for (std::size_t k = 0; k < decisions.size(); ++k) {
    const auto& d = decisions[k];
    if (!index.contains(d.crop_id)) {
      if (warnings) warnings->push_back("decision for unknown crop '" + d.crop_id + "' ignored");
      continue;
    }
    const auto ts = parse_utc_timestamp(d.timestamp);
    auto [it, inserted] = winner.try_emplace(d.crop_id, ts, k);
    if (!inserted && ts >= it->second.first) it->second = {ts, k};
  }

  data::Manifest out = m;
  for (const auto& [crop, w] : winner) out.records[index.at(crop)].qc = decisions[w.second].status;
  return out;
}

data::Manifest apply_decisions(const data::Manifest& m, const std::filesystem::path& decisions_path,
                               std::vector<std::string>* warnings) {
  auto log = read_decisions(decisions_path);
  if (warnings) warnings->insert(warnings->end(), log.warnings.begin(), log.warnings.end());
  return apply_decisions(m, log.decisions, warnings);
}

}  // namespace retroid::qc
