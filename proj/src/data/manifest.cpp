#include "retroid/data/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "retroid/errors.hpp"

namespace retroid::data {

using nlohmann::json;

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::raw: return "raw";
    case Stage::aligned: return "aligned";
    case Stage::enhanced: return "enhanced";
  }
  return "?";
}

std::string_view to_string(QcStatus q) {
  switch (q) {
    case QcStatus::pending: return "pending";
    case QcStatus::keep: return "keep";
    case QcStatus::discard: return "discard";
  }
  return "?";
}

std::string_view to_string(PadMode p) { return p == PadMode::edge ? "edge" : "zero"; }

Stage parse_stage(std::string_view s) {
  if (s == "raw") return Stage::raw;
  if (s == "aligned") return Stage::aligned;
  if (s == "enhanced") return Stage::enhanced;
  throw ValidationError("unknown stage '" + std::string(s) + "'");
}

QcStatus parse_qc(std::string_view s) {
  if (s == "pending") return QcStatus::pending;
  if (s == "keep") return QcStatus::keep;
  if (s == "discard") return QcStatus::discard;
  throw ValidationError("unknown qc status '" + std::string(s) + "'");
}

PadMode parse_pad_mode(std::string_view s) {
  if (s == "edge") return PadMode::edge;
  if (s == "zero") return PadMode::zero;
  throw ValidationError("unknown pad mode '" + std::string(s) + "'");
}

void check_stage_transition(Stage from, Stage to) {
  if (static_cast<int>(to) != static_cast<int>(from) + 1) {
    throw ValidationError("illegal stage transition " + std::string(to_string(from)) + " -> " +
                          std::string(to_string(to)));
  }
}

std::string to_string(const SessionKey& s) {
  return "day " + std::to_string(s.day) + " set " + std::to_string(s.set);
}

void TransformParams::validate() const {
  if (crop_px <= 0) throw ValidationError("transform: crop_px must be > 0");
  if (out_px <= 0) throw ValidationError("transform: out_px must be > 0");
  if (!(rotation_deg >= -180.0 && rotation_deg < 180.0)) {
    throw ValidationError("transform: rotation_deg must lie in [-180, 180)");
  }
  if (!std::isfinite(center_x) || !std::isfinite(center_y)) {
    throw ValidationError("transform: non-finite center");
  }
}

bool is_safe_id(std::string_view id) {
  if (id.empty() || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-' || c == '.';
  });
}

namespace {

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    int extra = 0;
    unsigned int cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xe0) == 0xc0) {
      extra = 1;
      cp = c & 0x1f;
    } else if ((c & 0xf0) == 0xe0) {
      extra = 2;
      cp = c & 0x0f;
    } else if ((c & 0xf8) == 0xf0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (int k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xc0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    // Overlong forms, surrogates and out-of-range code points.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) ||
        (cp >= 0xd800 && cp <= 0xdfff) || cp > 0x10ffff) {
      return false;
    }
    i += extra + 1;
  }
  return true;
}

bool is_hex_digest(std::string_view s) {
  return s.size() == 64 &&
         std::all_of(s.begin(), s.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

void validate_record(const CropRecord& r) {
  if (!is_safe_id(r.crop_id)) throw ValidationError("record: crop_id '" + r.crop_id + "' is empty or unsafe");
  if (!is_hex_digest(r.sha256)) throw ValidationError("record " + r.crop_id + ": sha256 is not a 64-char hex digest");
  if (r.individual.empty() || !is_valid_utf8(r.individual)) {
    throw ValidationError("record " + r.crop_id + ": invalid individual id");
  }
  if (!is_valid_utf8(r.source)) throw ValidationError("record " + r.crop_id + ": source path is not valid UTF-8");
  if (r.capture_time && !is_valid_utf8(*r.capture_time)) {
    throw ValidationError("record " + r.crop_id + ": capture_time is not valid UTF-8");
  }
  if (r.session.day < 1 || r.session.set < 1) throw ValidationError("record " + r.crop_id + ": day and set must be >= 1");
  if (r.frame_index < 0) throw ValidationError("record " + r.crop_id + ": negative frame_index");
  try {
    r.transform.validate();
  } catch (const ValidationError& e) {
    throw ValidationError("record " + r.crop_id + ": " + e.what());
  }
}

}  // namespace

void Manifest::validate() const {
  std::set<std::string> ids;
  for (const auto& ind : meta.individuals) {
    if (ind.empty() || !is_valid_utf8(ind)) throw ValidationError("manifest: invalid individual id");
    if (!ids.insert(ind).second) throw ValidationError("manifest: duplicate individual '" + ind + "'");
  }
  if (meta.num_days < 0) throw ValidationError("manifest: negative num_days");

  std::set<std::string> crop_ids;
  std::map<SessionKey, std::set<std::string>> hashes_by_session;
  for (const auto& r : records) {
    validate_record(r);
    if (!crop_ids.insert(r.crop_id).second) throw ValidationError("manifest: duplicate crop_id '" + r.crop_id + "'");
    if (!hashes_by_session[r.session].insert(r.sha256).second) {
      throw ValidationError("manifest: duplicate sha256 " + r.sha256 + " within " + to_string(r.session));
    }
    if (!ids.empty() && !ids.contains(r.individual)) {
      throw ValidationError("record " + r.crop_id + ": individual '" + r.individual + "' not in manifest metadata");
    }
    if (meta.num_days > 0 && r.session.day > meta.num_days) {
      throw ValidationError("record " + r.crop_id + ": day exceeds num_days");
    }
  }
}

std::vector<SessionKey> Manifest::sessions() const {
  std::set<SessionKey> s;
  for (const auto& r : records) s.insert(r.session);
  return {s.begin(), s.end()};
}

Manifest Manifest::filter(const std::function<bool(const CropRecord&)>& keep) const {
  Manifest out{meta, {}};
  std::copy_if(records.begin(), records.end(), std::back_inserter(out.records), keep);
  return out;
}

Manifest Manifest::session_subset(const SessionKey& s) const {
  return filter([&](const CropRecord& r) { return r.session == s; });
}

json to_json(const CropRecord& r) {
  json j = {
      {"type", "crop"},
      {"crop_id", r.crop_id},
      {"sha256", r.sha256},
      {"individual", r.individual},
      {"day", r.session.day},
      {"set", r.session.set},
      {"frame_index", r.frame_index},
      {"source", r.source},
      {"stage", to_string(r.stage)},
      {"qc", to_string(r.qc)},
      {"transform",
       {{"rotation_deg", r.transform.rotation_deg},
        {"center_xy", {r.transform.center_x, r.transform.center_y}},
        {"crop_px", r.transform.crop_px},
        {"out_px", r.transform.out_px},
        {"pad_mode", to_string(r.transform.pad_mode)}}},
  };
  if (r.capture_time) j["capture_time"] = *r.capture_time;
  return j;
}

CropRecord record_from_json(const json& j) {
  CropRecord r;
  r.crop_id = j.at("crop_id").get<std::string>();
  r.sha256 = j.at("sha256").get<std::string>();
  r.individual = j.at("individual").get<std::string>();
  r.session = {j.at("day").get<int>(), j.at("set").get<int>()};
  r.frame_index = j.at("frame_index").get<int>();
  r.source = j.at("source").get<std::string>();
  r.stage = parse_stage(j.at("stage").get<std::string>());
  r.qc = parse_qc(j.value("qc", std::string("pending")));
  if (j.contains("capture_time") && !j["capture_time"].is_null()) r.capture_time = j["capture_time"].get<std::string>();
  const auto& t = j.at("transform");
  r.transform.rotation_deg = t.at("rotation_deg").get<double>();
  const auto& c = t.at("center_xy");
  r.transform.center_x = c.at(0).get<double>();
  r.transform.center_y = c.at(1).get<double>();
  r.transform.crop_px = t.at("crop_px").get<int>();
  r.transform.out_px = t.at("out_px").get<int>();
  r.transform.pad_mode = parse_pad_mode(t.at("pad_mode").get<std::string>());
  return r;
}

std::filesystem::path write_manifest(const Manifest& m, const std::filesystem::path& path) {
  m.validate();

  // Serialize fully before touching the file so a bad record leaves nothing behind.
  std::ostringstream buf;
  json meta = {{"type", "meta"},
               {"num_days", m.meta.num_days},
               {"individuals", m.meta.individuals},
               {"generator", m.meta.generator}};
  try {
    buf << meta.dump() << '\n';
    for (const auto& r : m.records) buf << to_json(r).dump() << '\n';
  } catch (const json::exception& e) {
    throw ValidationError(std::string("write_manifest: ") + e.what());
  }

  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_manifest: cannot open " + path.string());
  out << buf.str();
  out.flush();
  if (!out) throw IoError("write_manifest: write failed for " + path.string());
  return path;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_manifest: cannot open " + path.string());

  Manifest m;
  std::string line;
  int line_no = 0;
  bool have_meta = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (!have_meta) {
        if (type != "meta") throw ValidationError("first line must be the metadata record");
        m.meta.num_days = j.at("num_days").get<int>();
        m.meta.individuals = j.at("individuals").get<std::vector<std::string>>();
        m.meta.generator = j.value("generator", json::object());
        have_meta = true;
      } else {
        if (type != "crop") throw ValidationError("unexpected record type '" + type + "'");
        m.records.push_back(record_from_json(j));
      }
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_meta) throw ValidationError(path.string() + ": missing metadata line");
  m.validate();
  return m;
}

Manifest usable(const Manifest& m) {
  return m.filter([](const CropRecord& r) { return r.qc != QcStatus::discard; });
}

void require_usable(const Manifest& m, Stage required) {
  for (const auto& r : m.records) {
    if (r.qc == QcStatus::discard) throw ValidationError("crop " + r.crop_id + " is marked discard by QC");
    if (r.stage != required) {
      throw ValidationError("crop " + r.crop_id + " is at stage " + std::string(to_string(r.stage)) + ", expected " +
                            std::string(to_string(required)));
    }
  }
}

}  // namespace retroid::data
