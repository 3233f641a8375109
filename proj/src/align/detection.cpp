#include "retroid/align/detection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>

#include "retroid/errors.hpp"

namespace retroid::align {

using nlohmann::json;

namespace {

Box clamp_box(const Box& b, int width, int height) {
  const double x0 = std::clamp(b.x, 0.0, static_cast<double>(width));
  const double y0 = std::clamp(b.y, 0.0, static_cast<double>(height));
  const double x1 = std::clamp(b.x + b.w, 0.0, static_cast<double>(width));
  const double y1 = std::clamp(b.y + b.h, 0.0, static_cast<double>(height));
  return {x0, y0, x1 - x0, y1 - y0, b.confidence};
}

Box parse_box(const json& j, const char* name) {
  if (!j.is_array() || j.size() != 5) throw ValidationError(std::string(name) + " must be [x,y,w,h,confidence]");
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>(), j[4].get<double>()};
  if (!(b.w > 0 && b.h > 0)) throw ValidationError(std::string(name) + " has non-positive size");
  if (!(b.confidence >= 0.0 && b.confidence <= 1.0)) throw ValidationError(std::string(name) + " confidence outside [0,1]");
  if (!std::isfinite(b.x) || !std::isfinite(b.y)) throw ValidationError(std::string(name) + " has non-finite origin");
  return b;
}

json box_json(const Box& b) { return json::array({b.x, b.y, b.w, b.h, b.confidence}); }

}  // namespace

Detection clamp_to_frame(const Detection& det, int width, int height) {
  return {det.frame_index, clamp_box(det.body, width, height), clamp_box(det.head, width, height),
          clamp_box(det.abdomen, width, height)};
}

DetectionLoad load_detections(const std::filesystem::path& sidecar_path) {
  std::ifstream in(sidecar_path);
  if (!in) throw IoError("load_detections: cannot open " + sidecar_path.string());

  DetectionLoad out;
  std::optional<int> last_frame;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    int frame = -1;
    try {
      const json j = json::parse(line);
      frame = j.at("frame_index").get<int>();
      for (const char* part : {"body", "head", "abdomen"}) {
        if (!j.contains(part)) throw ValidationError(std::string("missing ") + part);
      }
      Detection d{frame, parse_box(j["body"], "body"), parse_box(j["head"], "head"),
                  parse_box(j["abdomen"], "abdomen")};
      if (last_frame && frame <= *last_frame) {
        throw ValidationError("frame_index " + std::to_string(frame) + " not increasing");
      }
      last_frame = frame;
      out.detections.push_back(d);
    } catch (const std::exception& e) {
      out.skipped.push_back({line_no, frame, e.what()});
    }
  }
  return out;
}

json to_json(const Detection& d) {
  return {{"frame_index", d.frame_index},
          {"body", box_json(d.body)},
          {"head", box_json(d.head)},
          {"abdomen", box_json(d.abdomen)}};
}

void write_detections(const std::vector<Detection>& dets, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& d : dets) out << to_json(d).dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace retroid::align
