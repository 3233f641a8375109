#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace retroid::align {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned box in source-frame pixels; (x, y) is the top-left corner.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
  double confidence = 1.0;

  Point center() const { return {x + w / 2.0, y + h / 2.0}; }
  bool operator==(const Box&) const = default;
};

/// Body, head and abdomen boxes for one frame.
struct Detection {
  int frame_index = 0;
  Box body;
  Box head;
  Box abdomen;

  bool operator==(const Detection&) const = default;
};

/// Clamps all boxes to [0, width) x [0, height).
Detection clamp_to_frame(const Detection& det, int width, int height);

struct SkipEntry {
  int line = 0;         // 1-based line in the sidecar, 0 when not file-based
  int frame_index = -1; // -1 when unknown
  std::string reason;
};

struct DetectionLoad {
  std::vector<Detection> detections;  // strictly increasing frame_index
  std::vector<SkipEntry> skipped;
};

/// Reads a JSONL sidecar: {"frame_index":n,"body":[x,y,w,h,c],"head":[...],"abdomen":[...]}.
/// Malformed lines, missing parts and out-of-order frames are skipped and reported.
DetectionLoad load_detections(const std::filesystem::path& sidecar_path);

nlohmann::json to_json(const Detection& d);
void write_detections(const std::vector<Detection>& dets, const std::filesystem::path& path);

}  // namespace retroid::align
