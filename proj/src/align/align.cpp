#include "retroid/align/align.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

#include "retroid/data/hash.hpp"
#include "retroid/errors.hpp"
#include "retroid/parallel.hpp"

namespace retroid::align {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kMinBodySidePx = 4.0;

// Visual clockwise rotation in y-down image coordinates.
Point rotate_cw(Point v, double deg) {
  const double c = std::cos(deg * kDegToRad);
  const double s = std::sin(deg * kDegToRad);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// Bilinear sample at continuous pixel-center coordinates (pixel i has center i).
float sample_bilinear(const Image& img, double px, double py, int c, data::PadMode pad) {
  const int x0 = floor_int(px);
  const int y0 = floor_int(py);
  const double fx = px - x0;
  const double fy = py - y0;

  auto fetch = [&](int x, int y) -> double {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) {
      if (pad == data::PadMode::zero) return 0.0;
      x = std::clamp(x, 0, img.width - 1);
      y = std::clamp(y, 0, img.height - 1);
    }
    return img.at(x, y, c);
  };

  const double top = fetch(x0, y0) * (1.0 - fx) + fetch(x0 + 1, y0) * fx;
  const double bot = fetch(x0, y0 + 1) * (1.0 - fx) + fetch(x0 + 1, y0 + 1) * fx;
  return static_cast<float>(top * (1.0 - fy) + bot * fy);
}

}  // namespace

double normalize_degrees(double deg) {
  double a = std::fmod(deg + 180.0, 360.0);
  if (a < 0) a += 360.0;
  a -= 180.0;
  if (a >= 180.0) a -= 360.0;
  return a;
}

double orientation_between(Point head, Point abdomen) {
  const double dx = head.x - abdomen.x;
  const double dy = head.y - abdomen.y;
  if (std::hypot(dx, dy) < 1.0) {
    throw OrientationUndefined("head and abdomen centers coincide");
  }
  return normalize_degrees(std::atan2(dx, -dy) / kDegToRad);
}

double estimate_orientation(const Detection& det) {
  return orientation_between(det.head.center(), det.abdomen.center());
}

Point crop_to_source(const data::TransformParams& t, Point crop_xy) {
  const double scale = static_cast<double>(t.crop_px) / t.out_px;
  const Point u{crop_xy.x * scale - t.crop_px / 2.0, crop_xy.y * scale - t.crop_px / 2.0};
  const Point r = rotate_cw(u, -t.rotation_deg);
  return {t.center_x + r.x, t.center_y + r.y};
}

Point source_to_crop(const data::TransformParams& t, Point src_xy) {
  const double scale = static_cast<double>(t.crop_px) / t.out_px;
  const Point u = rotate_cw({src_xy.x - t.center_x, src_xy.y - t.center_y}, t.rotation_deg);
  return {(u.x + t.crop_px / 2.0) / scale, (u.y + t.crop_px / 2.0) / scale};
}

AlignedCrop align_crop(const Image& frame, const Detection& raw_det, const AlignParams& params) {
  if (frame.empty()) throw ValidationError("align_crop: empty frame");
  if (params.crop_px <= 0 || params.out_px <= 0) throw ConfigError("align_crop: crop_px and out_px must be > 0");

  const Detection det = clamp_to_frame(raw_det, frame.width, frame.height);
  if (det.body.w < kMinBodySidePx || det.body.h < kMinBodySidePx) {
    throw CropRejected("body box degenerate (" + std::to_string(det.body.w) + "x" + std::to_string(det.body.h) + ")");
  }
  const double theta = estimate_orientation(det);
  const Point center = det.body.center();

  data::TransformParams t;
  t.rotation_deg = normalize_degrees(-theta);
  t.center_x = center.x;
  t.center_y = center.y;
  t.crop_px = params.crop_px;
  t.out_px = params.out_px;
  t.pad_mode = params.pad_mode;

  const int channels = frame.channels;
  const int n = params.crop_px;

  // Rotate + crop into a float buffer; crop pixel (i, j) covers the continuous
  // square [i, i+1) x [j, j+1) of the rotated crop window.
  std::vector<float> crop(static_cast<std::size_t>(n) * n * channels);
  const double c = std::cos(theta * kDegToRad);
  const double s = std::sin(theta * kDegToRad);
  for (int j = 0; j < n; ++j) {
    const double uy = j + 0.5 - n / 2.0;
    for (int i = 0; i < n; ++i) {
      const double ux = i + 0.5 - n / 2.0;
      // Continuous source position, then shift to pixel-center coordinates.
      const double sx = center.x + c * ux - s * uy - 0.5;
      const double sy = center.y + s * ux + c * uy - 0.5;
      float* dst = &crop[(static_cast<std::size_t>(j) * n + i) * channels];
      const int x0 = floor_int(sx), y0 = floor_int(sy);
      if (x0 >= 0 && y0 >= 0 && x0 + 1 < frame.width && y0 + 1 < frame.height) {
        // Interior fast path; same arithmetic as sample_bilinear.
        const double fx = sx - x0, fy = sy - y0;
        const std::size_t stride = static_cast<std::size_t>(frame.width) * channels;
        const std::uint8_t* p = &frame.pixels[static_cast<std::size_t>(y0) * stride + static_cast<std::size_t>(x0) * channels];
        for (int ch = 0; ch < channels; ++ch) {
          const double top = p[ch] * (1.0 - fx) + p[ch + channels] * fx;
          const double bot = p[stride + ch] * (1.0 - fx) + p[stride + ch + channels] * fx;
          dst[ch] = static_cast<float>(top * (1.0 - fy) + bot * fy);
        }
      } else {
        for (int ch = 0; ch < channels; ++ch) dst[ch] = sample_bilinear(frame, sx, sy, ch, params.pad_mode);
      }
    }
  }

  // Bilinear resize crop_px -> out_px.
  const int m = params.out_px;
  const double scale = static_cast<double>(n) / m;
  Image out(m, m, channels);
  for (int y = 0; y < m; ++y) {
    const double py = std::clamp((y + 0.5) * scale - 0.5, 0.0, static_cast<double>(n - 1));
    const int y0 = std::min(static_cast<int>(py), n - 1);
    const int y1 = std::min(y0 + 1, n - 1);
    const double fy = py - y0;
    for (int x = 0; x < m; ++x) {
      const double px = std::clamp((x + 0.5) * scale - 0.5, 0.0, static_cast<double>(n - 1));
      const int x0 = std::min(static_cast<int>(px), n - 1);
      const int x1 = std::min(x0 + 1, n - 1);
      const double fx = px - x0;
      for (int ch = 0; ch < channels; ++ch) {
        auto at = [&](int xx, int yy) { return crop[(static_cast<std::size_t>(yy) * n + xx) * channels + ch]; };
        const double v = (at(x0, y0) * (1 - fx) + at(x1, y0) * fx) * (1 - fy) +
                         (at(x0, y1) * (1 - fx) + at(x1, y1) * fx) * fy;
        out.at(x, y, ch) = saturate_u8(v);
      }
    }
  }

  AlignedCrop result;
  result.pixels = std::move(out);
  result.record.transform = t;
  result.record.stage = data::Stage::aligned;
  result.record.frame_index = det.frame_index;
  return result;
}

std::string make_crop_id(const std::string& individual, const data::SessionKey& session, int frame_index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "_d%d_s%d_f%06d", session.day, session.set, frame_index);
  return individual + buf;
}

SessionOutput process_session(const std::vector<Frame>& frames, const std::vector<Detection>& detections,
                              const data::SessionKey& session, const std::string& individual,
                              const AlignParams& params, int jobs) {
  SessionOutput out;
  if (frames.empty()) {
    out.warnings.push_back("session " + data::to_string(session) + " for " + individual + " has no frames");
    for (const auto& d : detections) out.skipped.push_back({0, d.frame_index, "no frame for detection"});
    return out;
  }

  std::map<int, const Frame*> by_index;
  for (const auto& f : frames) by_index[f.index] = &f;
  std::map<int, bool> has_detection;
  for (const auto& d : detections) has_detection[d.frame_index] = true;

  struct Slot {
    std::optional<AlignedCrop> crop;
    std::optional<SkipEntry> skip;
  };
  std::vector<Slot> slots(detections.size());

  parallel_for(detections.size(), jobs, [&](std::size_t i) {
    const Detection& det = detections[i];
    auto it = by_index.find(det.frame_index);
    if (it == by_index.end()) {
      slots[i].skip = SkipEntry{0, det.frame_index, "no frame for detection"};
      return;
    }
    try {
      AlignedCrop c = align_crop(it->second->image, det, params);
      c.record.crop_id = make_crop_id(individual, session, det.frame_index);
      c.record.individual = individual;
      c.record.session = session;
      c.record.source = it->second->source;
      c.record.sha256 = data::hash_image(encode_png(c.pixels));
      slots[i].crop = std::move(c);
    } catch (const OrientationUndefined& e) {
      slots[i].skip = SkipEntry{0, det.frame_index, std::string("orientation undefined (QC suspect): ") + e.what()};
    } catch (const CropRejected& e) {
      slots[i].skip = SkipEntry{0, det.frame_index, std::string("crop rejected: ") + e.what()};
    }
  });

  for (auto& s : slots) {
    if (s.crop) out.crops.push_back(std::move(*s.crop));
    if (s.skip) out.skipped.push_back(std::move(*s.skip));
  }
  for (const auto& f : frames) {
    if (!has_detection.contains(f.index)) out.skipped.push_back({0, f.index, "no detection for frame"});
  }
  return out;
}

}  // namespace retroid::align
