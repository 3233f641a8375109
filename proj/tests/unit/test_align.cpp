#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "retroid/align/align.hpp"
#include "retroid/align/detection.hpp"
#include "retroid/data/hash.hpp"
#include "retroid/errors.hpp"
#include "retroid/rng.hpp"
#include "support.hpp"

using namespace retroid;
using namespace retroid::align;
using retroid::test::TempDir;

namespace {

constexpr double kRad = std::numbers::pi / 180.0;

Point rot_cw(Point v, double deg) {
  const double c = std::cos(deg * kRad), s = std::sin(deg * kRad);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

Box box_at(Point c, double w, double h) { return {c.x - w / 2, c.y - h / 2, w, h, 0.9}; }

// Body centred at `c`, head `dist_head` px and abdomen `dist_abd` px away,
// subject facing `deg` clockwise from up.
Detection make_det(Point c, double deg, int frame = 0) {
  const Point h = rot_cw({0, -60}, deg), a = rot_cw({0, 50}, deg);
  return {frame, box_at(c, 80, 160), box_at({c.x + h.x, c.y + h.y}, 30, 30), box_at({c.x + a.x, c.y + a.y}, 40, 50)};
}

Image smooth_frame(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  const double p1 = rng.uniform(0, 6), p2 = rng.uniform(0, 6), p3 = rng.uniform(0, 6);
  Image img(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = 128 + 50 * std::sin(x / 23.0 + p1) * std::cos(y / 31.0 + p2) + 30 * std::sin((x + y) / 47.0 + p3);
      img.at(x, y) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
  return img;
}

// Test-side rotation of a whole frame clockwise by `deg` about `c`, bilinear,
// pixel centres at (i + 0.5, j + 0.5), edge-clamped.
Image rotate_frame(const Image& src, Point c, double deg) {
  Image out(src.width, src.height, 1);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      const Point q = rot_cw({x + 0.5 - c.x, y + 0.5 - c.y}, -deg);
      const double sx = c.x + q.x - 0.5, sy = c.y + q.y - 0.5;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      auto px = [&](int xx, int yy) {
        return static_cast<double>(src.at(std::clamp(xx, 0, src.width - 1), std::clamp(yy, 0, src.height - 1)));
      };
      const double v = (px(x0, y0) * (1 - fx) + px(x0 + 1, y0) * fx) * (1 - fy) +
                       (px(x0, y0 + 1) * (1 - fx) + px(x0 + 1, y0 + 1) * fx) * fy;
      out.at(x, y) = static_cast<std::uint8_t>(std::lround(v));
    }
  return out;
}

Detection rotate_det(const Detection& d, Point c, double deg) {
  auto move = [&](const Box& b) {
    const Point bc = b.center();
    const Point r = rot_cw({bc.x - c.x, bc.y - c.y}, deg);
    return box_at({c.x + r.x, c.y + r.y}, b.w, b.h);
  };
  return {d.frame_index, move(d.body), move(d.head), move(d.abdomen)};
}

double angle_diff(double a, double b) { return std::abs(normalize_degrees(a - b)); }

void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << "\n";
}

}  // namespace

TEST(Detections, EmptyFileGivesEmptyList) {
  TempDir tmp;
  write_lines(tmp / "d.jsonl", {});
  const auto r = load_detections(tmp / "d.jsonl");
  EXPECT_TRUE(r.detections.empty());
  EXPECT_TRUE(r.skipped.empty());
}

TEST(Detections, WellFormedLinesInFrameOrder) {
  TempDir tmp;
  write_lines(tmp / "d.jsonl",
              {R"({"frame_index":0,"body":[10,10,50,80,0.9],"head":[20,10,10,10,0.8],"abdomen":[20,60,10,20,0.7]})",
               R"({"frame_index":2,"body":[10,10,50,80,0.9],"head":[20,10,10,10,0.8],"abdomen":[20,60,10,20,0.7]})",
               R"({"frame_index":5,"body":[10,10,50,80,0.9],"head":[20,10,10,10,0.8],"abdomen":[20,60,10,20,0.7]})"});
  const auto r = load_detections(tmp / "d.jsonl");
  ASSERT_EQ(r.detections.size(), 3u);
  EXPECT_EQ(r.detections[0].frame_index, 0);
  EXPECT_EQ(r.detections[1].frame_index, 2);
  EXPECT_EQ(r.detections[2].frame_index, 5);
  EXPECT_DOUBLE_EQ(r.detections[0].body.w, 50);
  EXPECT_DOUBLE_EQ(r.detections[0].abdomen.confidence, 0.7);
}

TEST(Detections, MissingHeadSkippedWithLineNumber) {
  TempDir tmp;
  write_lines(tmp / "d.jsonl",
              {R"({"frame_index":0,"body":[10,10,50,80,0.9],"head":[20,10,10,10,0.8],"abdomen":[20,60,10,20,0.7]})",
               R"({"frame_index":1,"body":[10,10,50,80,0.9],"abdomen":[20,60,10,20,0.7]})",
               R"({"frame_index":2,"body":[10,10,50,80,0.9],"head":[20,10,10,10,0.8],"abdomen":[20,60,10,20,0.7]})"});
  const auto r = load_detections(tmp / "d.jsonl");
  EXPECT_EQ(r.detections.size(), 2u);
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_EQ(r.skipped[0].line, 2);
  EXPECT_EQ(r.skipped[0].frame_index, 1);
  EXPECT_NE(r.skipped[0].reason.find("head"), std::string::npos);
}

TEST(Detections, MalformedAndOutOfOrderLinesSkipped) {
  TempDir tmp;
  write_lines(tmp / "d.jsonl",
              {R"({"frame_index":3,"body":[10,10,50,80,0.9],"head":[20,10,10,10,0.8],"abdomen":[20,60,10,20,0.7]})",
               "garbage",
               R"({"frame_index":3,"body":[10,10,50,80,0.9],"head":[20,10,10,10,0.8],"abdomen":[20,60,10,20,0.7]})",
               R"({"frame_index":4,"body":[10,10,0,80,0.9],"head":[20,10,10,10,0.8],"abdomen":[20,60,10,20,0.7]})",
               R"({"frame_index":5,"body":[10,10,5,80,1.5],"head":[20,10,10,10,0.8],"abdomen":[20,60,10,20,0.7]})"});
  const auto r = load_detections(tmp / "d.jsonl");
  EXPECT_EQ(r.detections.size(), 1u);
  ASSERT_EQ(r.skipped.size(), 4u);
  EXPECT_EQ(r.skipped[0].line, 2);
  EXPECT_EQ(r.skipped[1].line, 3);
  EXPECT_EQ(r.skipped[2].line, 4);
  EXPECT_EQ(r.skipped[3].line, 5);
}

TEST(Detections, WriteThenLoadRoundTrips) {
  TempDir tmp;
  std::vector<Detection> dets = {make_det({100, 100}, 10, 0), make_det({200, 150}, -70, 3)};
  write_detections(dets, tmp / "d.jsonl");
  const auto r = load_detections(tmp / "d.jsonl");
  EXPECT_EQ(r.detections, dets);
}

TEST(Orientation, AxisAlignedExamples) {
  EXPECT_DOUBLE_EQ(orientation_between({100, 50}, {100, 150}), 0.0);
  EXPECT_DOUBLE_EQ(orientation_between({150, 100}, {50, 100}), 90.0);
  EXPECT_DOUBLE_EQ(orientation_between({100, 150}, {100, 50}), -180.0);
  EXPECT_DOUBLE_EQ(orientation_between({50, 100}, {150, 100}), -90.0);
}

TEST(Orientation, CoincidentCentersUndefined) {
  EXPECT_THROW(orientation_between({100, 100}, {100.5, 100.5}), OrientationUndefined);
  Detection d = make_det({200, 200}, 0);
  d.head = d.abdomen;
  EXPECT_THROW(estimate_orientation(d), OrientationUndefined);
}

TEST(Orientation, NormalizeRange) {
  EXPECT_DOUBLE_EQ(normalize_degrees(180.0), -180.0);
  EXPECT_DOUBLE_EQ(normalize_degrees(540.0), -180.0);
  EXPECT_DOUBLE_EQ(normalize_degrees(-190.0), 170.0);
  EXPECT_DOUBLE_EQ(normalize_degrees(359.0), -1.0);
}

TEST(Orientation, RotatingDetectionShiftsAngle) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const double base = rng.uniform(-180, 180), phi = rng.uniform(-180, 180);
    const Point c{rng.uniform(100, 500), rng.uniform(100, 400)};
    const Detection d = make_det(c, base);
    const double a0 = estimate_orientation(d);
    const double a1 = estimate_orientation(rotate_det(d, c, phi));
    EXPECT_LT(angle_diff(a1 - a0, phi), 1.0);
    EXPECT_LT(angle_diff(a0, base), 1e-9);
  }
}

TEST(Align, CropWindowAndZeroPadding) {
  const Image frame(640, 480, 1, 200);
  const Detection det{0, box_at({200, 300}, 100, 200), box_at({200, 250}, 20, 20), box_at({200, 350}, 30, 30)};
  AlignParams p;
  p.pad_mode = data::PadMode::zero;
  const auto crop = align_crop(frame, det, p);
  const auto& t = crop.record.transform;
  const Point tl = crop_to_source(t, {0, 0}), br = crop_to_source(t, {256, 256});
  EXPECT_NEAR(tl.x, 0, 1e-9);
  EXPECT_NEAR(tl.y, 100, 1e-9);
  EXPECT_NEAR(br.x, 400, 1e-9);
  EXPECT_NEAR(br.y, 500, 1e-9);

  ASSERT_EQ(crop.pixels.width, 256);
  ASSERT_EQ(crop.pixels.height, 256);
  // Crop rows 380..399 fall below the frame; output rows whose bilinear
  // footprint lies wholly inside / outside are exactly 200 / 0.
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x) {
      if (y <= 242) {
        ASSERT_EQ(crop.pixels.at(x, y), 200) << x << "," << y;
      }
      if (y >= 244) {
        ASSERT_EQ(crop.pixels.at(x, y), 0) << x << "," << y;
      }
    }

  p.pad_mode = data::PadMode::edge;
  const auto edge = align_crop(frame, det, p);
  for (auto v : edge.pixels.pixels) ASSERT_EQ(v, 200);
}

TEST(Align, ZeroRotationEqualsPlainCropResize) {
  const Image frame = smooth_frame(640, 480, 3);
  const Detection det{0, box_at({320, 240}, 80, 160), box_at({320, 180}, 30, 30), box_at({320, 290}, 40, 50)};
  const auto crop = align_crop(frame, det);
  EXPECT_DOUBLE_EQ(crop.record.transform.rotation_deg, 0.0);

  // Oracle: cut the 400x400 window (inside the frame here) and resize with
  // an independent bilinear implementation.
  Image expected(256, 256, 1);
  const double scale = 400.0 / 256.0;
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x) {
      const double cx = std::clamp((x + 0.5) * scale - 0.5, 0.0, 399.0);
      const double cy = std::clamp((y + 0.5) * scale - 0.5, 0.0, 399.0);
      const int x0 = static_cast<int>(cx), y0 = static_cast<int>(cy);
      const int x1 = std::min(x0 + 1, 399), y1 = std::min(y0 + 1, 399);
      const double fx = cx - x0, fy = cy - y0;
      auto f = [&](int xx, int yy) { return static_cast<double>(frame.at(120 + xx, 40 + yy)); };
      const double v = (f(x0, y0) * (1 - fx) + f(x1, y0) * fx) * (1 - fy) + (f(x0, y1) * (1 - fx) + f(x1, y1) * fx) * fy;
      expected.at(x, y) = static_cast<std::uint8_t>(std::lround(v));
    }
  EXPECT_LT(mean_abs_diff(crop.pixels, expected), 1.0);
}

TEST(Align, DegenerateBodyRejected) {
  const Image frame(100, 100, 1, 50);
  Detection det = make_det({50, 50}, 0);
  det.body = box_at({50, 50}, 3, 40);
  EXPECT_THROW(align_crop(frame, det), CropRejected);
}

TEST(Align, TransformInvertibilityAndHeadUp) {
  Rng rng(5);
  const Image frame = smooth_frame(640, 480, 9);
  for (int i = 0; i < 100; ++i) {
    const Point c{rng.uniform(50, 590), rng.uniform(50, 430)};
    const Detection det = make_det(c, rng.uniform(-180, 180));
    AlignParams p;
    p.crop_px = 100 + static_cast<int>(rng.below(400));
    p.out_px = 32 + static_cast<int>(rng.below(256));
    const auto crop = align_crop(frame, det, p);
    const auto& t = crop.record.transform;
    ASSERT_EQ(crop.pixels.width, p.out_px);
    ASSERT_EQ(crop.pixels.height, p.out_px);
    EXPECT_GE(t.rotation_deg, -180.0);
    EXPECT_LT(t.rotation_deg, 180.0);

    const Point back = crop_to_source(t, {p.out_px / 2.0, p.out_px / 2.0});
    const Point bc = clamp_to_frame(det, frame.width, frame.height).body.center();
    EXPECT_LT(std::hypot(back.x - bc.x, back.y - bc.y), 1.0);

    const auto cd = clamp_to_frame(det, frame.width, frame.height);
    const Point h = source_to_crop(t, cd.head.center()), a = source_to_crop(t, cd.abdomen.center());
    EXPECT_LT(std::abs(orientation_between(h, a)), 2.0);

    const Point rt = crop_to_source(t, source_to_crop(t, {123.4, 56.7}));
    EXPECT_NEAR(rt.x, 123.4, 1e-9);
    EXPECT_NEAR(rt.y, 56.7, 1e-9);
  }
}

TEST(Align, RotationBy37DegreesIsPixelStable) {
  const Point c{450.3, 447.8};
  const Image frame = smooth_frame(900, 900, 17);
  const Detection det = make_det(c, 20.0);
  const Image rotated = rotate_frame(frame, c, 37.0);
  const Detection rdet = rotate_det(det, c, 37.0);

  EXPECT_LT(angle_diff(estimate_orientation(rdet) - estimate_orientation(det), 37.0), 1.0);
  const auto a = align_crop(frame, det);
  const auto b = align_crop(rotated, rdet);
  EXPECT_LT(mean_abs_diff(a.pixels, b.pixels), 3.0);
}

TEST(Align, RgbChannelsPreserved) {
  Image rgb(200, 200, 3);
  for (int y = 0; y < 200; ++y)
    for (int x = 0; x < 200; ++x) {
      rgb.at(x, y, 0) = 10;
      rgb.at(x, y, 1) = 100;
      rgb.at(x, y, 2) = 250;
    }
  AlignParams p;
  p.crop_px = 100;
  p.out_px = 64;
  const auto crop = align_crop(rgb, make_det({100, 100}, 45), p);
  ASSERT_EQ(crop.pixels.channels, 3);
  EXPECT_EQ(crop.pixels.at(10, 20, 0), 10);
  EXPECT_EQ(crop.pixels.at(10, 20, 1), 100);
  EXPECT_EQ(crop.pixels.at(10, 20, 2), 250);
}

TEST(ProcessSession, TenValidDetections) {
  std::vector<Frame> frames;
  std::vector<Detection> dets;
  for (int i = 0; i < 10; ++i) {
    frames.push_back({i, smooth_frame(320, 240, i), "f" + std::to_string(i) + ".png"});
    dets.push_back(make_det({160, 120}, 36.0 * i, i));
  }
  AlignParams p;
  p.crop_px = 200;
  p.out_px = 64;
  const auto out = process_session(frames, dets, {2, 1}, "bee_03", p, 2);
  ASSERT_EQ(out.crops.size(), 10u);
  EXPECT_TRUE(out.skipped.empty());
  for (int i = 0; i < 10; ++i) {
    const auto& r = out.crops[i].record;
    EXPECT_EQ(r.frame_index, i);
    EXPECT_EQ(r.individual, "bee_03");
    EXPECT_EQ(r.session, (data::SessionKey{2, 1}));
    EXPECT_EQ(r.stage, data::Stage::aligned);
    EXPECT_EQ(r.sha256, data::hash_image(encode_png(out.crops[i].pixels)));
    EXPECT_EQ(r.crop_id, make_crop_id("bee_03", {2, 1}, i));
  }
}

TEST(ProcessSession, MissingHeadsBecomeLoggedSkips) {
  TempDir tmp;
  std::vector<Frame> frames;
  std::vector<std::string> lines;
  for (int i = 0; i < 10; ++i) {
    frames.push_back({i, smooth_frame(320, 240, 100 + i), ""});
    auto j = to_json(make_det({160, 120}, 0, i));
    if (i == 3 || i == 7) j.erase("head");
    lines.push_back(j.dump());
  }
  write_lines(tmp / "d.jsonl", lines);
  const auto loaded = load_detections(tmp / "d.jsonl");
  EXPECT_EQ(loaded.skipped.size(), 2u);
  AlignParams p;
  p.crop_px = 200;
  p.out_px = 64;
  const auto out = process_session(frames, loaded.detections, {1, 1}, "bee_00", p);
  EXPECT_EQ(out.crops.size(), 8u);
  EXPECT_EQ(loaded.skipped[0].frame_index, 3);
  EXPECT_EQ(loaded.skipped[1].frame_index, 7);
  // The frames themselves come back as lacking a detection.
  ASSERT_EQ(out.skipped.size(), 2u);
  EXPECT_EQ(out.skipped[0].frame_index, 3);
  EXPECT_EQ(out.skipped[1].frame_index, 7);
}

TEST(ProcessSession, PerFrameFailuresDoNotAbort) {
  std::vector<Frame> frames = {{0, smooth_frame(320, 240, 1), ""}, {1, smooth_frame(320, 240, 2), ""}};
  Detection bad = make_det({160, 120}, 0, 1);
  bad.head = bad.abdomen;
  std::vector<Detection> dets = {make_det({160, 120}, 0, 0), bad, make_det({160, 120}, 0, 9)};
  AlignParams p;
  p.crop_px = 100;
  p.out_px = 32;
  const auto out = process_session(frames, dets, {1, 1}, "bee_00", p);
  EXPECT_EQ(out.crops.size(), 1u);
  ASSERT_EQ(out.skipped.size(), 2u);
  EXPECT_EQ(out.skipped[0].frame_index, 1);
  EXPECT_NE(out.skipped[0].reason.find("orientation"), std::string::npos);
  EXPECT_EQ(out.skipped[1].frame_index, 9);
}

TEST(ProcessSession, NoFramesWarns) {
  const auto out = process_session({}, {}, {1, 1}, "bee_00");
  EXPECT_TRUE(out.crops.empty());
  EXPECT_FALSE(out.warnings.empty());
}
