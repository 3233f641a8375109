#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "retroid/align/detection.hpp"
#include "retroid/data/manifest.hpp"
#include "retroid/image.hpp"

namespace retroid::align {

class OrientationUndefined : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CropRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Clockwise angle in [-180, 180) from image "up" (-y) to the
/// abdomen-center -> head-center vector. 0 means head directly above abdomen.
/// Throws OrientationUndefined when the centers are closer than 1 px.
double estimate_orientation(const Detection& det);
double orientation_between(Point head, Point abdomen);

/// Wraps an angle in degrees into [-180, 180).
double normalize_degrees(double deg);

struct AlignParams {
  int crop_px = 400;
  int out_px = 256;
  data::PadMode pad_mode = data::PadMode::edge;
};

struct AlignedCrop {
  Image pixels;
  data::CropRecord record;
};

/// Maps continuous output-crop coordinates back into source-frame coordinates.
Point crop_to_source(const data::TransformParams& t, Point crop_xy);
Point source_to_crop(const data::TransformParams& t, Point src_xy);

/// Rotates the frame so the subject faces up, extracts a crop_px square
/// centred on the body box, and resizes it to out_px (bilinear throughout).
/// Only `pixels` and `record.transform` / `record.stage` / `record.frame_index`
/// are populated; callers fill identity and provenance.
/// Throws OrientationUndefined or CropRejected (body box under 4 px).
AlignedCrop align_crop(const Image& frame, const Detection& det, const AlignParams& params = {});

struct Frame {
  int index = 0;
  Image image;
  std::string source;
};

struct SessionOutput {
  std::vector<AlignedCrop> crops;
  std::vector<SkipEntry> skipped;
  std::vector<std::string> warnings;
};

/// Aligns every detection against its frame. Never throws for per-frame
/// problems; those land in `skipped`. Output order follows frame order.
SessionOutput process_session(const std::vector<Frame>& frames, const std::vector<Detection>& detections,
                              const data::SessionKey& session, const std::string& individual,
                              const AlignParams& params = {}, int jobs = 1);

std::string make_crop_id(const std::string& individual, const data::SessionKey& session, int frame_index);

}  // namespace retroid::align
