#pragma once

#include <vector>

#include "retroid/image.hpp"

namespace retroid::harness {

/// Area-averaged grayscale downsample to px x px (RGB goes through BT.601 luma),
/// values in [0, 255].
std::vector<float> downsample_gray(const Image& img, int px);

/// Scalar mean / std over a set of feature vectors, used for input normalization.
struct Normalization {
  double mean = 0.0;
  double std = 1.0;

  static Normalization fit(const std::vector<std::vector<float>>& features);
  void apply(std::vector<float>& f) const;
};

}  // namespace retroid::harness
