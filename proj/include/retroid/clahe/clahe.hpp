#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "retroid/image.hpp"

namespace retroid::clahe {

inline constexpr int kLevels = 256;

struct ClaheConfig {
  int tiles_x = 8;
  int tiles_y = 8;
  /// Multiple of the uniform bin height (Npix_tile / levels); must be >= 1.
  double clip_limit = 2.0;

  void validate() const;
  nlohmann::json to_json() const;
};

using Lut = std::array<std::uint8_t, kLevels>;

/// Equalization mapping for a histogram:
///   L(v) = round((cdf(v) - cdf_min) / (Npix - cdf_min) * (levels - 1))
/// with cdf_min the cdf at the lowest occupied bin. A histogram with a single
/// occupied bin maps to the identity.
Lut equalization_lut(std::span<const std::uint64_t> hist);

/// Global histogram equalization of an 8-bit single-channel image.
Image global_he(const Image& image);

/// Clips every bin at clip_abs and spreads the excess uniformly; the
/// remainder goes one count per bin starting at bin 0. Total count is
/// preserved exactly; bins may end slightly above clip_abs.
std::vector<std::uint64_t> clip_histogram(std::span<const std::uint64_t> hist, std::uint64_t clip_abs);

/// Tile k along an axis of length n spans [ceil(k n / t), ceil((k+1) n / t)),
/// so leading tiles take the ceiling size and sizes differ by at most one.
struct TileGrid {
  int width = 0;
  int height = 0;
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<Lut> luts;  // row-major, tiles_y * tiles_x

  int x_begin(int tx) const { return static_cast<int>((static_cast<long long>(tx) * width + tiles_x - 1) / tiles_x); }
  int y_begin(int ty) const { return static_cast<int>((static_cast<long long>(ty) * height + tiles_y - 1) / tiles_y); }
  int x_end(int tx) const { return x_begin(tx + 1); }
  int y_end(int ty) const { return y_begin(ty + 1); }
};

/// Per-tile clipped equalization mappings for a single-channel image.
TileGrid tile_mappings(const Image& gray, const ClaheConfig& cfg);

/// CLAHE. Gray images are equalized directly; RGB images equalize BT.601
/// luma and scale each channel by the luma ratio. Output has the input's
/// dimensions and channel count.
Image clahe(const Image& image, const ClaheConfig& cfg = {});

std::array<std::uint64_t, kLevels> histogram(const Image& gray);

}  // namespace retroid::clahe
