#include "retroid/clahe/clahe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "retroid/errors.hpp"

namespace retroid::clahe {

void ClaheConfig::validate() const {
  if (tiles_x < 1 || tiles_y < 1) throw ConfigError("clahe: grid dimensions must be positive");
  if (!(clip_limit >= 1.0)) throw ConfigError("clahe: clip_limit must be >= 1.0");
}

nlohmann::json ClaheConfig::to_json() const {
  return {{"grid", {tiles_x, tiles_y}}, {"clip_limit", clip_limit}, {"levels", kLevels}};
}

std::array<std::uint64_t, kLevels> histogram(const Image& gray) {
  std::array<std::uint64_t, kLevels> h{};
  for (auto v : gray.pixels) ++h[v];
  return h;
}

Lut equalization_lut(std::span<const std::uint64_t> hist) {
  Lut lut{};
  const int occupied = static_cast<int>(std::count_if(hist.begin(), hist.end(), [](auto c) { return c > 0; }));
  if (occupied <= 1) {
    std::iota(lut.begin(), lut.end(), 0);
    return lut;
  }
  const std::uint64_t total = std::accumulate(hist.begin(), hist.end(), std::uint64_t{0});
  std::uint64_t cdf_min = 0;
  for (auto c : hist) {
    if (c > 0) {
      cdf_min = c;
      break;
    }
  }
  const std::uint64_t den = total - cdf_min;
  std::uint64_t cdf = 0;
  for (std::size_t v = 0; v < hist.size(); ++v) {
    cdf += hist[v];
    if (cdf < cdf_min) {
      lut[v] = 0;  // below the lowest occupied bin; never looked up
      continue;
    }
    // Integer round-half-up of (cdf - cdf_min) * 255 / den.
    const std::uint64_t num = (cdf - cdf_min) * (kLevels - 1);
    lut[v] = static_cast<std::uint8_t>((2 * num + den) / (2 * den));
  }
  return lut;
}

Image global_he(const Image& image) {
  if (image.empty()) throw ValidationError("global_he: empty image");
  if (image.channels != 1) throw ValidationError("global_he: expects a single-channel image");
  const auto h = histogram(image);
  const Lut lut = equalization_lut(h);
  Image out = image;
  for (auto& v : out.pixels) v = lut[v];
  return out;
}

std::vector<std::uint64_t> clip_histogram(std::span<const std::uint64_t> hist, std::uint64_t clip_abs) {
  std::vector<std::uint64_t> out(hist.begin(), hist.end());
  if (out.empty()) return out;
  clip_abs = std::max<std::uint64_t>(clip_abs, 1);

  std::uint64_t excess = 0;
  for (auto& c : out) {
    if (c > clip_abs) {
      excess += c - clip_abs;
      c = clip_abs;
    }
  }
  const std::uint64_t per_bin = excess / out.size();
  const std::uint64_t remainder = excess % out.size();
  for (auto& c : out) c += per_bin;
  for (std::uint64_t i = 0; i < remainder; ++i) ++out[i];
  return out;
}

namespace {

void check_tiling(int extent, int tiles, const char* axis) {
  if (extent / tiles < 2) {
    throw ConfigError(std::string("clahe: image too small for grid along ") + axis + " (tiles must be >= 2 px)");
  }
}

Image clahe_gray(const Image& gray, const ClaheConfig& cfg) {
  const TileGrid grid = tile_mappings(gray, cfg);
  const int W = gray.width;
  const int H = gray.height;

  // Tile centers in continuous coordinates (pixel x has center x + 0.5).
  std::vector<double> cx(grid.tiles_x), cy(grid.tiles_y);
  for (int k = 0; k < grid.tiles_x; ++k) cx[k] = (grid.x_begin(k) + grid.x_end(k)) / 2.0;
  for (int k = 0; k < grid.tiles_y; ++k) cy[k] = (grid.y_begin(k) + grid.y_end(k)) / 2.0;

  struct Interp {
    int lo, hi;
    double w;  // weight of hi
  };
  auto locate = [](const std::vector<double>& c, double p) -> Interp {
    const int n = static_cast<int>(c.size());
    if (p <= c.front()) return {0, 0, 0.0};
    if (p >= c.back()) return {n - 1, n - 1, 0.0};
    int k = 0;
    while (k + 1 < n && c[k + 1] < p) ++k;
    return {k, k + 1, (p - c[k]) / (c[k + 1] - c[k])};
  };

  std::vector<Interp> xs(W);
  for (int x = 0; x < W; ++x) xs[x] = locate(cx, x + 0.5);

  Image out(W, H, 1);
  for (int y = 0; y < H; ++y) {
    const Interp iy = locate(cy, y + 0.5);
    for (int x = 0; x < W; ++x) {
      const Interp& ix = xs[x];
      const std::uint8_t v = gray.at(x, y);
      const auto lut = [&](int ty, int tx) -> double { return grid.luts[ty * grid.tiles_x + tx][v]; };
      const double top = (1.0 - ix.w) * lut(iy.lo, ix.lo) + ix.w * lut(iy.lo, ix.hi);
      const double bot = (1.0 - ix.w) * lut(iy.hi, ix.lo) + ix.w * lut(iy.hi, ix.hi);
      const double r = (1.0 - iy.w) * top + iy.w * bot;
      out.at(x, y) = saturate_u8(r);
    }
  }
  return out;
}

}  // namespace

TileGrid tile_mappings(const Image& gray, const ClaheConfig& cfg) {
  cfg.validate();
  if (gray.empty()) throw ValidationError("clahe: empty image");
  if (gray.channels != 1) throw ValidationError("clahe: tile mappings need a single-channel image");

  TileGrid g;
  g.tiles_x = cfg.tiles_x;
  g.tiles_y = cfg.tiles_y;
  g.width = gray.width;
  g.height = gray.height;
  check_tiling(gray.width, g.tiles_x, "x");
  check_tiling(gray.height, g.tiles_y, "y");

  g.luts.resize(static_cast<std::size_t>(g.tiles_x) * g.tiles_y);
  for (int ty = 0; ty < g.tiles_y; ++ty) {
    for (int tx = 0; tx < g.tiles_x; ++tx) {
      const int x0 = g.x_begin(tx), x1 = g.x_end(tx);
      const int y0 = g.y_begin(ty), y1 = g.y_end(ty);
      std::array<std::uint64_t, kLevels> h{};
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) ++h[gray.at(x, y)];

      const int occupied = static_cast<int>(std::count_if(h.begin(), h.end(), [](auto c) { return c > 0; }));
      Lut& lut = g.luts[ty * g.tiles_x + tx];
      if (occupied <= 1) {
        // Flat tile: identity, before clipping spreads counts into empty bins.
        std::iota(lut.begin(), lut.end(), 0);
        continue;
      }
      const std::uint64_t npix = static_cast<std::uint64_t>(x1 - x0) * (y1 - y0);
      const auto clip_abs = std::max<std::uint64_t>(
          1, static_cast<std::uint64_t>(std::floor(cfg.clip_limit * static_cast<double>(npix) / kLevels)));
      lut = equalization_lut(clip_histogram(h, clip_abs));
    }
  }
  return g;
}

Image clahe(const Image& image, const ClaheConfig& cfg) {
  cfg.validate();
  if (image.empty()) throw ValidationError("clahe: empty image");
  if (image.channels == 1) return clahe_gray(image, cfg);
  if (image.channels != 3) throw ValidationError("clahe: expects 1 or 3 channels");

  Image luma(image.width, image.height, 1);
  for (std::size_t i = 0; i < luma.pixels.size(); ++i) {
    const auto* p = &image.pixels[i * 3];
    luma.pixels[i] = saturate_u8(0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]);
  }
  const Image eq = clahe_gray(luma, cfg);

  Image out = image;
  for (std::size_t i = 0; i < luma.pixels.size(); ++i) {
    const double y = luma.pixels[i];
    const double y_new = eq.pixels[i];
    for (int c = 0; c < 3; ++c) {
      auto& v = out.pixels[i * 3 + c];
      const double scaled = y > 0 ? v * (y_new / y) : y_new;
      v = saturate_u8(scaled);
    }
  }
  return out;
}

}  // namespace retroid::clahe
