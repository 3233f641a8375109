#include <gtest/gtest.h>

#include <numeric>

#include "../oracles/he.hpp"
#include "retroid/clahe/clahe.hpp"
#include "retroid/errors.hpp"
#include "retroid/rng.hpp"

using namespace retroid;
using namespace retroid::clahe;

namespace {

Image random_image(int w, int h, Rng& rng, int lo = 0, int hi = 256) {
  Image img(w, h, 1);
  for (auto& v : img.pixels) v = static_cast<std::uint8_t>(lo + rng.below(hi - lo));
  return img;
}

double hist_std(const Image& img) {
  const auto h = histogram(img);
  const double mean = std::accumulate(h.begin(), h.end(), 0.0) / h.size();
  double ss = 0;
  for (auto c : h) ss += (c - mean) * (c - mean);
  return std::sqrt(ss / (h.size() - 1));
}

}  // namespace

TEST(GlobalHe, ConstantImageUnchanged) {
  const Image img(16, 16, 1, 128);
  EXPECT_EQ(global_he(img), img);
}

TEST(GlobalHe, TwoPixelExample) {
  Image img(2, 1, 1);
  img.pixels = {0, 255};
  EXPECT_EQ(global_he(img).pixels, (std::vector<std::uint8_t>{0, 255}));
  img.pixels = {100, 101};
  EXPECT_EQ(global_he(img).pixels, (std::vector<std::uint8_t>{0, 255}));
}

TEST(GlobalHe, MatchesFloatingPointOracle) {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const int lo = static_cast<int>(rng.below(200));
    const Image img = random_image(1 + static_cast<int>(rng.below(60)), 1 + static_cast<int>(rng.below(60)), rng, lo,
                                   lo + 1 + static_cast<int>(rng.below(56)));
    EXPECT_EQ(global_he(img).pixels, oracle::equalize(img.pixels));
  }
}

TEST(GlobalHe, MonotoneInInput) {
  Rng rng(2);
  const Image img = random_image(40, 30, rng, 30, 120);
  const Image out = global_he(img);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    for (std::size_t j = 0; j < img.pixels.size(); j += 37)
      if (img.pixels[i] <= img.pixels[j]) {
        ASSERT_LE(out.pixels[i], out.pixels[j]);
      }
}

TEST(GlobalHe, RejectsEmptyAndColor) {
  EXPECT_THROW(global_he(Image{}), ValidationError);
  EXPECT_THROW(global_he(Image(4, 4, 3)), ValidationError);
}

TEST(ClipHistogram, FourBinExample) {
  const std::vector<std::uint64_t> h = {10, 0, 0, 0};
  EXPECT_EQ(clip_histogram(h, 4), (std::vector<std::uint64_t>{6, 2, 1, 1}));
}

TEST(ClipHistogram, NonBindingUnchanged) {
  const std::vector<std::uint64_t> h = {3, 4, 0, 2};
  EXPECT_EQ(clip_histogram(h, 4), h);
  const std::vector<std::uint64_t> u(256, 7);
  EXPECT_EQ(clip_histogram(u, 7), u);
}

TEST(ClipHistogram, ConservesCountOnRandomHistograms) {
  Rng rng(3);
  for (int t = 0; t < 1000; ++t) {
    std::vector<std::uint64_t> h(256);
    for (auto& c : h) c = rng.uniform() < 0.3 ? rng.below(5000) : rng.below(20);
    const std::uint64_t clip = 1 + rng.below(400);
    const auto out = clip_histogram(h, clip);
    ASSERT_EQ(std::accumulate(out.begin(), out.end(), std::uint64_t{0}), std::accumulate(h.begin(), h.end(), std::uint64_t{0}));
  }
}

TEST(Clahe, ConstantImageIdentity) {
  for (int v : {0, 17, 128, 255}) {
    const Image img(64, 48, 1, static_cast<std::uint8_t>(v));
    EXPECT_EQ(clahe::clahe(img), img);
  }
}

TEST(Clahe, SingleTileNonBindingClipEqualsGlobalHe) {
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const Image img = random_image(8 + static_cast<int>(rng.below(120)), 8 + static_cast<int>(rng.below(120)), rng);
    ClaheConfig cfg;
    cfg.tiles_x = cfg.tiles_y = 1;
    cfg.clip_limit = 256.0;  // clip_abs = Npix: nothing ever clips
    ASSERT_EQ(clahe::clahe(img, cfg), global_he(img));
  }
}

TEST(Clahe, FlattensHistogram) {
  Rng rng(5);
  Image img(64, 64, 1);
  for (auto& v : img.pixels) v = static_cast<std::uint8_t>(std::clamp(110.0 + 20.0 * rng.normal(), 0.0, 255.0));
  ClaheConfig cfg;
  cfg.tiles_x = cfg.tiles_y = 4;
  EXPECT_LT(hist_std(clahe::clahe(img, cfg)), hist_std(img));
}

TEST(Clahe, TileMappingsMonotone) {
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    const Image img = random_image(50 + static_cast<int>(rng.below(100)), 50 + static_cast<int>(rng.below(100)), rng, 40, 90);
    ClaheConfig cfg;
    cfg.clip_limit = rng.uniform(1.0, 5.0);
    const auto g = tile_mappings(img, cfg);
    ASSERT_EQ(g.luts.size(), 64u);
    for (const auto& lut : g.luts)
      for (int v = 1; v < kLevels; ++v) ASSERT_LE(lut[v - 1], lut[v]);
  }
}

TEST(Clahe, CornerPixelsUseCornerTileMapping) {
  Rng rng(7);
  const Image img = random_image(100, 80, rng, 20, 200);
  ClaheConfig cfg;
  cfg.tiles_x = 5;
  cfg.tiles_y = 4;
  const auto g = tile_mappings(img, cfg);
  const Image out = clahe::clahe(img, cfg);
  // Within half a tile of a corner there is nothing to interpolate against.
  const int hw = (g.x_end(4) - g.x_begin(4)) / 2, hh = (g.y_end(3) - g.y_begin(3)) / 2;
  for (int y = 0; y < hh; ++y)
    for (int x = 0; x < hw; ++x) {
      ASSERT_EQ(out.at(x, y), g.luts[0][img.at(x, y)]);
      const int xr = img.width - 1 - x, yb = img.height - 1 - y;
      ASSERT_EQ(out.at(xr, yb), g.luts.back()[img.at(xr, yb)]);
    }
}

TEST(Clahe, TileMappingMatchesOracleOnClippedHistogram) {
  Rng rng(8);
  const Image img = random_image(64, 64, rng, 50, 150);
  ClaheConfig cfg;
  cfg.tiles_x = cfg.tiles_y = 2;
  cfg.clip_limit = 1.5;
  const auto g = tile_mappings(img, cfg);
  // Top-left tile: 32x32 = 1024 px, clip at floor(1.5 * 1024 / 256) = 6.
  std::array<std::uint64_t, 256> h{};
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) ++h[img.at(x, y)];
  std::uint64_t excess = 0;
  for (auto& c : h)
    if (c > 6) excess += c - 6, c = 6;
  for (int v = 0; v < 256; ++v) h[v] += excess / 256 + (static_cast<std::uint64_t>(v) < excess % 256 ? 1 : 0);
  // Expand to a pixel list so the equalization oracle can be reused.
  std::vector<std::uint8_t> px;
  for (int v = 0; v < 256; ++v) px.insert(px.end(), h[v], static_cast<std::uint8_t>(v));
  const auto eq = oracle::equalize(px);
  std::size_t at = 0;
  for (int v = 0; v < 256; ++v) {
    if (h[v] > 0) {
      EXPECT_EQ(g.luts[0][v], eq[at]) << v;
    }
    at += h[v];
  }
}

TEST(Clahe, TilesCoverImageWithNearEqualSizes) {
  ClaheConfig cfg;
  const auto g = tile_mappings(Image(57, 20, 1, 3), cfg);
  EXPECT_EQ(g.x_begin(0), 0);
  EXPECT_EQ(g.x_end(7), 57);
  EXPECT_EQ(g.y_end(7), 20);
  for (int k = 0; k < 8; ++k) {
    EXPECT_GE(g.x_end(k) - g.x_begin(k), 7);
    EXPECT_LE(g.x_end(k) - g.x_begin(k), 8);
    EXPECT_GE(g.y_end(k) - g.y_begin(k), 2);
  }
  EXPECT_EQ(g.x_end(0) - g.x_begin(0), 8);
}

TEST(Clahe, ShapeRangeAndDeterminism) {
  Rng rng(9);
  const Image img = random_image(97, 61, rng);
  const Image a = clahe::clahe(img), b = clahe::clahe(img);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.width, 97);
  EXPECT_EQ(a.height, 61);
}

TEST(Clahe, RgbKeepsChannelsAndGrayAxis) {
  Rng rng(10);
  Image rgb(64, 64, 3);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const auto g = static_cast<std::uint8_t>(60 + rng.below(80));
      for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = g;
    }
  const Image out = clahe::clahe(rgb);
  ASSERT_EQ(out.channels, 3);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      EXPECT_NEAR(out.at(x, y, 0), out.at(x, y, 1), 1);
      EXPECT_NEAR(out.at(x, y, 1), out.at(x, y, 2), 1);
    }
}

TEST(Clahe, ConfigErrors) {
  ClaheConfig cfg;
  cfg.clip_limit = 0.5;
  EXPECT_THROW(clahe::clahe(Image(64, 64, 1), cfg), ConfigError);
  cfg = {};
  cfg.tiles_x = 0;
  EXPECT_THROW(clahe::clahe(Image(64, 64, 1), cfg), ConfigError);
  cfg = {};
  EXPECT_THROW(clahe::clahe(Image(15, 64, 1), cfg), ConfigError);
  EXPECT_NO_THROW(clahe::clahe(Image(16, 64, 1), cfg));
  EXPECT_NO_THROW(clahe::clahe(Image(57, 9 * 8 + 1, 1), cfg));
}
