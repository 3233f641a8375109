#include "retroid/harness/features.hpp"

#include <algorithm>
#include <cmath>

#include "retroid/errors.hpp"

namespace retroid::harness {

namespace {

// Row-stochastic area-coverage weights mapping `in` samples onto `out` bins.
std::vector<std::vector<std::pair<int, double>>> area_weights(int in, int out) {
  std::vector<std::vector<std::pair<int, double>>> w(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double b = o * scale, e = (o + 1) * scale;
    for (int i = static_cast<int>(std::floor(b)); i < std::min(in, static_cast<int>(std::ceil(e))); ++i) {
      const double cover = std::min(e, i + 1.0) - std::max(b, static_cast<double>(i));
      if (cover > 0) w[o].push_back({i, cover / scale});
    }
  }
  return w;
}

}  // namespace

std::vector<float> downsample_gray(const Image& img, int px) {
  if (img.empty()) throw ValidationError("downsample: empty image");
  if (px < 1) throw ConfigError("downsample: target size must be positive");

  std::vector<double> gray(static_cast<std::size_t>(img.width) * img.height);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    if (img.channels == 1) {
      gray[i] = img.pixels[i];
    } else {
      const auto* p = &img.pixels[i * img.channels];
      gray[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }
  }

  const auto wx = area_weights(img.width, px);
  const auto wy = area_weights(img.height, px);
  std::vector<double> rows(static_cast<std::size_t>(img.height) * px, 0.0);
  for (int y = 0; y < img.height; ++y)
    for (int ox = 0; ox < px; ++ox) {
      double s = 0.0;
      for (auto [x, w] : wx[ox]) s += w * gray[static_cast<std::size_t>(y) * img.width + x];
      rows[static_cast<std::size_t>(y) * px + ox] = s;
    }
  std::vector<float> out(static_cast<std::size_t>(px) * px);
  for (int oy = 0; oy < px; ++oy)
    for (int ox = 0; ox < px; ++ox) {
      double s = 0.0;
      for (auto [y, w] : wy[oy]) s += w * rows[static_cast<std::size_t>(y) * px + ox];
      out[static_cast<std::size_t>(oy) * px + ox] = static_cast<float>(s);
    }
  return out;
}

Normalization Normalization::fit(const std::vector<std::vector<float>>& features) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& f : features)
    for (float v : f) {
      sum += v;
      sq += static_cast<double>(v) * v;
      ++n;
    }
  Normalization norm;
  if (n == 0) return norm;
  norm.mean = sum / n;
  norm.std = std::sqrt(std::max(0.0, sq / n - norm.mean * norm.mean));
  if (norm.std < 1e-6) norm.std = 1.0;
  return norm;
}

void Normalization::apply(std::vector<float>& f) const {
  const float m = static_cast<float>(mean), s = static_cast<float>(1.0 / std);
  for (auto& v : f) v = (v - m) * s;
}

}  // namespace retroid::harness
