#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace retroid {

/// Interleaved 8-bit image, 1 (gray) or 3 (RGB) channels, row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c = 1, std::uint8_t fill = 0);

  bool empty() const { return width == 0 || height == 0; }
  std::size_t size() const { return pixels.size(); }

  std::uint8_t& at(int x, int y, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// clamp(lround(v), 0, 255) without the libm call.
inline std::uint8_t saturate_u8(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(static_cast<int>(v + 0.5));
}

/// floor() for values well inside int range.
inline int floor_int(double v) {
  const int i = static_cast<int>(v);
  return i - (v < i);
}

/// Mean absolute per-sample difference, in 8-bit units. Shapes must match.
double mean_abs_diff(const Image& a, const Image& b);

/// Encodes as PNG. Output bytes are deterministic for a given image.
std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(std::span<const std::uint8_t> bytes);

Image read_png(const std::filesystem::path& path);
/// Writes the PNG and returns the encoded bytes (handy for hashing).
std::vector<std::uint8_t> write_png(const Image& img, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace retroid
