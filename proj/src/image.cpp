#include "retroid/image.hpp"

#include <png.h>

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>

#include "retroid/errors.hpp"

namespace retroid {

Image::Image(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c),
      pixels(static_cast<std::size_t>(w) * h * c, fill) {}

double mean_abs_diff(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw ValidationError("mean_abs_diff: image shapes differ");
  }
  if (a.pixels.empty()) return 0.0;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    total += static_cast<std::uint64_t>(std::abs(int(a.pixels[i]) - int(b.pixels[i])));
  }
  return static_cast<double>(total) / static_cast<double>(a.pixels.size());
}

namespace {

constexpr int kPngCompressionLevel = 3;

void png_error_fn(png_structp, png_const_charp msg) { throw ValidationError(std::string("png: ") + msg); }
void png_warning_fn(png_structp, png_const_charp) {}

void write_to_vector(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}
void flush_noop(png_structp) {}

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void read_from_span(png_structp png, png_bytep data, png_size_t len) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->bytes.size()) png_error(png, "truncated stream");
  std::memcpy(data, cur->bytes.data() + cur->pos, len);
  cur->pos += len;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.empty()) throw ValidationError("encode_png: empty image");
  if (img.channels != 1 && img.channels != 3) throw ValidationError("encode_png: channels must be 1 or 3");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  try {
    png_set_write_fn(png, &out, write_to_vector, flush_noop);
    png_set_compression_level(png, kPngCompressionLevel);
    png_set_IHDR(png, info, img.width, img.height, 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
    for (int y = 0; y < img.height; ++y) {
      png_write_row(png, const_cast<png_bytep>(img.pixels.data() + y * stride));
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw ValidationError("decode_png: not a PNG stream");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{bytes, 0};
  Image img;
  try {
    png_set_read_fn(png, &cursor, read_from_span);
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    img = Image(static_cast<int>(png_get_image_width(png, info)),
                static_cast<int>(png_get_image_height(png, info)), channels);
    const std::size_t stride = static_cast<std::size_t>(img.width) * channels;
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) rows[y] = img.pixels.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Image read_png(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_png(bytes);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> write_png(const Image& img, const std::filesystem::path& path) {
  auto bytes = encode_png(img);
  write_file_bytes(path, bytes);
  return bytes;
}

}  // namespace retroid
