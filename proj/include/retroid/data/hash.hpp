#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace retroid::data {

/// SHA-256 of encoded image bytes as 64 lowercase hex characters.
/// Throws ValidationError on empty input.
std::string hash_image(std::span<const std::uint8_t> image_bytes);

}  // namespace retroid::data
