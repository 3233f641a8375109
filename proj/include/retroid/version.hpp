#pragma once

namespace retroid {
inline constexpr const char* kToolName = "retroid";
inline constexpr const char* kVersion = "0.1.0";
}  // namespace retroid
