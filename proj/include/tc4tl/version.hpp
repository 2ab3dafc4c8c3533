#pragma once

namespace tc4tl {

inline constexpr const char* kVersion = "0.1.0";

// Bumped whenever a serialized artifact layout changes.
inline constexpr int kModelFormatVersion = 1;

}  // namespace tc4tl
