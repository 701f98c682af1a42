#pragma once

namespace cavityqfi {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cavityqfi
