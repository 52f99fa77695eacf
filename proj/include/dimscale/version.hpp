#pragma once

namespace dimscale {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dimscale
