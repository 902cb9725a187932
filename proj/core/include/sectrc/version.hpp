#pragma once

namespace sectrc {

inline constexpr const char* kToolName = "sectrc";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace sectrc
