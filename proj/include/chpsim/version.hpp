#pragma once

namespace chpsim {

inline constexpr const char* kToolName = "chpsim";
inline constexpr const char* kToolVersion = "1.0.0";

}  // namespace chpsim
