#pragma once

namespace koopcert {

inline constexpr const char* kToolName = "koopcert";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace koopcert
