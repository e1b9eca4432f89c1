#pragma once

namespace rsdazzle {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace rsdazzle
