#pragma once

namespace ifvb {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ifvb
