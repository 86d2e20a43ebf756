#pragma once

namespace sanet {

inline constexpr const char* kVersion = "0.1.0";

} // namespace sanet
