#pragma once

namespace plotyield {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace plotyield
