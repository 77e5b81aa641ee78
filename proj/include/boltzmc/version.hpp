#pragma once

namespace boltzmc {

inline constexpr const char* kVersion = "0.1.0";

} // namespace boltzmc
