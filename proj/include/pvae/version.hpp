#pragma once

namespace pvae {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pvae
