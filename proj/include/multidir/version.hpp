#pragma once

namespace multidir {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace multidir
