#pragma once

namespace ees {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ees
