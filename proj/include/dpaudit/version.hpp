#pragma once

namespace dpaudit {
inline constexpr const char* kVersion = "0.1.0";
}
