#pragma once

namespace mcstab {
inline constexpr const char* kVersion = "0.1.0";
}
