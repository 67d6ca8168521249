#pragma once

namespace qresp {
inline constexpr const char* kVersion = "0.1.0";
}
