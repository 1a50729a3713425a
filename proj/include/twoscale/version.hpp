#pragma once

namespace twoscale {

inline constexpr const char* kCodeVersion = "1.0.0";

}  // namespace twoscale
