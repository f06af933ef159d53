#pragma once

namespace csmgmm {

inline constexpr const char* version = "0.1.0";

}  // namespace csmgmm
