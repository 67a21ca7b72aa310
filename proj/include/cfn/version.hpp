#pragma once

namespace cfn {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cfn
