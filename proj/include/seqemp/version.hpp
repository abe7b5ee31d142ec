#pragma once

namespace seqemp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace seqemp
