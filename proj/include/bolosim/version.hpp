#pragma once

namespace bolo {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kToolName = "bolosim";

} // namespace bolo
