#pragma once

namespace biolite {

inline constexpr const char* kVersion = "0.1.0";

} // namespace biolite
