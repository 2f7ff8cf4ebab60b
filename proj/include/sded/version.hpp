#pragma once

namespace sded
{

inline constexpr const char* kVersion = "0.1.0";

} // namespace sded
