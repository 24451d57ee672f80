#pragma once

namespace ivuskit {

inline constexpr const char* kToolkitName = "ivuskit";
inline constexpr const char* kToolkitVersion = "0.1.0";

} // namespace ivuskit
