#pragma once

namespace slowfast {

inline constexpr const char* kVersion = "0.1.0";

// Bumped whenever the layout of any serialized report changes.
inline constexpr int kSchemaVersion = 1;

} // namespace slowfast
