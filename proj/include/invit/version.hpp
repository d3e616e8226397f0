#pragma once

namespace invit {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kInstanceSchemaVersion = 1;
inline constexpr int kCheckpointVersion = 1;

}  // namespace invit
