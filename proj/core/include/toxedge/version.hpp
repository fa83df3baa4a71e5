#pragma once

#include <cstdint>
#include <string>

namespace toxedge {

inline constexpr const char* kVersion = "0.3.0";
inline constexpr std::uint64_t kDefaultSeed = 1234;

std::string version_text();
// Single-line JSON object with the same fields as version_text().
std::string version_json();

} // namespace toxedge
