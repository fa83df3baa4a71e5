#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace toxedge::cli {

// Runs one invocation. `args` excludes the program name. Returns the
// process exit code: 0 ok, 1 usage/parameter, 2 data/format, 3 contract.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// TOXEDGE_SEED if set and numeric, otherwise nullopt. A malformed value
// raises a usage error.
std::optional<std::uint64_t> seed_from_env();

} // namespace toxedge::cli
