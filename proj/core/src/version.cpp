#include "toxedge/version.hpp"

#include "toxedge/checkpoint.hpp"

#include <nlohmann/json.hpp>

namespace toxedge {

namespace {

constexpr const char* kSeedPolicy =
    "all randomness is drawn from explicit seeds (default 1234, TOXEDGE_SEED overrides) through mt19937_64 "
    "with portable distributions";

} // namespace

std::string version_text() {
    return std::string("toxedge ") + kVersion + "\ncheckpoint format: TOXW v" + std::to_string(kCheckpointVersion) +
           "\nseed policy: " + kSeedPolicy + "\n";
}

std::string version_json() {
    const nlohmann::json j = {{"version", kVersion},
                              {"checkpoint_format", "TOXW"},
                              {"checkpoint_format_version", kCheckpointVersion},
                              {"default_seed", kDefaultSeed},
                              {"seed_policy", kSeedPolicy}};
    return j.dump();
}

} // namespace toxedge
