#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace toxedge {

// Seeded generator with distribution code written out here rather than taken
// from <random>, whose distributions differ between standard libraries.
// mt19937_64 itself is fully specified, so streams match across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

    // Standard normal via Box-Muller.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <class T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Mixes a base seed with a stream id so that sub-streams are independent.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept;

} // namespace toxedge
