#include "toxedge/memory.hpp"

#include "toxedge/error.hpp"

#include <atomic>

namespace toxedge {

namespace {

std::atomic<std::size_t> g_live{0};
std::atomic<std::size_t> g_peak{0};
std::atomic<bool> g_measuring{false};
std::atomic<int> g_parallel{0};

void raise_peak(std::size_t live) noexcept {
    std::size_t seen = g_peak.load(std::memory_order_relaxed);
    while (live > seen &&
           !g_peak.compare_exchange_weak(seen, live, std::memory_order_relaxed)) {
    }
}

} // namespace

namespace memory {

void on_allocate(std::size_t bytes) noexcept {
    std::size_t live = g_live.fetch_add(bytes, std::memory_order_relaxed) + bytes;
    raise_peak(live);
}

void on_deallocate(std::size_t bytes) noexcept {
    g_live.fetch_sub(bytes, std::memory_order_relaxed);
}

std::size_t live_bytes() noexcept { return g_live.load(std::memory_order_relaxed); }

} // namespace memory

std::size_t peak_memory(const std::function<void()>& run) {
    if (ParallelRegion::active()) {
        fail(ErrorKind::UnsupportedNesting,
             "peak_memory cannot run inside a parallel region");
    }
    bool expected = false;
    if (!g_measuring.compare_exchange_strong(expected, true)) {
        fail(ErrorKind::UnsupportedNesting, "peak_memory measurements cannot be nested");
    }
    struct Reset {
        ~Reset() { g_measuring.store(false); }
    } reset;

    const std::size_t baseline = g_live.load();
    g_peak.store(baseline);
    run();
    const std::size_t peak = g_peak.load();
    return peak > baseline ? peak - baseline : 0;
}

ParallelRegion::ParallelRegion() noexcept { g_parallel.fetch_add(1); }
ParallelRegion::~ParallelRegion() { g_parallel.fetch_sub(1); }
bool ParallelRegion::active() noexcept { return g_parallel.load() > 0; }

} // namespace toxedge
