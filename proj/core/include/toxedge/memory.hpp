#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <new>
#include <vector>

namespace toxedge {

namespace memory {

// Process-wide accounting of bytes held by tensor buffers.
void on_allocate(std::size_t bytes) noexcept;
void on_deallocate(std::size_t bytes) noexcept;

std::size_t live_bytes() noexcept;

} // namespace memory

// std::allocator wrapper that reports every allocation to the tracker. All
// tensor storage uses it, which is what makes peak_memory() meaningful.
template <class T>
struct TrackedAllocator {
    using value_type = T;

    TrackedAllocator() noexcept = default;
    template <class U>
    TrackedAllocator(const TrackedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        if (n > std::numeric_limits<std::size_t>::max() / sizeof(T)) {
            throw std::bad_array_new_length();
        }
        T* p = std::allocator<T>{}.allocate(n);
        memory::on_allocate(n * sizeof(T));
        return p;
    }

    void deallocate(T* p, std::size_t n) noexcept {
        memory::on_deallocate(n * sizeof(T));
        std::allocator<T>{}.deallocate(p, n);
    }

    template <class U>
    bool operator==(const TrackedAllocator<U>&) const noexcept { return true; }
};

template <class T>
using TrackedVector = std::vector<T, TrackedAllocator<T>>;

// High-water mark of live tracked bytes above the level at entry, observed
// while `run` executes. Nested measurement is rejected, as is measurement
// while a ParallelRegion is open.
std::size_t peak_memory(const std::function<void()>& run);

// Marks code that runs work on several threads (e.g. grid-search branches).
// Benchmark measurements refuse to start while any region is open.
class ParallelRegion {
public:
    ParallelRegion() noexcept;
    ~ParallelRegion();
    ParallelRegion(const ParallelRegion&) = delete;
    ParallelRegion& operator=(const ParallelRegion&) = delete;

    static bool active() noexcept;
};

} // namespace toxedge
