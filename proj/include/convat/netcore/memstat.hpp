#pragma once

#include <cstdint>

namespace convat::memstat {

// Heap accounting for the calling thread. Backed by replacement global
// operator new/delete, so it counts every allocation the thread makes.

std::int64_t live_bytes() noexcept;
std::int64_t peak_bytes() noexcept;

/// Restarts peak tracking from the current live byte count.
void reset_peak() noexcept;

/// Peak bytes allocated above the live count at the last reset_peak().
std::int64_t peak_transient_bytes() noexcept;

}  // namespace convat::memstat
