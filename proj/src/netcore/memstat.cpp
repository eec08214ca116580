#include "convat/netcore/memstat.hpp"

#include <cstddef>
#include <cstdlib>
#include <new>

namespace convat::memstat {
namespace {

struct Counters {
  std::int64_t live = 0;
  std::int64_t peak = 0;
  std::int64_t baseline = 0;
};

thread_local Counters counters;

// Each block carries its requested size in a header, so the counts depend only
// on what the program asks for, not on allocator state (malloc_usable_size
// varies with chunk reuse and would make peaks differ between identical runs).
constexpr std::size_t kHeader = alignof(std::max_align_t);

void* tracked_alloc(std::size_t size) {
  auto* raw = static_cast<unsigned char*>(std::malloc(size + kHeader));
  if (raw == nullptr) throw std::bad_alloc();
  *reinterpret_cast<std::size_t*>(raw) = size;
  counters.live += static_cast<std::int64_t>(size);
  if (counters.live > counters.peak) counters.peak = counters.live;
  return raw + kHeader;
}

void tracked_free(void* p) noexcept {
  if (p == nullptr) return;
  auto* raw = static_cast<unsigned char*>(p) - kHeader;
  counters.live -= static_cast<std::int64_t>(*reinterpret_cast<std::size_t*>(raw));
  std::free(raw);
}

}  // namespace

std::int64_t live_bytes() noexcept { return counters.live; }
std::int64_t peak_bytes() noexcept { return counters.peak; }

void reset_peak() noexcept {
  counters.peak = counters.live;
  counters.baseline = counters.live;
}

std::int64_t peak_transient_bytes() noexcept { return counters.peak - counters.baseline; }

}  // namespace convat::memstat

void* operator new(std::size_t size) { return convat::memstat::tracked_alloc(size); }
void* operator new[](std::size_t size) { return convat::memstat::tracked_alloc(size); }
void* operator new(std::size_t size, const std::nothrow_t&) noexcept {
  try {
    return convat::memstat::tracked_alloc(size);
  } catch (...) {
    return nullptr;
  }
}
void* operator new[](std::size_t size, const std::nothrow_t&) noexcept {
  try {
    return convat::memstat::tracked_alloc(size);
  } catch (...) {
    return nullptr;
  }
}
void operator delete(void* p) noexcept { convat::memstat::tracked_free(p); }
void operator delete[](void* p) noexcept { convat::memstat::tracked_free(p); }
void operator delete(void* p, std::size_t) noexcept { convat::memstat::tracked_free(p); }
void operator delete[](void* p, std::size_t) noexcept { convat::memstat::tracked_free(p); }
