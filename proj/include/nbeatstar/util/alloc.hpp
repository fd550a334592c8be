#pragma once

#include <mutex>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace nbeatstar::util {

/// Training allocates and frees many batch-sized temporaries (~128 KiB) per step.
/// glibc serves those with fresh mmap pages by default, and the page faults cost
/// more than the matrix products. Raising the thresholds keeps them on the heap.
/// Process-wide and applied once; a no-op off glibc.
inline void keep_temporaries_on_heap() {
#if defined(__GLIBC__)
    static std::once_flag once;
    std::call_once(once, [] {
        mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
        mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
    });
#endif
}

}  // namespace nbeatstar::util
