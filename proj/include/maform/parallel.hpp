#pragma once

#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace maform {

// Thread count from MAFORM_THREADS (unset or invalid: runtime default).
inline int configured_threads() {
    const char* s = std::getenv("MAFORM_THREADS");
    if (!s) return 0;
    int n = std::atoi(s);
    return n > 0 ? n : 0;
}

// Independent iterations only; results must be written to per-index slots. The first
// exception thrown by any iteration is rethrown after the loop.
template <class F>
void parallel_for(std::size_t n, F&& body) {
    std::exception_ptr error;
    std::mutex m;
    auto guarded = [&](std::size_t i) {
        try {
            body(i);
        } catch (...) {
            std::lock_guard<std::mutex> lock(m);
            if (!error) error = std::current_exception();
        }
    };
#ifdef _OPENMP
    int t = configured_threads();
    if (t > 0) {
#pragma omp parallel for schedule(dynamic) num_threads(t)
        for (long long i = 0; i < static_cast<long long>(n); ++i) guarded(static_cast<std::size_t>(i));
    } else {
#pragma omp parallel for schedule(dynamic)
        for (long long i = 0; i < static_cast<long long>(n); ++i) guarded(static_cast<std::size_t>(i));
    }
#else
    for (std::size_t i = 0; i < n; ++i) guarded(i);
#endif
    if (error) std::rethrow_exception(error);
}

}  // namespace maform
