#pragma once

#include "hef/grid.hpp"

#include <cstddef>
#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hef {

/// Runs fn(i) for i in [0, count).  Iterations must be independent; each
/// writes only its own output slot, so serial and parallel runs produce
/// identical results.  If iterations throw, the exception of the lowest
/// index is rethrown after the loop, as in a serial run.
template <class Fn>
void for_each_index(Exec exec, std::size_t count, Fn&& fn) {
    const long long n = static_cast<long long>(count);
    if (exec == Exec::parallel) {
        std::exception_ptr first;
        long long first_index = n;
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < n; ++i) {
            try {
                fn(static_cast<std::size_t>(i));
            } catch (...) {
#pragma omp critical(hef_for_each_index)
                if (i < first_index) {
                    first_index = i;
                    first = std::current_exception();
                }
            }
        }
        if (first) std::rethrow_exception(first);
    } else {
        for (long long i = 0; i < n; ++i) fn(static_cast<std::size_t>(i));
    }
}

inline int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_thread_count(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

}  // namespace hef
