#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace refract {

/// Execution policy for data-parallel kernels (grid evaluation, Monte-Carlo
/// paths). Every parallel kernel has a serial twin that produces bit-identical
/// results; the serial path is the reference in tests and benchmarks.
enum class Exec { serial, parallel };

template <typename F>
void parallel_for(Exec exec, std::ptrdiff_t n, F&& body) {
    if (exec == Exec::parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            body(static_cast<std::size_t>(i));
        }
    } else {
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            body(static_cast<std::size_t>(i));
        }
    }
}

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace refract
