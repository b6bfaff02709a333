#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#include <omp.h>

namespace rlcbs {

/// Runs fn(i, worker) for i in [0, n), where worker in [0, workers) identifies the
/// calling thread so callers can keep one scratch object (e.g. an environment) per thread.
template <typename Fn>
void parallel_for_worker(std::size_t n, int workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i, 0);
        }
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const auto count = static_cast<long long>(n);
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
    for (long long i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i), omp_get_thread_num());
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) {
                first_error = std::current_exception();
            }
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

/// Runs fn(i) for i in [0, n). workers <= 1 is the plain serial loop, kept as the
/// reference path; otherwise an OpenMP team of `workers` threads with dynamic
/// scheduling. The first exception thrown by any iteration is rethrown after the loop.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    parallel_for_worker(n, workers, [&](std::size_t i, int) { fn(i); });
}

}  // namespace rlcbs
