#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <exception>
#include <vector>

#include <omp.h>

namespace qcdirac {

inline int max_threads() { return omp_get_max_threads(); }
inline void set_threads(int n) {
    if (n > 0) omp_set_num_threads(n);
}

/// Runs body(i) for i in [0, n). Items must be independent; the first exception (lowest index)
/// is rethrown after the loop.
template <class F>
void for_each_index(std::size_t n, bool parallel, F&& body) {
    std::vector<std::exception_ptr> errors(n);
    const long count = static_cast<long>(n);
    if (parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (long i = 0; i < count; ++i) {
            try {
                body(static_cast<std::size_t>(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        for (long i = 0; i < count; ++i) {
            try {
                body(static_cast<std::size_t>(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Fixed-shape pairwise sum, so the result depends only on the order of `v`.
template <class T>
T pairwise_sum(const T* v, std::size_t n) {
    if (n <= 8) {
        T s{};
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

template <class T>
T pairwise_sum(const std::vector<T>& v) {
    return pairwise_sum(v.data(), v.size());
}

struct MeanEstimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t count = 0;
};

inline MeanEstimate mean_and_se(const std::vector<double>& v) {
    MeanEstimate out;
    out.count = v.size();
    if (v.empty()) return out;
    const double n = static_cast<double>(v.size());
    out.mean = pairwise_sum(v) / n;
    if (v.size() < 2) return out;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - out.mean) * (v[i] - out.mean);
    out.se = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
    return out;
}

}  // namespace qcdirac
