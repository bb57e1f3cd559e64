#pragma once

#include <cstddef>

namespace swe {

// Small row-major matrix kernels used by the conv and fully-connected layers.
// All variants accumulate into C. Loop orders are chosen so the innermost loop
// runs over contiguous memory and auto-vectorizes; every C element is produced
// by one fixed-order reduction, so results do not depend on thread scheduling.

/// C[m,n] += A[m,k] * B[k,n]
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
             const T* __restrict a, const T* __restrict b, T* __restrict c) {
    for (std::size_t i = 0; i < m; ++i) {
        T* __restrict ci = c + i * n;
        const T* __restrict ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const T aip = ai[p];
            const T* __restrict bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

/// C[m,n] += A[m,k] * B[n,k]^T  (dot products of rows). The reduction runs in
/// 16 fixed lanes folded at the end, which vectorizes and keeps one exact
/// accumulation order per element.
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
             const T* __restrict a, const T* __restrict b, T* __restrict c) {
    constexpr std::size_t kLanes = 16;
    for (std::size_t i = 0; i < m; ++i) {
        const T* __restrict ai = a + i * k;
        T* __restrict ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const T* __restrict bj = b + j * k;
            T lanes[kLanes] = {};
            std::size_t p = 0;
            for (; p + kLanes <= k; p += kLanes)
                for (std::size_t w = 0; w < kLanes; ++w) lanes[w] += ai[p + w] * bj[p + w];
            T acc{};
            for (std::size_t w = 0; w < kLanes; ++w) acc += lanes[w];
            for (; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

/// C[m,n] += A[k,m]^T * B[k,n]
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k,
             const T* __restrict a, const T* __restrict b, T* __restrict c) {
    for (std::size_t p = 0; p < k; ++p) {
        const T* __restrict ap = a + p * m;
        const T* __restrict bp = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T api = ap[i];
            T* __restrict ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
}

} // namespace swe
