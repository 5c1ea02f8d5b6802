#pragma once

#include <cstdint>

// Internal dense kernels shared by the conv/linear ops. Plain loops with
// unit-stride inner dimensions; the compiler vectorizes these well enough
// for desk-scale training.

namespace eegdiff::detail {

/// C[M,N] += A[M,K] * B[K,N]
inline void gemm_nn(std::int64_t M, std::int64_t K, std::int64_t N, const double* A, const double* B,
                    double* C) {
    for (std::int64_t i = 0; i < M; ++i) {
        const double* a = A + i * K;
        double* c = C + i * N;
        for (std::int64_t k = 0; k < K; ++k) {
            const double av = a[k];
            if (av == 0.0) continue;
            const double* b = B + k * N;
            for (std::int64_t j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

/// C[M,N] += A[M,K] * B[N,K]^T  (rows of both operands are contiguous)
inline void gemm_nt(std::int64_t M, std::int64_t K, std::int64_t N, const double* A, const double* B,
                    double* C) {
    for (std::int64_t i = 0; i < M; ++i) {
        const double* a = A + i * K;
        double* c = C + i * N;
        for (std::int64_t j = 0; j < N; ++j) {
            const double* b = B + j * K;
            double acc = 0.0;
            for (std::int64_t k = 0; k < K; ++k) acc += a[k] * b[k];
            c[j] += acc;
        }
    }
}

/// C[M,N] += A[K,M]^T * B[K,N]
inline void gemm_tn(std::int64_t M, std::int64_t K, std::int64_t N, const double* A, const double* B,
                    double* C) {
    for (std::int64_t k = 0; k < K; ++k) {
        const double* a = A + k * M;
        const double* b = B + k * N;
        for (std::int64_t i = 0; i < M; ++i) {
            const double av = a[i];
            if (av == 0.0) continue;
            double* c = C + i * N;
            for (std::int64_t j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

}  // namespace eegdiff::detail
