#pragma once

// Small single-threaded f32 matrix kernels backing the convolution ops.
// All variants accumulate into C (callers zero-fill when needed) and run
// their loops in a fixed order, so results are bit-reproducible.

namespace boxseg::detail {

/// C[M,N] += A[M,K] * B[K,N]; all row-major.
void gemm_nn_acc(int M, int K, int N, const float* A, const float* B, float* C);

/// C[M,N] += A^T * B where A is [K,M] row-major.
void gemm_tn_acc(int K, int M, int N, const float* A, const float* B, float* C);

/// C[M,N] += A * B^T where B is [N,K] row-major.
void gemm_nt_acc(int M, int N, int K, const float* A, const float* B, float* C);

}  // namespace boxseg::detail
