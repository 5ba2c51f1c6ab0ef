#include "gemm.hpp"

namespace boxseg::detail {

// Broadcast-saxpy form: the inner loop runs over contiguous rows of B and C,
// which GCC vectorizes with FMA when available.
void gemm_nn_acc(int M, int K, int N, const float* A, const float* B,
                 float* C) {
  for (int i = 0; i < M; ++i) {
    const float* a_row = A + static_cast<long>(i) * K;
    float* c_row = C + static_cast<long>(i) * N;
    for (int k = 0; k < K; ++k) {
      const float a = a_row[k];
      if (a == 0.0f) continue;
      const float* b_row = B + static_cast<long>(k) * N;
      for (int j = 0; j < N; ++j) c_row[j] += a * b_row[j];
    }
  }
}

void gemm_tn_acc(int K, int M, int N, const float* A, const float* B,
                 float* C) {
  for (int k = 0; k < K; ++k) {
    const float* a_row = A + static_cast<long>(k) * M;
    const float* b_row = B + static_cast<long>(k) * N;
    for (int i = 0; i < M; ++i) {
      const float a = a_row[i];
      if (a == 0.0f) continue;
      float* c_row = C + static_cast<long>(i) * N;
      for (int j = 0; j < N; ++j) c_row[j] += a * b_row[j];
    }
  }
}

// Dot-product form; the k loop is contiguous in both operands.
void gemm_nt_acc(int M, int N, int K, const float* A, const float* B,
                 float* C) {
  for (int i = 0; i < M; ++i) {
    const float* a_row = A + static_cast<long>(i) * K;
    float* c_row = C + static_cast<long>(i) * N;
    for (int j = 0; j < N; ++j) {
      const float* b_row = B + static_cast<long>(j) * K;
      float acc = 0.0f;
      for (int k = 0; k < K; ++k) acc += a_row[k] * b_row[k];
      c_row[j] += acc;
    }
  }
}

}  // namespace boxseg::detail
