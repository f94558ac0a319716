#pragma once

#include "xrc/tensor.hpp"

namespace xrc {

/// Row-major C = alpha * op(A) * op(B) + beta * C, with op(A) m x k and
/// op(B) k x n. Runs on a single BLAS thread so results are reproducible
/// and callers may parallelize above this level.
void gemm(bool trans_a, bool trans_b, i64 m, i64 n, i64 k, double alpha,
          const double* a, i64 lda, const double* b, i64 ldb, double beta,
          double* c, i64 ldc);
void gemm(bool trans_a, bool trans_b, i64 m, i64 n, i64 k, float alpha,
          const float* a, i64 lda, const float* b, i64 ldb, float beta,
          float* c, i64 ldc);

}  // namespace xrc
