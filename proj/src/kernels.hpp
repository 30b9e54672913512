#pragma once

#include <cstddef>

namespace pvr::kernels {

// C = A . B for row-major A (m x k), B (k x n), C (m x n); C is overwritten.
// Every output element is accumulated over k in increasing order, so a row of
// C depends only on the matching row of A (bit-for-bit, wherever it sits).
void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n);

// C += A . B, each element adding its complete sum over k to the old value.
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n);

// C += A^T . B for row-major A (m x k), B (m x n), C (k x n), accumulating over
// the rows of A and B in increasing order.
void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n);

// dst (cols x rows) = src (rows x cols)^T
void transpose(const double* src, double* dst, std::size_t rows, std::size_t cols);

}  // namespace pvr::kernels
