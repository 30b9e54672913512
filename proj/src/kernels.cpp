#include "kernels.hpp"

#include <algorithm>
#include <cstring>

namespace pvr::kernels {

namespace {

// Register tiles of 4 rows x (8 * NV) columns held in GCC/Clang vector types.
// Every element is still a plain sequential sum over p with separate multiply
// and add, so the tiled and the scalar edge paths produce identical bits.
typedef double v8 __attribute__((vector_size(64)));

inline v8 load8(const double* p) {
  v8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store8(double* p, v8 v) { std::memcpy(p, &v, sizeof v); }

inline void add_store8(double* p, v8 v) { store8(p, load8(p) + v); }

constexpr std::size_t kRows = 4;

// acc[r][v] = sum over p < len of A(r, p) * B(p, 8v .. 8v+7), where A(r, p) is
// a[r * a_row + p * a_step] and B rows are n apart.
template <std::size_t NV>
struct Tile {
  v8 acc[kRows][NV] = {};

  void run(const double* a, std::size_t a_row, std::size_t a_step, const double* b,
           std::size_t n, std::size_t len) {
    for (std::size_t p = 0; p < len; ++p) {
      v8 bv[NV];
#pragma GCC unroll 4
      for (std::size_t v = 0; v < NV; ++v) bv[v] = load8(b + p * n + 8 * v);
      const double* ap = a + p * a_step;
#pragma GCC unroll 4
      for (std::size_t r = 0; r < kRows; ++r) {
        const double x = ap[r * a_row];
#pragma GCC unroll 4
        for (std::size_t v = 0; v < NV; ++v) acc[r][v] += x * bv[v];
      }
    }
  }

  template <bool kAccumulate>
  void put(double* c, std::size_t n) const {
#pragma GCC unroll 4
    for (std::size_t r = 0; r < kRows; ++r) {
#pragma GCC unroll 4
      for (std::size_t v = 0; v < NV; ++v) {
        if constexpr (kAccumulate) {
          add_store8(c + r * n + 8 * v, acc[r][v]);
        } else {
          store8(c + r * n + 8 * v, acc[r][v]);
        }
      }
    }
  }
};

// Runs the widest tiles that fit across columns [0, n) of a 4-row band and
// returns the first column left for the scalar path.
template <bool kAccumulate>
std::size_t tile_band(const double* a, std::size_t a_row, std::size_t a_step, const double* b,
                      double* c, std::size_t n, std::size_t len) {
  std::size_t j0 = 0;
  for (; j0 + 32 <= n; j0 += 32) {
    Tile<4> t;
    t.run(a, a_row, a_step, b + j0, n, len);
    t.template put<kAccumulate>(c + j0, n);
  }
  for (; j0 + 16 <= n; j0 += 16) {
    Tile<2> t;
    t.run(a, a_row, a_step, b + j0, n, len);
    t.template put<kAccumulate>(c + j0, n);
  }
  for (; j0 + 8 <= n; j0 += 8) {
    Tile<1> t;
    t.run(a, a_row, a_step, b + j0, n, len);
    t.template put<kAccumulate>(c + j0, n);
  }
  return j0;
}

template <bool kAccumulate>
void gemm_impl(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
  const std::size_t m_full = m - m % kRows;
  std::size_t n_tiled = n;
  for (std::size_t i0 = 0; i0 < m_full; i0 += kRows) {
    n_tiled = tile_band<kAccumulate>(a + i0 * k, k, 1, b, c + i0 * n, n, k);
  }
  if (m_full == 0) n_tiled = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i < m_full ? n_tiled : 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = kAccumulate ? c[i * n + j] + acc : acc;
    }
  }
}

}  // namespace

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n) {
  gemm_impl<false>(a, b, c, m, k, n);
}

void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
  gemm_impl<true>(a, b, c, m, k, n);
}

void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
  const std::size_t k_full = k - k % kRows;
  // Rows of A and B are consumed in chunks that stay cache resident; the
  // partial sums of each chunk are added to C in chunk order.
  constexpr std::size_t kChunk = 128;
  for (std::size_t p0 = 0; p0 < m; p0 += kChunk) {
    const std::size_t len = std::min(m, p0 + kChunk) - p0;
    const double* ac = a + p0 * k;
    const double* bc = b + p0 * n;
    std::size_t n_tiled = 0;
    for (std::size_t i0 = 0; i0 < k_full; i0 += kRows) {
      n_tiled = tile_band<true>(ac + i0, 1, k, bc, c + i0 * n, n, len);
    }
    // Leftover rows of C (k = 3 for raw points), one vector column at a time.
    for (std::size_t i = k_full; i < k; ++i) {
      std::size_t j0 = 0;
      for (; j0 + 8 <= n; j0 += 8) {
        v8 acc = {};
        for (std::size_t p = 0; p < len; ++p) acc += ac[p * k + i] * load8(bc + p * n + j0);
        add_store8(c + i * n + j0, acc);
      }
      for (std::size_t j = j0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < len; ++p) acc += ac[p * k + i] * bc[p * n + j];
        c[i * n + j] += acc;
      }
    }
    for (std::size_t i = 0; i < k_full; ++i) {
      for (std::size_t j = n_tiled; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < len; ++p) acc += ac[p * k + i] * bc[p * n + j];
        c[i * n + j] += acc;
      }
    }
  }
}

void transpose(const double* src, double* dst, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
}

}  // namespace pvr::kernels
