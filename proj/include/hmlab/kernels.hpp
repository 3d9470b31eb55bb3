// kernels.hpp — cache-blocked dense kernels behind the streaming paths:
// the weighted symmetric rank-b update C += A^T diag(w) A that accumulates
// the spectral matrix, and a general C += A B^T panel product for feature
// maps. Register tiling is 4x8 with fixed-trip inner loops so the compiler
// can keep the accumulator tile in vector registers.
#pragma once

#include <cstddef>
#include <vector>

#include "hmlab/core.hpp"

namespace hmlab::kernels {

namespace detail {

// rows x 8-wide accumulation over the panel strip [i0, i1).
// a columns jt.., b columns kt.. of the two row-major panels.
template <int MJ, int MK>
inline void tile_accumulate(const double* a, const double* bw, std::size_t lda,
                            std::size_t i1, std::size_t jt, std::size_t kt,
                            double* c, std::size_t ldc) {
    double acc[MJ][MK] = {};
    for (std::size_t i = 0; i < i1; ++i) {
        const double* ar = a + i * lda + jt;
        const double* br = bw + i * lda + kt;
        for (int jj = 0; jj < MJ; ++jj) {
            const double av = ar[jj];
            for (int kk = 0; kk < MK; ++kk) acc[jj][kk] += av * br[kk];
        }
    }
    for (int jj = 0; jj < MJ; ++jj)
        for (int kk = 0; kk < MK; ++kk) c[(jt + jj) * ldc + kt + kk] += acc[jj][kk];
}

inline void tile_accumulate_var(const double* a, const double* bw, std::size_t lda,
                                std::size_t i1, std::size_t jt, std::size_t mj,
                                std::size_t kt, std::size_t mk, double* c,
                                std::size_t ldc) {
    double acc[4][8] = {};
    for (std::size_t i = 0; i < i1; ++i) {
        const double* ar = a + i * lda + jt;
        const double* br = bw + i * lda + kt;
        for (std::size_t jj = 0; jj < mj; ++jj) {
            const double av = ar[jj];
            for (std::size_t kk = 0; kk < mk; ++kk) acc[jj][kk] += av * br[kk];
        }
    }
    for (std::size_t jj = 0; jj < mj; ++jj)
        for (std::size_t kk = 0; kk < mk; ++kk)
            c[(jt + jj) * ldc + kt + kk] += acc[jj][kk];
}

} // namespace detail

// C (d x d, row-major) += A^T diag(w) A for a row panel A (rows x d).
// Only tiles on or above the diagonal are touched; callers mirror once at
// the end. `scratch` holds the row-scaled copy of the panel.
inline void sym_rank_update(double* c, std::size_t d, const double* a,
                            const double* w, std::size_t rows,
                            std::vector<double>& scratch) {
    constexpr std::size_t kStrip = 128; // rows per L2-resident strip
    scratch.resize(kStrip * d);

    for (std::size_t i0 = 0; i0 < rows; i0 += kStrip) {
        const std::size_t ib = std::min(kStrip, rows - i0);
        const double* ap = a + i0 * d;
        for (std::size_t i = 0; i < ib; ++i) {
            const double wi = w[i0 + i];
            const double* src = ap + i * d;
            double* dst = scratch.data() + i * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] = wi * src[j];
        }
        for (std::size_t jt = 0; jt < d; jt += 4) {
            const std::size_t mj = std::min<std::size_t>(4, d - jt);
            for (std::size_t kt = jt; kt < d; kt += 8) {
                const std::size_t mk = std::min<std::size_t>(8, d - kt);
                if (mj == 4 && mk == 8)
                    detail::tile_accumulate<4, 8>(ap, scratch.data(), d, ib, jt, kt,
                                                  c, d);
                else
                    detail::tile_accumulate_var(ap, scratch.data(), d, ib, jt, mj, kt,
                                                mk, c, d);
            }
        }
    }
}

inline void mirror_upper_to_lower(double* c, std::size_t d) {
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = j + 1; k < d; ++k) c[k * d + j] = c[j * d + k];
}

// C (m x n, row-major) += A B^T with A (m x k), B (n x k) row-major.
inline void gemm_abt(double* c, const double* a, const double* b, std::size_t m,
                     std::size_t n, std::size_t k) {
    constexpr std::size_t kStripK = 256;
    for (std::size_t k0 = 0; k0 < k; k0 += kStripK) {
        const std::size_t kb = std::min(kStripK, k - k0);
        for (std::size_t i = 0; i < m; ++i) {
            const double* ai = a + i * k + k0;
            double* ci = c + i * n;
            std::size_t j = 0;
            const std::size_t n4 = n - n % 4;
            for (; j < n4; j += 4) {
                const double* b0 = b + (j + 0) * k + k0;
                const double* b1 = b + (j + 1) * k + k0;
                const double* b2 = b + (j + 2) * k + k0;
                const double* b3 = b + (j + 3) * k + k0;
                double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
                for (std::size_t t = 0; t < kb; ++t) {
                    const double av = ai[t];
                    s0 += av * b0[t];
                    s1 += av * b1[t];
                    s2 += av * b2[t];
                    s3 += av * b3[t];
                }
                ci[j] += s0;
                ci[j + 1] += s1;
                ci[j + 2] += s2;
                ci[j + 3] += s3;
            }
            for (; j < n; ++j) {
                const double* bj = b + j * k + k0;
                double s = 0.0;
                for (std::size_t t = 0; t < kb; ++t) s += ai[t] * bj[t];
                ci[j] += s;
            }
        }
    }
}

} // namespace hmlab::kernels
