// SPDX-License-Identifier: Apache-2.0
// AVX2 variants. This TU is the only one compiled with -mavx2 -mfma; nothing
// here may be called unless cpu_supports_avx2() said yes.
//
// Elementwise ops stick to vmulpd/vaddpd in the scalar loop order so they are
// bit-identical to the reference. The GEMMs and dot use FMA, which is why the
// dispatch contract only promises a tolerance for them.
#include <immintrin.h>

#include <cmath>

#include "crosssplit/kernels.hpp"

namespace crosssplit {
namespace {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
             const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
    std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            __m256d aip = _mm256_set1_pd(arow[p]);
            const double* brow = b + p * n;
            std::size_t j = 0;
            for (; j < n4; j += 4) {
                __m256d cv = _mm256_loadu_pd(crow + j);
                cv = _mm256_fmadd_pd(aip, _mm256_loadu_pd(brow + j), cv);
                _mm256_storeu_pd(crow + j, cv);
            }
            for (; j < n; ++j) crow[j] = std::fma(arow[p], brow[j], crow[j]);
        }
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k,
             const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
    std::size_t n4 = n & ~std::size_t(3);
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            __m256d api = _mm256_set1_pd(arow[i]);
            double* crow = c + i * n;
            std::size_t j = 0;
            for (; j < n4; j += 4) {
                __m256d cv = _mm256_loadu_pd(crow + j);
                cv = _mm256_fmadd_pd(api, _mm256_loadu_pd(brow + j), cv);
                _mm256_storeu_pd(crow + j, cv);
            }
            for (; j < n; ++j) crow[j] = std::fma(arow[i], brow[j], crow[j]);
        }
    }
}

double dot_avx(std::size_t n, const double* x, const double* y) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
    __m128d lo = _mm256_castpd256_pd128(acc);
    __m128d hi = _mm256_extractf128_pd(acc, 1);
    lo = _mm_add_pd(lo, hi);
    double s = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
    for (; i < n; ++i) s = std::fma(x[i], y[i], s);
    return s;
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
             const double* a, const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] = dot_avx(k, arow, b + j * k);
    }
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    __m256d av = _mm256_set1_pd(alpha);
    std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4) {
        // mul+add, not FMA: keeps bit parity with the reference loop.
        __m256d prod = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale(std::size_t n, double alpha, double* x) {
    __m256d av = _mm256_set1_pd(alpha);
    std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), av));
    for (; i < n; ++i) x[i] *= alpha;
}

void hadamard(std::size_t n, const double* x, const double* y, double* out) {
    std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4)
        _mm256_storeu_pd(out + i,
                         _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) out[i] = x[i] * y[i];
}

void relu_fwd(std::size_t n, const double* z, double* out) {
    // AND with the z>0 mask reproduces (z>0 ? z : +0.0) exactly, including the
    // sign bit of zero; max_pd would leak -0.0 through.
    __m256d zero = _mm256_setzero_pd();
    std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4) {
        __m256d zv = _mm256_loadu_pd(z + i);
        __m256d mask = _mm256_cmp_pd(zv, zero, _CMP_GT_OQ);
        _mm256_storeu_pd(out + i, _mm256_and_pd(zv, mask));
    }
    for (; i < n; ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void relu_bwd(std::size_t n, const double* z, double* g) {
    __m256d zero = _mm256_setzero_pd();
    std::size_t n4 = n & ~std::size_t(3);
    std::size_t i = 0;
    for (; i < n4; i += 4) {
        __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(z + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(g + i, _mm256_and_pd(_mm256_loadu_pd(g + i), mask));
    }
    for (; i < n; ++i)
        if (!(z[i] > 0.0)) g[i] = 0.0;
}

void add_bias(std::size_t rows, std::size_t cols, const double* bias, double* x) {
    std::size_t c4 = cols & ~std::size_t(3);
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = x + r * cols;
        std::size_t c = 0;
        for (; c < c4; c += 4)
            _mm256_storeu_pd(row + c, _mm256_add_pd(_mm256_loadu_pd(row + c),
                                                    _mm256_loadu_pd(bias + c)));
        for (; c < cols; ++c) row[c] += bias[c];
    }
}

void col_sums(std::size_t rows, std::size_t cols, const double* x, double* out) {
    for (std::size_t c = 0; c < cols; ++c) out[c] = 0.0;
    std::size_t c4 = cols & ~std::size_t(3);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = x + r * cols;
        std::size_t c = 0;
        for (; c < c4; c += 4)
            _mm256_storeu_pd(out + c, _mm256_add_pd(_mm256_loadu_pd(out + c),
                                                    _mm256_loadu_pd(row + c)));
        for (; c < cols; ++c) out[c] += row[c];
    }
}

}  // namespace

const KernelTable kAvx2Kernels = {
    "avx2",   gemm_nn, gemm_tn, gemm_nt, axpy,     scale,
    hadamard, relu_fwd, relu_bwd, add_bias, col_sums, dot_avx,
};

}  // namespace crosssplit
