// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace crosssplit {

// Flat table of the hot numeric loops. Two implementations exist: a scalar
// reference (the semantic ground truth, built with -ffp-contract=off) and an
// AVX2+FMA variant picked at runtime when the CPU supports it.
//
// Elementwise ops (axpy/scale/hadamard/relu/add_bias/col_sums) are required to
// be bit-identical to the scalar reference: same operation order, no FMA.
// The GEMMs and dot use FMA and wider accumulators, so they only promise a
// tight tolerance against scalar.
struct KernelTable {
    const char* name;

    // C(MxN) = A(MxK) * B(KxN); C is overwritten.
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c);
    // C(MxN) = A^T * B where A is stored KxM, B is KxN; C overwritten.
    void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c);
    // C(MxN) = A * B^T where A is MxK, B is stored NxK; C overwritten.
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, const double* b, double* c);

    // y += alpha * x
    void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
    // x *= alpha
    void (*scale)(std::size_t n, double alpha, double* x);
    // out = x ⊙ y
    void (*hadamard)(std::size_t n, const double* x, const double* y, double* out);
    // out[i] = z[i] > 0 ? z[i] : 0
    void (*relu_fwd)(std::size_t n, const double* z, double* out);
    // g[i] = z[i] > 0 ? g[i] : 0   (in place)
    void (*relu_bwd)(std::size_t n, const double* z, double* g);
    // X[r, c] += bias[c] for every row r
    void (*add_bias)(std::size_t rows, std::size_t cols, const double* bias, double* x);
    // out[c] = sum over rows of X[r, c]
    void (*col_sums)(std::size_t rows, std::size_t cols, const double* x, double* out);
    double (*dot)(std::size_t n, const double* x, const double* y);
};

extern const KernelTable kScalarKernels;
extern const KernelTable kAvx2Kernels;

bool cpu_supports_avx2();

// Active table. First call resolves "auto": CROSSSPLIT_KERNELS env var if set,
// else AVX2 when available, else scalar.
const KernelTable& kernels();

// Force a backend by name ("scalar", "avx2", "auto"). Throws ConfigError for
// unknown names or an unsupported CPU.
void select_kernels(std::string_view name);

std::vector<std::string> available_kernels();

}  // namespace crosssplit
