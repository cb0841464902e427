// SPDX-License-Identifier: Apache-2.0
#include "crosssplit/matrix.hpp"

#include <cmath>
#include <cstring>

#include "crosssplit/errors.hpp"
#include "crosssplit/kernels.hpp"

namespace crosssplit {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw ContractError("matmul: inner dimensions disagree");
    Matrix c(a.rows, b.cols);
    kernels().gemm_nn(a.rows, b.cols, a.cols, a.data.data(), b.data.data(), c.data.data());
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows) throw ContractError("matmul_tn: row counts disagree");
    Matrix c(a.cols, b.cols);
    kernels().gemm_tn(a.cols, b.cols, a.rows, a.data.data(), b.data.data(), c.data.data());
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols) throw ContractError("matmul_nt: column counts disagree");
    Matrix c(a.rows, b.rows);
    kernels().gemm_nt(a.rows, b.rows, a.cols, a.data.data(), b.data.data(), c.data.data());
    return c;
}

void add_bias_rows(Matrix& x, const std::vector<double>& bias) {
    if (bias.size() != x.cols) throw ContractError("add_bias_rows: bias length mismatch");
    kernels().add_bias(x.rows, x.cols, bias.data(), x.data.data());
}

std::vector<double> column_sums(const Matrix& x) {
    std::vector<double> out(x.cols, 0.0);
    kernels().col_sums(x.rows, x.cols, x.data.data(), out.data());
    return out;
}

Matrix relu(const Matrix& z) {
    Matrix out(z.rows, z.cols);
    kernels().relu_fwd(z.size(), z.data.data(), out.data.data());
    return out;
}

void relu_mask_inplace(const Matrix& z, Matrix& g) {
    if (!z.same_shape(g)) throw ContractError("relu_mask_inplace: shape mismatch");
    kernels().relu_bwd(z.size(), z.data.data(), g.data.data());
}

void axpy_into(double alpha, const Matrix& x, Matrix& y) {
    if (!x.same_shape(y)) throw ContractError("axpy_into: shape mismatch");
    kernels().axpy(x.size(), alpha, x.data.data(), y.data.data());
}

void scale_inplace(Matrix& x, double alpha) {
    kernels().scale(x.size(), alpha, x.data.data());
}

double dot(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ContractError("dot: length mismatch");
    return kernels().dot(x.size(), x.data(), y.data());
}

Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), src.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= src.rows) throw ContractError("gather_rows: index out of range");
        std::memcpy(out.row(i), src.row(idx[i]), src.cols * sizeof(double));
    }
    return out;
}

bool all_finite(const Matrix& m) {
    for (double v : m.data)
        if (!std::isfinite(v)) return false;
    return true;
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace crosssplit
