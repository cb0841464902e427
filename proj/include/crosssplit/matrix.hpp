// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

namespace crosssplit {

// Dense row-major matrix of doubles. Rows are examples, columns are features
// (or units) everywhere in this codebase.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// Kernel-backed operations. Shape mismatches throw ContractError.
Matrix matmul(const Matrix& a, const Matrix& b);      // a * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);   // a^T * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);   // a * b^T
void add_bias_rows(Matrix& x, const std::vector<double>& bias);
std::vector<double> column_sums(const Matrix& x);
Matrix relu(const Matrix& z);
void relu_mask_inplace(const Matrix& z, Matrix& g);   // g = g where z>0 else 0
void axpy_into(double alpha, const Matrix& x, Matrix& y);  // y += alpha x
void scale_inplace(Matrix& x, double alpha);
double dot(const std::vector<double>& x, const std::vector<double>& y);

// Row gather: out[i] = src[idx[i]].
Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx);

bool all_finite(const Matrix& m);
bool all_finite(const std::vector<double>& v);

}  // namespace crosssplit
