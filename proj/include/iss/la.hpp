#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace iss {

using Vector = std::vector<double>;

/// Dense row-major matrix. Small sizes only (network layers, Riccati blocks).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    bool empty() const { return data.empty(); }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

bool operator==(const Matrix& a, const Matrix& b);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& a, double s);
Vector matvec(const Matrix& a, std::span<const double> x);
double frobenius_norm(const Matrix& a);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
bool all_finite(std::span<const double> a);
bool all_finite(const Matrix& a);

/// LU solve with partial pivoting; throws on (near-)singular systems.
Vector lu_solve(Matrix a, Vector b);
Matrix inverse(const Matrix& a);
/// Absolute value of det(a), via LU.
double abs_det(const Matrix& a);
/// Cholesky test for symmetric positive definiteness.
bool is_positive_definite(const Matrix& a);

}  // namespace iss
