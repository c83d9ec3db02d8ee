#include "iss/la.hpp"

#include <algorithm>
#include <cmath>

#include "iss/errors.hpp"

namespace iss {

bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw ConfigError("matmul: shape mismatch");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw ConfigError("add: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw ConfigError("sub: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

Matrix scaled(const Matrix& a, double s) {
    Matrix c = a;
    for (double& v : c.data) v *= s;
    return c;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols != x.size()) throw ConfigError("matvec: shape mismatch");
    Vector y(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) acc += a(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

double frobenius_norm(const Matrix& a) {
    double acc = 0.0;
    for (double v : a.data) acc += v * v;
    return std::sqrt(acc);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

bool all_finite(const Matrix& a) { return all_finite(std::span<const double>(a.data)); }

namespace {

// In-place LU with partial pivoting. Returns permutation sign, fills perm.
// Throws on a pivot below tol * max|entry|.
void lu_factor(Matrix& a, std::vector<std::size_t>& perm) {
    const std::size_t n = a.rows;
    if (a.cols != n) throw ConfigError("lu_factor: matrix not square");
    perm.resize(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    double scale = 0.0;
    for (double v : a.data) scale = std::max(scale, std::fabs(v));
    const double tol = 1e-300 + scale * 1e-14;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::fabs(a(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::fabs(a(i, k)) > best) {
                best = std::fabs(a(i, k));
                piv = i;
            }
        }
        if (best < tol) throw NumericError("lu_factor: singular matrix");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            std::swap(perm[k], perm[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            a(i, k) /= a(k, k);
            const double lik = a(i, k);
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= lik * a(k, j);
        }
    }
}

Vector lu_apply(const Matrix& lu, const std::vector<std::size_t>& perm, std::span<const double> b) {
    const std::size_t n = lu.rows;
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm[i]];
    for (std::size_t i = 1; i < n; ++i) {
        double acc = x[i];
        for (std::size_t j = 0; j < i; ++j) acc -= lu(i, j) * x[j];
        x[i] = acc;
    }
    for (std::size_t i = n; i-- > 0;) {
        double acc = x[i];
        for (std::size_t j = i + 1; j < n; ++j) acc -= lu(i, j) * x[j];
        x[i] = acc / lu(i, i);
    }
    return x;
}

}  // namespace

Vector lu_solve(Matrix a, Vector b) {
    if (a.rows != b.size()) throw ConfigError("lu_solve: shape mismatch");
    std::vector<std::size_t> perm;
    lu_factor(a, perm);
    return lu_apply(a, perm, b);
}

Matrix inverse(const Matrix& a) {
    const std::size_t n = a.rows;
    Matrix lu = a;
    std::vector<std::size_t> perm;
    lu_factor(lu, perm);
    Matrix inv(n, n);
    Vector e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e.assign(n, 0.0);
        e[j] = 1.0;
        Vector col = lu_apply(lu, perm, e);
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    }
    return inv;
}

double abs_det(const Matrix& a) {
    Matrix lu = a;
    std::vector<std::size_t> perm;
    try {
        lu_factor(lu, perm);
    } catch (const NumericError&) {
        return 0.0;
    }
    double d = 1.0;
    for (std::size_t i = 0; i < lu.rows; ++i) d *= std::fabs(lu(i, i));
    return d;
}

bool is_positive_definite(const Matrix& a) {
    const std::size_t n = a.rows;
    if (a.cols != n) return false;
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double acc = a(i, j);
            for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
            if (i == j) {
                if (acc <= 0.0 || !std::isfinite(acc)) return false;
                l(i, i) = std::sqrt(acc);
            } else {
                l(i, j) = acc / l(j, j);
            }
        }
    }
    return true;
}

}  // namespace iss
