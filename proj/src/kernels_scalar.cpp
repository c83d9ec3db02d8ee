#include "iss/kernels.hpp"

#include <cmath>

namespace iss::kern {

namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scal_scalar(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void matvec_scalar(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(w + r * cols, x, cols);
}

void affine_scalar(const double* w, const double* x, const double* b, double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = b[r] + dot_scalar(w + r * cols, x, cols);
}

void matvec_t_scalar(const double* w, const double* v, double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) axpy_scalar(v[r], w + r * cols, y, cols);
}

void outer_acc_scalar(const double* u, const double* v, double* a, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) axpy_scalar(u[r], v, a + r * cols, cols);
}

void adam_update_scalar(double* p, double* m, double* v, const double* g, std::size_t n, double lr, double b1,
                        double b2, double eps, double bc1, double bc2, double wd_factor) {
    for (std::size_t i = 0; i < n; ++i) {
        p[i] *= wd_factor;
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

}  // namespace

const Kernels& scalar_kernels() {
    static const Kernels k = {
        "scalar",       dot_scalar,       axpy_scalar,      scal_scalar,
        matvec_scalar,  affine_scalar,    matvec_t_scalar,  outer_acc_scalar,
        adam_update_scalar,
    };
    return k;
}

}  // namespace iss::kern
