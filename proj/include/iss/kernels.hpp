#pragma once

#include <cstddef>

namespace iss::kern {

/// Double-precision inner-loop kernels. Every operation has a scalar
/// reference implementation and, on x86-64 with AVX2+FMA, a vectorized
/// variant selected at runtime. The two are equivalence-tested; results may
/// differ in the last bits because FMA and lane reduction reorder sums.
struct Kernels {
    const char* name;

    // out = sum_i x[i] * y[i]
    double (*dot)(const double* x, const double* y, std::size_t n);
    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // x[i] *= a
    void (*scal)(double a, double* x, std::size_t n);
    // y = W x          (W row-major rows x cols, x len cols, y len rows)
    void (*matvec)(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols);
    // y = W x + b
    void (*affine)(const double* w, const double* x, const double* b, double* y, std::size_t rows, std::size_t cols);
    // y = W^T v        (v len rows, y len cols)
    void (*matvec_t)(const double* w, const double* v, double* y, std::size_t rows, std::size_t cols);
    // A += u v^T       (u len rows, v len cols)
    void (*outer_acc)(const double* u, const double* v, double* a, std::size_t rows, std::size_t cols);
    // Fused Adam update over one parameter block:
    //   p *= wd_factor
    //   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g^2
    //   p -= lr * (m / bc1) / (sqrt(v / bc2) + eps)
    void (*adam_update)(double* p, double* m, double* v, const double* g, std::size_t n, double lr, double b1,
                        double b2, double eps, double bc1, double bc2, double wd_factor);
};

const Kernels& scalar_kernels();
/// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const Kernels* avx2_kernels();

/// Runtime-selected implementation. Honors ISS_KERNELS=scalar|avx2.
const Kernels& active();

/// Test hook: override the active implementation for the current process.
void force(const Kernels& k);

}  // namespace iss::kern
