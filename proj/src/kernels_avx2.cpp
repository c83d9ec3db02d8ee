// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma on x86-64; callers must check avx2_kernels() != nullptr,
// which verifies CPU support at runtime before handing these out.

#include "iss/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>

namespace iss::kern {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += x[i] * y[i];
    return hsum(acc) + tail;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scal_avx2(double a, double* x, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) x[i] *= a;
}

void matvec_avx2(const double* w, const double* x, double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot_avx2(w + r * cols, x, cols);
}

void affine_avx2(const double* w, const double* x, const double* b, double* y, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = b[r] + dot_avx2(w + r * cols, x, cols);
}

void matvec_t_avx2(const double* w, const double* v, double* y, std::size_t rows, std::size_t cols) {
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) _mm256_storeu_pd(y + c, _mm256_setzero_pd());
    for (; c < cols; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(v[r], w + r * cols, y, cols);
}

void outer_acc_avx2(const double* u, const double* v, double* a, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(u[r], v, a + r * cols, cols);
}

void adam_update_avx2(double* p, double* m, double* v, const double* g, std::size_t n, double lr, double b1, double b2,
                      double eps, double bc1, double bc2, double wd_factor) {
    const __m256d b1v = _mm256_set1_pd(b1);
    const __m256d nb1v = _mm256_set1_pd(1.0 - b1);
    const __m256d b2v = _mm256_set1_pd(b2);
    const __m256d nb2v = _mm256_set1_pd(1.0 - b2);
    const __m256d lrv = _mm256_set1_pd(lr);
    const __m256d epsv = _mm256_set1_pd(eps);
    const __m256d inv_bc1 = _mm256_set1_pd(1.0 / bc1);
    const __m256d inv_bc2 = _mm256_set1_pd(1.0 / bc2);
    const __m256d wdv = _mm256_set1_pd(wd_factor);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d gv = _mm256_loadu_pd(g + i);
        __m256d pv = _mm256_mul_pd(_mm256_loadu_pd(p + i), wdv);
        __m256d mv = _mm256_fmadd_pd(b1v, _mm256_loadu_pd(m + i), _mm256_mul_pd(nb1v, gv));
        __m256d vv = _mm256_fmadd_pd(b2v, _mm256_loadu_pd(v + i), _mm256_mul_pd(nb2v, _mm256_mul_pd(gv, gv)));
        _mm256_storeu_pd(m + i, mv);
        _mm256_storeu_pd(v + i, vv);
        __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vv, inv_bc2)), epsv);
        __m256d step = _mm256_div_pd(_mm256_mul_pd(lrv, _mm256_mul_pd(mv, inv_bc1)), denom);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(pv, step));
    }
    for (; i < n; ++i) {
        p[i] *= wd_factor;
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

}  // namespace

const Kernels* avx2_kernels() {
    static const Kernels k = {
        "avx2",      dot_avx2,     axpy_avx2,      scal_avx2,
        matvec_avx2, affine_avx2,  matvec_t_avx2,  outer_acc_avx2,
        adam_update_avx2,
    };
    static const bool ok = cpu_has_avx2_fma();
    return ok ? &k : nullptr;
}

}  // namespace iss::kern

#else  // no AVX2 at compile time

namespace iss::kern {
const Kernels* avx2_kernels() { return nullptr; }
}  // namespace iss::kern

#endif
