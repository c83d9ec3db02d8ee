#include "iss/riccati.hpp"

#include <cmath>

#include "iss/errors.hpp"

namespace iss {

namespace {

Matrix hamiltonian(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r) {
    const std::size_t n = a.rows;
    const Matrix g = matmul(matmul(b, inverse(r)), transpose(b));
    Matrix h(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            h(i, j) = a(i, j);
            h(i, n + j) = -g(i, j);
            h(n + i, j) = -q(i, j);
            h(n + i, n + j) = -a(j, i);
        }
    }
    return h;
}

/// Least-squares solve of [M12; M22] P = -[M11; M21] column by column.
Matrix stable_subspace_solution(const Matrix& m, std::size_t n) {
    Matrix lhs(2 * n, n);
    Matrix rhs(2 * n, n);
    for (std::size_t i = 0; i < 2 * n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            lhs(i, j) = m(i, n + j);
            rhs(i, j) = -m(i, j);
        }
    }
    const Matrix lhs_t = transpose(lhs);
    const Matrix normal = matmul(lhs_t, lhs);
    const Matrix nrhs = matmul(lhs_t, rhs);
    Matrix p(n, n);
    Vector col(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = nrhs(i, j);
        const Vector x = lu_solve(normal, col);
        for (std::size_t i = 0; i < n; ++i) p(i, j) = x[i];
    }
    // Symmetrize: the exact solution is symmetric.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double avg = 0.5 * (p(i, j) + p(j, i));
            p(i, j) = avg;
            p(j, i) = avg;
        }
    return p;
}

}  // namespace

CareResult care_solve(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r, int max_iters, double tol) {
    const std::size_t n = a.rows;
    if (a.cols != n || b.rows != n || q.rows != n || q.cols != n || r.rows != b.cols || r.cols != b.cols)
        throw ConfigError("care_solve: inconsistent shapes");

    Matrix s = hamiltonian(a, b, q, r);
    int iters = 0;
    bool converged = false;
    for (; iters < max_iters; ++iters) {
        const double det = abs_det(s);
        if (det <= 0.0 || !std::isfinite(det))
            throw NumericError("care_solve: Hamiltonian sign iteration became singular (pair not stabilizable?)");
        const double mu = std::pow(det, 1.0 / static_cast<double>(2 * n));
        Matrix s_inv;
        try {
            s_inv = inverse(s);
        } catch (const NumericError&) {
            throw NumericError("care_solve: Hamiltonian sign iteration became singular (pair not stabilizable?)");
        }
        Matrix next(2 * n, 2 * n);
        for (std::size_t i = 0; i < next.data.size(); ++i)
            next.data[i] = 0.5 * (s.data[i] / mu + mu * s_inv.data[i]);
        const double delta = frobenius_norm(sub(next, s));
        const double scale = frobenius_norm(s);
        s = std::move(next);
        if (delta <= tol * (1.0 + scale)) {
            converged = true;
            break;
        }
    }
    if (!converged) throw NumericError("care_solve: sign iteration did not converge (residual plateau)");

    // Stable invariant subspace of the sign: null space of S + I.
    Matrix m = s;
    for (std::size_t i = 0; i < 2 * n; ++i) m(i, i) += 1.0;

    CareResult result;
    result.p = stable_subspace_solution(m, n);
    result.k = matmul(matmul(inverse(r), transpose(b)), result.p);
    const Matrix at_p = matmul(transpose(a), result.p);
    const Matrix p_a = matmul(result.p, a);
    const Matrix pbk = matmul(matmul(result.p, b), result.k);
    Matrix res = add(at_p, p_a);
    res = sub(res, pbk);
    res = add(res, q);
    result.residual = frobenius_norm(res);
    result.iterations = iters + 1;
    if (!std::isfinite(result.residual) || result.residual > 1e-6)
        throw NumericError("care_solve: residual too large; pair may not be stabilizable");
    return result;
}

bool is_hurwitz(const Matrix& m) {
    const std::size_t n = m.rows;
    if (m.cols != n) return false;
    // Solve M^T X + X M = -I via the Kronecker system; Hurwitz iff X > 0.
    const std::size_t nn = n * n;
    Matrix sys(nn, nn);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t k = 0; k < n; ++k) {
                // d/dX_{kj}: M^T X term -> M(k,i) X(k,j)
                sys(i * n + j, k * n + j) += m(k, i);
                // X M term -> X(i,k) M(k,j)
                sys(i * n + j, i * n + k) += m(k, j);
            }
        }
    }
    Vector rhs(nn, 0.0);
    for (std::size_t i = 0; i < n; ++i) rhs[i * n + i] = -1.0;
    Vector xv;
    try {
        xv = lu_solve(sys, rhs);
    } catch (const NumericError&) {
        return false;
    }
    Matrix x(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) x(i, j) = 0.5 * (xv[i * n + j] + xv[j * n + i]);
    return is_positive_definite(x);
}

}  // namespace iss
