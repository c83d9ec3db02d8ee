#pragma once

#include "iss/la.hpp"

namespace iss {

struct CareResult {
    Matrix p;         // stabilizing solution
    Matrix k;         // gain R^-1 B^T P
    double residual;  // Frobenius norm of A^T P + P A - P B R^-1 B^T P + Q
    int iterations;
};

/// Continuous algebraic Riccati equation via the matrix sign function of the
/// Hamiltonian (Newton iteration with determinant scaling). Requires (A, B)
/// stabilizable and Q >= 0, R > 0; throws NumericError when the iteration
/// stalls or the Hamiltonian has imaginary-axis eigenvalues.
CareResult care_solve(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& r, int max_iters = 120,
                      double tol = 1e-12);

/// True when the matrix is Hurwitz (tested with a Lyapunov solve).
bool is_hurwitz(const Matrix& m);

}  // namespace iss
