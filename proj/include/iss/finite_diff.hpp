#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "iss/errors.hpp"
#include "iss/la.hpp"

namespace iss {

/// Central-difference gradient: (f(x + h e_j) - f(x - h e_j)) / (2h).
/// Independent of every reverse-mode path; used as the gradient oracle.
template <class F>
Vector finite_diff_grad(F&& f, std::span<const double> x, double h) {
    if (h <= 0.0) throw ConfigError("finite_diff_grad: h must be positive");
    Vector grad(x.size());
    Vector probe(x.begin(), x.end());
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double orig = probe[j];
        probe[j] = orig + h;
        const double fp = f(std::span<const double>(probe));
        probe[j] = orig - h;
        const double fm = f(std::span<const double>(probe));
        probe[j] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("finite_diff_grad: non-finite function value");
        grad[j] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

}  // namespace iss
