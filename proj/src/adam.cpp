#include "iss/adam.hpp"

#include <cmath>
#include <string>

#include "iss/errors.hpp"
#include "iss/kernels.hpp"

namespace iss {

void adam_step(AdamState& state, const ParamBlocks& params, const GradBlocks& grads) {
    if (params.size() != grads.size()) throw ConfigError("adam_step: block count mismatch");
    std::size_t total = 0;
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].size() != grads[b].size())
            throw ConfigError("adam_step: size mismatch in parameter block " + std::to_string(b));
        for (std::size_t i = 0; i < grads[b].size(); ++i) {
            if (!std::isfinite(grads[b][i]))
                throw NumericError("adam_step: non-finite gradient in parameter block " + std::to_string(b) +
                                   " at offset " + std::to_string(i));
        }
        total += params[b].size();
    }
    if (state.m.empty()) {
        state.m.assign(total, 0.0);
        state.v.assign(total, 0.0);
    } else if (state.m.size() != total) {
        throw ConfigError("adam_step: parameter layout changed between steps");
    }

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(state.cfg.beta2, t);
    const bool coupled = state.cfg.coupled_decay && state.cfg.weight_decay > 0.0;
    const double wd_factor = coupled ? 1.0 : 1.0 - state.cfg.lr * state.cfg.weight_decay;

    const auto& k = kern::active();
    std::size_t off = 0;
    std::vector<double> reg;
    for (std::size_t b = 0; b < params.size(); ++b) {
        const std::size_t n = params[b].size();
        const double* g = grads[b].data();
        if (coupled) {
            // L2 regularization folded into the gradient, so the decay passes
            // through the adaptive moments like any other loss term.
            reg.assign(params[b].begin(), params[b].end());
            k.scal(state.cfg.weight_decay, reg.data(), n);
            k.axpy(1.0, grads[b].data(), reg.data(), n);
            g = reg.data();
        }
        k.adam_update(params[b].data(), state.m.data() + off, state.v.data() + off, g, n, state.cfg.lr,
                      state.cfg.beta1, state.cfg.beta2, state.cfg.eps, bc1, bc2, wd_factor);
        off += n;
    }
}

}  // namespace iss
