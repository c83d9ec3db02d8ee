#pragma once

#include <span>
#include <vector>

namespace iss {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    /// Coupled: decay enters the gradient (classic Adam L2) and is shaped by
    /// the adaptive moments; off: decoupled p *= (1 - lr*wd) before the delta.
    bool coupled_decay = false;
};

/// Bias-corrected Adam with decoupled weight decay over a list of parameter
/// blocks. Moments are laid out flat in block order and sized on first use;
/// they are zero while step_count == 0.
struct AdamState {
    AdamConfig cfg;
    long step_count = 0;
    std::vector<double> m;
    std::vector<double> v;
};

using ParamBlocks = std::vector<std::span<double>>;
using GradBlocks = std::vector<std::span<const double>>;

/// One update step. Throws NumericError naming the offending block when a
/// gradient entry is non-finite.
void adam_step(AdamState& state, const ParamBlocks& params, const GradBlocks& grads);

}  // namespace iss
