#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "iss/la.hpp"

namespace iss {

enum class HiddenActivation { Tanh };
enum class OutputActivation { None, Relu };

/// Fully-connected network with Tanh hidden layers. Weight matrices are
/// row-major (fan_out x fan_in). `spectral_norm[l]` marks layers rescaled by
/// spectral_normalize; `power_vec[l]` is the persistent power-iteration
/// vector for layer l (unit norm).
struct Mlp {
    std::vector<std::size_t> widths;
    HiddenActivation hidden = HiddenActivation::Tanh;
    OutputActivation output = OutputActivation::None;
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    std::vector<char> spectral_norm;
    std::vector<Vector> power_vec;

    std::size_t in_dim() const { return widths.front(); }
    std::size_t out_dim() const { return widths.back(); }
    std::size_t n_layers() const { return weights.size(); }
};

/// Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero,
/// deterministic in `seed`. Hidden layers get the spectral-norm flag.
Mlp mlp_init(std::span<const std::size_t> widths, HiddenActivation hidden, OutputActivation output,
             std::uint64_t seed);

/// Recording of one forward pass: act[0] is the input, act[l+1] the
/// post-activation output of layer l.
struct MlpTape {
    const Mlp* net = nullptr;
    std::vector<Vector> act;
    bool consumed = false;
};

/// Forward pass over act[.]; returns the output (same values as act.back()).
Vector mlp_forward(const Mlp& net, std::span<const double> x, MlpTape& tape);
Vector mlp_forward(const Mlp& net, std::span<const double> x);

struct MlpGrads {
    std::vector<Matrix> w;
    std::vector<Vector> b;

    static MlpGrads like(const Mlp& net);
    void zero();
    void scale(double s);
    void add_scaled(const MlpGrads& other, double s);
    std::size_t n_params() const;
};

/// Single-shot reverse pass (consumes the tape). Returns d(upstream . y)/dx
/// and fills `grads` with fresh parameter derivatives.
Vector backprop(MlpTape& tape, std::span<const double> upstream, MlpGrads& grads);

/// Reverse pass that accumulates into `acc` (nullptr to skip parameter
/// gradients). Does not consume the tape; callers own the bookkeeping.
Vector mlp_backprop_acc(const MlpTape& tape, std::span<const double> upstream, MlpGrads* acc);

/// Forward pass carrying a tangent: records values and the directional
/// derivative of every activation along xdot.
struct MlpDualTape {
    const Mlp* net = nullptr;
    std::vector<Vector> act;   // post-activation values, act[0] = x
    std::vector<Vector> atan;  // post-activation tangents, atan[0] = xdot
    std::vector<Vector> ztan;  // pre-activation tangents per layer
    bool consumed = false;
};

struct DualOutput {
    Vector value;
    Vector tangent;  // J(x) xdot
};

DualOutput mlp_forward_dual(const Mlp& net, std::span<const double> x, std::span<const double> xdot,
                            MlpDualTape& tape);

/// Reverse pass through the dual computation: given adjoints of the output
/// value and output tangent, accumulates exact parameter derivatives of
/// val_adj . y + tan_adj . (J xdot) into `acc`.
void mlp_backprop_dual(const MlpDualTape& tape, std::span<const double> val_adj, std::span<const double> tan_adj,
                       MlpGrads* acc, Vector* x_adj = nullptr);

/// Divide every flagged layer by its estimated top singular value
/// (power iteration, persistent vectors). Layers with sigma below 1e-12
/// are left unchanged.
void spectral_normalize(Mlp& net, int n_power_iters);

/// Current power-iteration estimate of a layer's top singular value
/// (does not modify the stored vectors).
double spectral_norm_estimate(const Matrix& w, const Vector& u0, int n_power_iters);

}  // namespace iss
