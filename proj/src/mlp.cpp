#include "iss/mlp.hpp"

#include <cmath>
#include <string>

#include "iss/errors.hpp"
#include "iss/kernels.hpp"
#include "iss/rng.hpp"

namespace iss {

namespace {

void check_input(const Mlp& net, std::span<const double> x) {
    if (x.size() != net.in_dim())
        throw ConfigError("mlp_forward: input length " + std::to_string(x.size()) + " != " +
                          std::to_string(net.in_dim()));
    if (!all_finite(x)) throw NumericError("mlp_forward: non-finite input");
}

}  // namespace

Mlp mlp_init(std::span<const std::size_t> widths, HiddenActivation hidden, OutputActivation output,
             std::uint64_t seed) {
    if (widths.size() < 2) throw ConfigError("mlp_init: need at least input and output widths");
    for (std::size_t w : widths)
        if (w < 1) throw ConfigError("mlp_init: zero layer width");

    Mlp net;
    net.widths.assign(widths.begin(), widths.end());
    net.hidden = hidden;
    net.output = output;
    const std::size_t n_layers = widths.size() - 1;
    Rng rng(derive_seed(seed, stream::weight_init));
    for (std::size_t l = 0; l < n_layers; ++l) {
        const std::size_t fan_in = widths[l];
        const std::size_t fan_out = widths[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Matrix w(fan_out, fan_in);
        for (double& v : w.data) v = rng.uniform(-bound, bound);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(fan_out, 0.0);
        net.spectral_norm.push_back(l + 1 < n_layers ? 1 : 0);
        Vector u(fan_out);
        for (double& v : u) v = rng.uniform(-1.0, 1.0);
        const double nrm = norm2(u);
        for (double& v : u) v /= (nrm > 0.0 ? nrm : 1.0);
        net.power_vec.push_back(std::move(u));
    }
    return net;
}

Vector mlp_forward(const Mlp& net, std::span<const double> x, MlpTape& tape) {
    check_input(net, x);
    const auto& k = kern::active();
    tape.net = &net;
    tape.consumed = false;
    tape.act.resize(net.n_layers() + 1);
    tape.act[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
        const Matrix& w = net.weights[l];
        Vector& out = tape.act[l + 1];
        out.resize(w.rows);
        k.affine(w.data.data(), tape.act[l].data(), net.biases[l].data(), out.data(), w.rows, w.cols);
        if (l + 1 < net.n_layers()) {
            for (double& v : out) v = std::tanh(v);
        } else if (net.output == OutputActivation::Relu) {
            for (double& v : out) v = v > 0.0 ? v : 0.0;
        }
    }
    return tape.act.back();
}

Vector mlp_forward(const Mlp& net, std::span<const double> x) {
    MlpTape tape;
    return mlp_forward(net, x, tape);
}

MlpGrads MlpGrads::like(const Mlp& net) {
    MlpGrads g;
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
        g.w.emplace_back(net.weights[l].rows, net.weights[l].cols);
        g.b.emplace_back(net.biases[l].size(), 0.0);
    }
    return g;
}

void MlpGrads::zero() {
    for (Matrix& m : w) m.data.assign(m.data.size(), 0.0);
    for (Vector& v : b) v.assign(v.size(), 0.0);
}

void MlpGrads::scale(double s) {
    for (Matrix& m : w)
        for (double& v : m.data) v *= s;
    for (Vector& vec : b)
        for (double& v : vec) v *= s;
}

void MlpGrads::add_scaled(const MlpGrads& other, double s) {
    for (std::size_t l = 0; l < w.size(); ++l) {
        for (std::size_t i = 0; i < w[l].data.size(); ++i) w[l].data[i] += s * other.w[l].data[i];
        for (std::size_t i = 0; i < b[l].size(); ++i) b[l][i] += s * other.b[l][i];
    }
}

std::size_t MlpGrads::n_params() const {
    std::size_t n = 0;
    for (const Matrix& m : w) n += m.data.size();
    for (const Vector& v : b) n += v.size();
    return n;
}

Vector mlp_backprop_acc(const MlpTape& tape, std::span<const double> upstream, MlpGrads* acc) {
    const Mlp& net = *tape.net;
    if (upstream.size() != net.out_dim()) throw ConfigError("backprop: upstream length mismatch");
    const auto& k = kern::active();

    Vector delta(upstream.begin(), upstream.end());
    // Output activation.
    if (net.output == OutputActivation::Relu) {
        const Vector& y = tape.act.back();
        for (std::size_t i = 0; i < delta.size(); ++i)
            if (y[i] <= 0.0) delta[i] = 0.0;  // subgradient 0 at the kink
    }
    Vector next;
    for (std::size_t l = net.n_layers(); l-- > 0;) {
        const Matrix& w = net.weights[l];
        const Vector& in = tape.act[l];
        if (acc != nullptr) {
            k.outer_acc(delta.data(), in.data(), acc->w[l].data.data(), w.rows, w.cols);
            k.axpy(1.0, delta.data(), acc->b[l].data(), w.rows);
        }
        next.resize(w.cols);
        k.matvec_t(w.data.data(), delta.data(), next.data(), w.rows, w.cols);
        if (l > 0) {
            const Vector& a = tape.act[l];  // tanh output of the previous layer
            for (std::size_t i = 0; i < next.size(); ++i) next[i] *= 1.0 - a[i] * a[i];
        }
        std::swap(delta, next);
    }
    return delta;
}

Vector backprop(MlpTape& tape, std::span<const double> upstream, MlpGrads& grads) {
    if (tape.net == nullptr) throw ConfigError("backprop: empty tape");
    if (tape.consumed) throw NumericError("backprop: tape already consumed");
    tape.consumed = true;
    grads = MlpGrads::like(*tape.net);
    return mlp_backprop_acc(tape, upstream, &grads);
}

DualOutput mlp_forward_dual(const Mlp& net, std::span<const double> x, std::span<const double> xdot,
                            MlpDualTape& tape) {
    check_input(net, x);
    if (xdot.size() != x.size()) throw ConfigError("mlp_forward_dual: tangent length mismatch");
    const auto& k = kern::active();
    tape.net = &net;
    tape.consumed = false;
    const std::size_t n_layers = net.n_layers();
    tape.act.resize(n_layers + 1);
    tape.atan.resize(n_layers + 1);
    tape.ztan.resize(n_layers);
    tape.act[0].assign(x.begin(), x.end());
    tape.atan[0].assign(xdot.begin(), xdot.end());
    for (std::size_t l = 0; l < n_layers; ++l) {
        const Matrix& w = net.weights[l];
        Vector& val = tape.act[l + 1];
        Vector& zt = tape.ztan[l];
        Vector& at = tape.atan[l + 1];
        val.resize(w.rows);
        zt.resize(w.rows);
        at.resize(w.rows);
        k.affine(w.data.data(), tape.act[l].data(), net.biases[l].data(), val.data(), w.rows, w.cols);
        k.matvec(w.data.data(), tape.atan[l].data(), zt.data(), w.rows, w.cols);
        if (l + 1 < n_layers) {
            for (std::size_t i = 0; i < w.rows; ++i) {
                val[i] = std::tanh(val[i]);
                at[i] = (1.0 - val[i] * val[i]) * zt[i];
            }
        } else if (net.output == OutputActivation::Relu) {
            for (std::size_t i = 0; i < w.rows; ++i) {
                const bool pos = val[i] > 0.0;
                val[i] = pos ? val[i] : 0.0;
                at[i] = pos ? zt[i] : 0.0;
            }
        } else {
            at = zt;
        }
    }
    return {tape.act.back(), tape.atan.back()};
}

void mlp_backprop_dual(const MlpDualTape& tape, std::span<const double> val_adj, std::span<const double> tan_adj,
                       MlpGrads* acc, Vector* x_adj) {
    const Mlp& net = *tape.net;
    if (val_adj.size() != net.out_dim() || tan_adj.size() != net.out_dim())
        throw ConfigError("mlp_backprop_dual: adjoint length mismatch");
    const auto& k = kern::active();
    const std::size_t n_layers = net.n_layers();

    // u = dL/d(post value), s = dL/d(post tangent)
    Vector u(val_adj.begin(), val_adj.end());
    Vector s(tan_adj.begin(), tan_adj.end());
    Vector dz, dzt, tmp;
    for (std::size_t l = n_layers; l-- > 0;) {
        const Matrix& w = net.weights[l];
        const Vector& val = tape.act[l + 1];
        const Vector& zt = tape.ztan[l];
        dz.resize(w.rows);
        dzt.resize(w.rows);
        if (l + 1 < n_layers) {
            // a = tanh(z): phi' = 1-a^2, phi'' = -2a(1-a^2)
            for (std::size_t i = 0; i < w.rows; ++i) {
                const double phi1 = 1.0 - val[i] * val[i];
                dz[i] = u[i] * phi1 + s[i] * (-2.0 * val[i] * phi1) * zt[i];
                dzt[i] = s[i] * phi1;
            }
        } else if (net.output == OutputActivation::Relu) {
            for (std::size_t i = 0; i < w.rows; ++i) {
                const double mask = val[i] > 0.0 ? 1.0 : 0.0;
                dz[i] = u[i] * mask;
                dzt[i] = s[i] * mask;
            }
        } else {
            dz = u;
            dzt = s;
        }
        if (acc != nullptr) {
            k.outer_acc(dz.data(), tape.act[l].data(), acc->w[l].data.data(), w.rows, w.cols);
            k.outer_acc(dzt.data(), tape.atan[l].data(), acc->w[l].data.data(), w.rows, w.cols);
            k.axpy(1.0, dz.data(), acc->b[l].data(), w.rows);
        }
        u.resize(w.cols);
        s.resize(w.cols);
        tmp.resize(w.cols);
        k.matvec_t(w.data.data(), dz.data(), u.data(), w.rows, w.cols);
        k.matvec_t(w.data.data(), dzt.data(), s.data(), w.rows, w.cols);
    }
    if (x_adj != nullptr) *x_adj = u;
}

double spectral_norm_estimate(const Matrix& w, const Vector& u0, int n_power_iters) {
    Vector u = u0;
    Vector v(w.cols, 0.0);
    const auto& k = kern::active();
    for (int it = 0; it < n_power_iters; ++it) {
        k.matvec_t(w.data.data(), u.data(), v.data(), w.rows, w.cols);
        double nv = norm2(v);
        if (nv < 1e-300) return 0.0;
        for (double& x : v) x /= nv;
        k.matvec(w.data.data(), v.data(), u.data(), w.rows, w.cols);
        double nu = norm2(u);
        if (nu < 1e-300) return 0.0;
        for (double& x : u) x /= nu;
    }
    k.matvec_t(w.data.data(), u.data(), v.data(), w.rows, w.cols);
    return norm2(v);
}

void spectral_normalize(Mlp& net, int n_power_iters) {
    if (n_power_iters < 1) throw ConfigError("spectral_normalize: need at least one power iteration");
    const auto& k = kern::active();
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
        if (!net.spectral_norm[l]) continue;
        Matrix& w = net.weights[l];
        Vector& u = net.power_vec[l];
        Vector v(w.cols, 0.0);
        Vector u_next(w.rows, 0.0);
        double sigma = 0.0;
        bool degenerate = false;
        for (int it = 0; it < n_power_iters; ++it) {
            k.matvec_t(w.data.data(), u.data(), v.data(), w.rows, w.cols);
            const double nv = norm2(v);
            if (nv < 1e-12) {
                degenerate = true;
                break;
            }
            for (double& x : v) x /= nv;
            k.matvec(w.data.data(), v.data(), u_next.data(), w.rows, w.cols);
            const double nu = norm2(u_next);
            if (nu < 1e-12) {
                degenerate = true;
                break;
            }
            for (std::size_t i = 0; i < u.size(); ++i) u[i] = u_next[i] / nu;
            sigma = nu;
        }
        if (degenerate || sigma < 1e-12) continue;  // zero (or near-zero) layer: leave unchanged
        k.scal(1.0 / sigma, w.data.data(), w.data.size());
    }
}

}  // namespace iss
