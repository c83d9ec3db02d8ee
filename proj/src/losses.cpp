#include "iss/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "iss/errors.hpp"

namespace iss {

std::string to_string(GradMode mode) { return mode == GradMode::Analytic ? "analytic" : "onestep"; }

GradMode grad_mode_from_string(const std::string& name) {
    if (name == "analytic") return GradMode::Analytic;
    if (name == "onestep") return GradMode::OneStep;
    throw ConfigError("unknown grad mode: " + name);
}

void TrainConfig::validate() const {
    if (alpha <= 0.0) throw ConfigError("train config: alpha must be positive");
    if (eps_a < 0.0 || eps_b < 0.0) throw ConfigError("train config: eps_a/eps_b must be non-negative");
    if (mu_goal < 0.0 || mu_a < 0.0 || mu_b < 0.0 || mu_ctrl < 0.0)
        throw ConfigError("train config: loss weights must be non-negative");
    if (batch_size < 1) throw ConfigError("train config: batch_size must be positive");
    if (iterations < 0 || pretrain_ctrl_iters < 0 || pretrain_lyap_iters < 0)
        throw ConfigError("train config: negative iteration counts");
    if (pretrain_ctrl_iters + pretrain_lyap_iters > iterations)
        throw ConfigError("train config: pre-training phases exceed the iteration budget");
    if (lr_v <= 0.0 || lr_pi <= 0.0 || lr_k <= 0.0) throw ConfigError("train config: learning rates must be positive");
    if (weight_decay < 0.0) throw ConfigError("train config: negative weight decay");
    if (hidden_width < 1 || hidden_layers < 1) throw ConfigError("train config: bad hidden sizes");
}

BundleGrads BundleGrads::like(const CertificateBundle& bundle) {
    BundleGrads g;
    for (const CertificateGroup& grp : bundle.groups) {
        GroupGrads gg;
        gg.s = Matrix(grp.cert.s_mat.rows, grp.cert.s_mat.cols);
        gg.p = MlpGrads::like(grp.cert.p_net);
        gg.q = MlpGrads::like(grp.cert.q_net);
        gg.pi = MlpGrads::like(grp.policy.net);
        gg.k = 0.0;
        g.groups.push_back(std::move(gg));
    }
    return g;
}

void BundleGrads::zero() {
    for (GroupGrads& gg : groups) {
        gg.s.data.assign(gg.s.data.size(), 0.0);
        gg.p.zero();
        gg.q.zero();
        gg.pi.zero();
        gg.k = 0.0;
    }
}

LossEvaluator::LossEvaluator(const Environment& env, TrainConfig cfg, NominalFn nominal)
    : env_(env), cfg_(std::move(cfg)), nominal_(std::move(nominal)) {
    cfg_.validate();
    if (!nominal_) throw ConfigError("loss evaluator: nominal controller required");
}

namespace {

// A += scale * u v^T
void add_outer(Matrix& a, double scale, std::span<const double> u, std::span<const double> v) {
    for (std::size_t r = 0; r < a.rows; ++r)
        for (std::size_t c = 0; c < a.cols; ++c) a(r, c) += scale * u[r] * v[c];
}

struct NodeWork {
    MlpTape pol_tape;
    MlpDualTape p_dual, q_dual;
    MlpTape p_tape, q_tape, p_next_tape, q_next_tape;
    Vector u, th, f, x_next;
    Vector r, sr, rf, srf, r_next, sr_next;
    Vector pv, pt, pv_next;
    double v = 0.0, d = 0.0, v_next = 0.0;
    double cv = 0.0, cd = 0.0, cvn = 0.0;
    bool gate_b = false;
    Vector du;
};

}  // namespace

LossBreakdown LossEvaluator::evaluate(const CertificateBundle& bundle, std::span<const NetworkState> states,
                                      std::span<const NetworkState> goal_states, const PhaseWeights& w,
                                      BundleGrads* grads) const {
    if (states.empty()) throw ConfigError("loss evaluation: empty state batch");
    if (goal_states.empty()) throw ConfigError("loss evaluation: empty goal batch");
    const int n = env_.n_nodes();
    const bool analytic = cfg_.grad_mode == GradMode::Analytic;
    const double dt = env_.dt();
    const double bs = static_cast<double>(states.size());
    const double bg = static_cast<double>(goal_states.size());
    const NetworkTopology& topo = env_.topology();

    LossBreakdown out;
    std::vector<NodeWork> work(n);
    Vector val_adj, tan_adj, gradv, tmp, raw_adj;

    for (const NetworkState& s : states) {
        // Forward sweep: controls, dynamics, V values and decrease estimates.
        for (int i = 0; i < n; ++i) {
            NodeWork& nw = work[i];
            const CertificateGroup& grp = bundle.group_of(i);
            const Vector& x = s.node[i];

            const Vector raw = mlp_forward(grp.policy.net, x, nw.pol_tape);
            nw.th.resize(raw.size());
            nw.u.resize(raw.size());
            for (std::size_t a = 0; a < raw.size(); ++a) {
                nw.th[a] = std::tanh(raw[a]);
                const double mid = 0.5 * (grp.policy.u_lo[a] + grp.policy.u_hi[a]);
                const double half = 0.5 * (grp.policy.u_hi[a] - grp.policy.u_lo[a]);
                nw.u[a] = mid + half * nw.th[a];
            }
            nw.f = env_.node_derivative(i, s, nw.u);
            if (!all_finite(nw.f))
                throw NumericError("loss evaluation: non-finite dynamics at node " + std::to_string(i));

            nw.r = grp.cert.frame.residual(x);
            nw.sr = matvec(grp.cert.s_mat, nw.r);
            const double quad = dot(nw.sr, nw.sr);
            if (analytic) {
                nw.rf = matvec(grp.cert.frame.projector, nw.f);
                nw.srf = matvec(grp.cert.s_mat, nw.rf);
                DualOutput p_out = mlp_forward_dual(grp.cert.p_net, x, nw.f, nw.p_dual);
                DualOutput q_out = mlp_forward_dual(grp.cert.q_net, x, nw.f, nw.q_dual);
                nw.pv = std::move(p_out.value);
                nw.pt = std::move(p_out.tangent);
                nw.v = quad + dot(nw.pv, nw.pv) + q_out.value[0];
                nw.d = 2.0 * dot(nw.sr, nw.srf) + 2.0 * dot(nw.pv, nw.pt) + q_out.tangent[0];
            } else {
                nw.pv = mlp_forward(grp.cert.p_net, x, nw.p_tape);
                const Vector qv = mlp_forward(grp.cert.q_net, x, nw.q_tape);
                nw.v = quad + dot(nw.pv, nw.pv) + qv[0];
                nw.x_next.resize(x.size());
                for (std::size_t a = 0; a < x.size(); ++a) nw.x_next[a] = x[a] + dt * nw.f[a];
                nw.r_next = grp.cert.frame.residual(nw.x_next);
                nw.sr_next = matvec(grp.cert.s_mat, nw.r_next);
                nw.pv_next = mlp_forward(grp.cert.p_net, nw.x_next, nw.p_next_tape);
                const Vector qv_next = mlp_forward(grp.cert.q_net, nw.x_next, nw.q_next_tape);
                nw.v_next = dot(nw.sr_next, nw.sr_next) + dot(nw.pv_next, nw.pv_next) + qv_next[0];
                nw.d = (nw.v_next - nw.v) / dt;
            }
            if (!std::isfinite(nw.v))
                throw NumericError("loss evaluation: certificate value non-finite at node " + std::to_string(i));
            if (!std::isfinite(nw.d))
                throw NumericError("loss evaluation: decrease estimate non-finite at node " + std::to_string(i));
            nw.cv = nw.cd = nw.cvn = 0.0;
            nw.gate_b = false;
            nw.du.assign(nw.u.size(), 0.0);
        }

        // Hinge assembly: implication condition, decrease condition, control
        // deviation; upstream coefficients for the backward sweep.
        for (int i = 0; i < n; ++i) {
            NodeWork& nw = work[i];
            const int group_id = bundle.node_group[i];
            const CertificateGroup& grp = bundle.groups[group_id];

            double vmax = 0.0;
            int jmax = -1;
            for (int j : topo.neighbors[i]) {
                if (jmax < 0 || work[j].v > vmax) {
                    vmax = work[j].v;
                    jmax = j;
                }
            }
            const double sig = sigmoid(grp.cert.gain_k);
            const double gain_term = jmax >= 0 ? sig * vmax : 0.0;  // max over an empty neighborhood is 0
            const double a_arg = nw.v - gain_term + cfg_.eps_a;
            if (a_arg > 0.0) {
                out.cond_a += a_arg;
                if (grads != nullptr && w.a > 0.0) {
                    nw.cv += w.a / bs;
                    if (jmax >= 0) {
                        work[jmax].cv -= w.a / bs * sig;
                        grads->groups[group_id].k -= w.a / bs * sig * (1.0 - sig) * vmax;
                    }
                }
            }

            const double b_arg = nw.d + grp.cert.alpha * nw.v + cfg_.eps_b;
            if (b_arg > 0.0) {
                out.decrease_b += b_arg;
                if (grads != nullptr && w.b > 0.0) {
                    if (analytic) {
                        nw.cv += w.b / bs * grp.cert.alpha;
                        nw.cd += w.b / bs;
                    } else {
                        nw.cv += w.b / bs * (grp.cert.alpha - 1.0 / dt);
                        nw.cvn += w.b / bs / dt;
                    }
                    nw.gate_b = true;
                }
            }

            const Vector u_nom = nominal_(i, s);
            if (!all_finite(u_nom))
                throw NumericError("loss evaluation: non-finite nominal control at node " + std::to_string(i));
            double err = 0.0;
            for (std::size_t a = 0; a < nw.u.size(); ++a) {
                const double e = nw.u[a] - u_nom[a];
                err += e * e;
                if (grads != nullptr && w.ctrl > 0.0) nw.du[a] += 2.0 * w.ctrl / bs * e;
            }
            out.ctrl += err;
        }

        if (grads == nullptr) continue;

        // Backward sweep.
        for (int i = 0; i < n; ++i) {
            NodeWork& nw = work[i];
            const int group_id = bundle.node_group[i];
            const CertificateGroup& grp = bundle.groups[group_id];
            BundleGrads::GroupGrads& gg = grads->groups[group_id];
            const std::size_t d_i = nw.r.size();

            if (nw.cv != 0.0 || nw.cd != 0.0) {
                add_outer(gg.s, 2.0 * nw.cv, nw.sr, nw.r);
                if (analytic) {
                    if (nw.cd != 0.0) {
                        add_outer(gg.s, 2.0 * nw.cd, nw.srf, nw.r);
                        add_outer(gg.s, 2.0 * nw.cd, nw.sr, nw.rf);
                    }
                    val_adj.resize(d_i);
                    tan_adj.resize(d_i);
                    for (std::size_t a = 0; a < d_i; ++a) {
                        val_adj[a] = 2.0 * (nw.cv * nw.pv[a] + nw.cd * nw.pt[a]);
                        tan_adj[a] = 2.0 * nw.cd * nw.pv[a];
                    }
                    mlp_backprop_dual(nw.p_dual, val_adj, tan_adj, &gg.p);
                    const double q_val[1] = {nw.cv};
                    const double q_tan[1] = {nw.cd};
                    mlp_backprop_dual(nw.q_dual, q_val, q_tan, &gg.q);
                } else {
                    val_adj.resize(d_i);
                    for (std::size_t a = 0; a < d_i; ++a) val_adj[a] = 2.0 * nw.cv * nw.pv[a];
                    mlp_backprop_acc(nw.p_tape, val_adj, &gg.p);
                    const double q_up[1] = {nw.cv};
                    mlp_backprop_acc(nw.q_tape, q_up, &gg.q);
                }
            }
            if (!analytic && nw.cvn != 0.0) {
                add_outer(gg.s, 2.0 * nw.cvn, nw.sr_next, nw.r_next);
                val_adj.resize(d_i);
                for (std::size_t a = 0; a < d_i; ++a) val_adj[a] = 2.0 * nw.cvn * nw.pv_next[a];
                mlp_backprop_acc(nw.p_next_tape, val_adj, &gg.p);
                const double q_up[1] = {nw.cvn};
                mlp_backprop_acc(nw.q_next_tape, q_up, &gg.q);
            }

            // Control adjoint from the decrease hinge: dD/du = g^T grad V,
            // with grad V taken at x (analytic) or x_next (one-step).
            if (nw.gate_b && w.b_policy > 0.0) {
                gradv.assign(d_i, 0.0);
                if (analytic) {
                    tmp = matvec(transpose(grp.cert.s_mat), nw.sr);
                    gradv = matvec(transpose(grp.cert.frame.projector), tmp);
                    for (double& vv : gradv) vv *= 2.0;
                    val_adj.resize(d_i);
                    tan_adj.assign(d_i, 0.0);
                    for (std::size_t a = 0; a < d_i; ++a) val_adj[a] = 2.0 * nw.pv[a];
                    Vector x_adj;
                    mlp_backprop_dual(nw.p_dual, val_adj, tan_adj, nullptr, &x_adj);
                    for (std::size_t a = 0; a < d_i; ++a) gradv[a] += x_adj[a];
                    const double q_val[1] = {1.0};
                    const double q_tan[1] = {0.0};
                    mlp_backprop_dual(nw.q_dual, q_val, q_tan, nullptr, &x_adj);
                    for (std::size_t a = 0; a < d_i; ++a) gradv[a] += x_adj[a];
                } else {
                    tmp = matvec(transpose(grp.cert.s_mat), nw.sr_next);
                    gradv = matvec(transpose(grp.cert.frame.projector), tmp);
                    for (double& vv : gradv) vv *= 2.0;
                    val_adj.resize(d_i);
                    for (std::size_t a = 0; a < d_i; ++a) val_adj[a] = 2.0 * nw.pv_next[a];
                    Vector x_adj = mlp_backprop_acc(nw.p_next_tape, val_adj, nullptr);
                    for (std::size_t a = 0; a < d_i; ++a) gradv[a] += x_adj[a];
                    const double q_up[1] = {1.0};
                    x_adj = mlp_backprop_acc(nw.q_next_tape, q_up, nullptr);
                    for (std::size_t a = 0; a < d_i; ++a) gradv[a] += x_adj[a];
                }
                const Matrix g_mat = env_.control_matrix(i, s);
                for (std::size_t a = 0; a < nw.du.size(); ++a) {
                    double acc = 0.0;
                    for (std::size_t rr = 0; rr < d_i; ++rr) acc += g_mat(rr, a) * gradv[rr];
                    nw.du[a] += w.b_policy / bs * acc;
                }
            }

            bool any_du = false;
            for (double vdu : nw.du)
                if (vdu != 0.0) any_du = true;
            if (any_du) {
                raw_adj.resize(nw.du.size());
                for (std::size_t a = 0; a < nw.du.size(); ++a) {
                    const double half = 0.5 * (grp.policy.u_hi[a] - grp.policy.u_lo[a]);
                    raw_adj[a] = nw.du[a] * half * (1.0 - nw.th[a] * nw.th[a]);
                }
                mlp_backprop_acc(nw.pol_tape, raw_adj, &gg.pi);
            }
        }
    }
    out.cond_a /= bs;
    out.decrease_b /= bs;
    out.ctrl /= bs;

    // Goal term: mean |V| over the goal batch, per node.
    MlpTape p_tape, q_tape;
    for (const NetworkState& s : goal_states) {
        for (int i = 0; i < n; ++i) {
            const int group_id = bundle.node_group[i];
            const CertificateGroup& grp = bundle.groups[group_id];
            const Vector& x = s.node[i];
            const Vector r = grp.cert.frame.residual(x);
            const Vector sr = matvec(grp.cert.s_mat, r);
            const Vector pv = mlp_forward(grp.cert.p_net, x, p_tape);
            const Vector qv = mlp_forward(grp.cert.q_net, x, q_tape);
            const double v = dot(sr, sr) + dot(pv, pv) + qv[0];
            if (!std::isfinite(v))
                throw NumericError("loss evaluation: goal term non-finite at node " + std::to_string(i));
            out.goal += std::fabs(v);
            if (grads != nullptr && w.goal > 0.0 && v != 0.0) {
                const double coef = w.goal / bg * (v > 0.0 ? 1.0 : -1.0);
                BundleGrads::GroupGrads& gg = grads->groups[group_id];
                add_outer(gg.s, 2.0 * coef, sr, r);
                val_adj.resize(pv.size());
                for (std::size_t a = 0; a < pv.size(); ++a) val_adj[a] = 2.0 * coef * pv[a];
                mlp_backprop_acc(p_tape, val_adj, &gg.p);
                const double q_up[1] = {coef};
                mlp_backprop_acc(q_tape, q_up, &gg.q);
            }
        }
    }
    out.goal /= bg;

    out.total = cfg_.mu_goal * out.goal + cfg_.mu_a * out.cond_a + cfg_.mu_b * out.decrease_b + cfg_.mu_ctrl * out.ctrl;
    return out;
}

double loss_goal(const CertificateBundle& bundle, const Environment& env,
                 std::span<const NetworkState> goal_states) {
    if (goal_states.empty()) throw ConfigError("loss_goal: empty batch");
    double total = 0.0;
    for (const NetworkState& s : goal_states)
        for (int i = 0; i < env.n_nodes(); ++i) total += std::fabs(v_eval(bundle.group_of(i).cert, s.node[i]));
    return total / static_cast<double>(goal_states.size());
}

double loss_cond_a(const CertificateBundle& bundle, const Environment& env, std::span<const NetworkState> states,
                   double eps_a) {
    if (states.empty()) throw ConfigError("loss_cond_a: empty batch");
    const NetworkTopology& topo = env.topology();
    double total = 0.0;
    for (const NetworkState& s : states) {
        std::vector<double> v(env.n_nodes());
        for (int i = 0; i < env.n_nodes(); ++i) v[i] = v_eval(bundle.group_of(i).cert, s.node[i]);
        for (int i = 0; i < env.n_nodes(); ++i) {
            double gain_max = 0.0;
            bool first = true;
            for (int j : topo.neighbors[i]) {
                const double g = gain_eval(bundle.group_of(i).cert.gain_k, v[j]);
                if (first || g > gain_max) gain_max = g;
                first = false;
            }
            total += std::max(0.0, v[i] - gain_max + eps_a);
        }
    }
    return total / static_cast<double>(states.size());
}

double loss_decrease_b(const CertificateBundle& bundle, const Environment& env, std::span<const NetworkState> states,
                       double eps_b, GradMode mode) {
    if (states.empty()) throw ConfigError("loss_decrease_b: empty batch");
    double total = 0.0;
    for (const NetworkState& s : states) {
        for (int i = 0; i < env.n_nodes(); ++i) {
            const IssCertificate& cert = bundle.group_of(i).cert;
            const Vector u = policy_eval(bundle.group_of(i).policy, s.node[i]);
            const Vector f = env.node_derivative(i, s, u);
            const double v = v_eval(cert, s.node[i]);
            double d;
            if (mode == GradMode::Analytic) {
                d = dot(v_grad(cert, s.node[i]), f);
            } else {
                Vector x_next = s.node[i];
                for (std::size_t a = 0; a < x_next.size(); ++a) x_next[a] += env.dt() * f[a];
                d = (v_eval(cert, x_next) - v) / env.dt();
            }
            total += std::max(0.0, d + cert.alpha * v + eps_b);
        }
    }
    return total / static_cast<double>(states.size());
}

double loss_ctrl(const CertificateBundle& bundle, const Environment& env, std::span<const NetworkState> states,
                 const NominalFn& nominal) {
    if (states.empty()) throw ConfigError("loss_ctrl: empty batch");
    double total = 0.0;
    for (const NetworkState& s : states) {
        for (int i = 0; i < env.n_nodes(); ++i) {
            const Vector u = policy_eval(bundle.group_of(i).policy, s.node[i]);
            const Vector u_nom = nominal(i, s);
            for (std::size_t a = 0; a < u.size(); ++a) {
                const double e = u[a] - u_nom[a];
                total += e * e;
            }
        }
    }
    return total / static_cast<double>(states.size());
}

}  // namespace iss
