#pragma once

#include <cstdint>
#include <vector>

#include "iss/environment.hpp"
#include "iss/la.hpp"
#include "iss/mlp.hpp"

namespace iss {

double sigmoid(double x);

/// Per-group energy function
///   V(x) = |S r(x)|^2 + |p(x)|^2 + q(x),   r(x) = frame residual,
/// with q constrained non-negative by a ReLU output. Non-negative by
/// construction and exactly zero on the goal set once p and q vanish there.
struct IssCertificate {
    Matrix s_mat;
    Mlp p_net;  // d -> d, tanh hidden
    Mlp q_net;  // d -> 1, tanh hidden, ReLU output
    double gain_k = 0.0;
    double alpha = 1.0;
    GoalFrame frame;

    std::size_t dim() const { return s_mat.rows; }
};

/// Per-group controller: raw MLP output squashed by tanh into the actuation
/// interval, so the control is always feasible and the map stays smooth.
struct DecentralizedPolicy {
    Mlp net;  // d -> p, tanh hidden, raw output
    Vector u_lo, u_hi;
};

struct CertificateGroup {
    IssCertificate cert;
    DecentralizedPolicy policy;
};

struct CertificateBundle {
    EnvKind kind = EnvKind::Platoon;
    std::vector<int> node_group;
    std::vector<CertificateGroup> groups;

    const CertificateGroup& group_of(int node) const { return groups[node_group[node]]; }
    int n_nodes() const { return static_cast<int>(node_group.size()); }
    void validate() const;
};

/// Fresh bundle matching the environment's sharing pattern. Group g is
/// seeded from derive_seed(seed, g), so groups differ but runs reproduce.
CertificateBundle make_bundle(const Environment& env, int hidden_width, int hidden_layers, double alpha,
                              std::uint64_t seed);

double v_eval(const IssCertificate& cert, std::span<const double> x);
Vector v_grad(const IssCertificate& cert, std::span<const double> x);

/// Gain applied to neighbor certificate values: sigmoid(k) * a, a class-K
/// contraction (0 < gain < a for a > 0) for every k.
double gain_eval(double gain_k, double a);

Vector policy_eval(const DecentralizedPolicy& policy, std::span<const double> x);

/// Reassign a trained bundle to a larger same-kind network via role-preserving
/// neighborhood maps (platoon: end/middle roles; drone: single shared role).
/// Parameters are copied bit-for-bit; only the node-to-group table changes.
CertificateBundle port_certificate(const CertificateBundle& bundle, const Environment& source,
                                   const Environment& target);

}  // namespace iss
