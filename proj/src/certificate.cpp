#include "iss/certificate.hpp"

#include <cmath>
#include <string>

#include "iss/errors.hpp"

namespace iss {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double gain_eval(double gain_k, double a) { return sigmoid(gain_k) * a; }

void CertificateBundle::validate() const {
    if (groups.empty()) throw ConfigError("bundle: no parameter groups");
    for (int g : node_group)
        if (g < 0 || g >= static_cast<int>(groups.size()))
            throw ConfigError("bundle: node mapped to missing group");
    for (const CertificateGroup& g : groups) {
        const std::size_t d = g.cert.dim();
        if (g.cert.s_mat.cols != d) throw ConfigError("bundle: S must be square");
        if (g.cert.p_net.in_dim() != d || g.cert.p_net.out_dim() != d)
            throw ConfigError("bundle: p net must map d -> d");
        if (g.cert.q_net.in_dim() != d || g.cert.q_net.out_dim() != 1)
            throw ConfigError("bundle: q net must map d -> 1");
        if (g.cert.q_net.output != OutputActivation::Relu)
            throw ConfigError("bundle: q net needs a ReLU output");
        if (g.cert.alpha <= 0.0) throw ConfigError("bundle: alpha must be positive");
        if (g.policy.net.in_dim() != d) throw ConfigError("bundle: policy input mismatch");
        if (g.policy.net.out_dim() != g.policy.u_lo.size() || g.policy.u_lo.size() != g.policy.u_hi.size())
            throw ConfigError("bundle: policy bound mismatch");
        if (g.cert.frame.projector.rows != d || g.cert.frame.offset.size() != d)
            throw ConfigError("bundle: goal frame dimension mismatch");
    }
}

CertificateBundle make_bundle(const Environment& env, int hidden_width, int hidden_layers, double alpha,
                              std::uint64_t seed) {
    if (hidden_width < 1 || hidden_layers < 1) throw ConfigError("make_bundle: bad hidden sizes");
    const NetworkTopology& topo = env.topology();
    CertificateBundle bundle;
    bundle.kind = env.kind();
    bundle.node_group = topo.share_group;
    const int n_groups = topo.n_groups();
    for (int g = 0; g < n_groups; ++g) {
        // Any member node defines the group's dimensions and goal frame.
        int member = -1;
        for (int i = 0; i < topo.n; ++i)
            if (topo.share_group[i] == g) {
                member = i;
                break;
            }
        if (member < 0) throw ConfigError("make_bundle: empty share group");
        for (int i = 0; i < topo.n; ++i) {
            if (topo.share_group[i] != g) continue;
            if (!(env.goal_frame(i).projector == env.goal_frame(member).projector) ||
                env.goal_frame(i).offset != env.goal_frame(member).offset)
                throw ConfigError("make_bundle: shared group with differing goal frames");
        }
        const std::size_t d = static_cast<std::size_t>(topo.state_dim[member]);
        const std::size_t p = static_cast<std::size_t>(topo.control_dim[member]);
        const std::uint64_t gseed = derive_seed(seed, 100 + static_cast<std::uint64_t>(g));

        std::vector<std::size_t> widths{d};
        for (int h = 0; h < hidden_layers; ++h) widths.push_back(static_cast<std::size_t>(hidden_width));

        CertificateGroup group;
        auto p_widths = widths;
        p_widths.push_back(d);
        group.cert.p_net = mlp_init(p_widths, HiddenActivation::Tanh, OutputActivation::None, derive_seed(gseed, 1));
        auto q_widths = widths;
        q_widths.push_back(1);
        group.cert.q_net = mlp_init(q_widths, HiddenActivation::Tanh, OutputActivation::Relu, derive_seed(gseed, 2));
        auto pi_widths = widths;
        pi_widths.push_back(p);
        group.policy.net = mlp_init(pi_widths, HiddenActivation::Tanh, OutputActivation::None, derive_seed(gseed, 3));
        group.policy.u_lo = env.control_lo();
        group.policy.u_hi = env.control_hi();

        group.cert.s_mat = Matrix(d, d);
        Rng rng(derive_seed(gseed, 4));
        const double bound = 1.0 / std::sqrt(static_cast<double>(d));
        for (double& v : group.cert.s_mat.data) v = rng.uniform(-bound, bound);
        group.cert.gain_k = 0.0;
        group.cert.alpha = alpha;
        group.cert.frame = env.goal_frame(member);
        bundle.groups.push_back(std::move(group));
    }
    bundle.validate();
    return bundle;
}

double v_eval(const IssCertificate& cert, std::span<const double> x) {
    if (x.size() != cert.dim()) throw ConfigError("v_eval: state dimension mismatch");
    const Vector r = cert.frame.residual(x);
    const Vector sr = matvec(cert.s_mat, r);
    const Vector pv = mlp_forward(cert.p_net, x);
    const Vector qv = mlp_forward(cert.q_net, x);
    return dot(sr, sr) + dot(pv, pv) + qv[0];
}

Vector v_grad(const IssCertificate& cert, std::span<const double> x) {
    if (x.size() != cert.dim()) throw ConfigError("v_grad: state dimension mismatch");
    const Vector r = cert.frame.residual(x);
    const Vector sr = matvec(cert.s_mat, r);
    // d|S r|^2/dx = 2 P^T S^T S r
    const Vector sts_r = matvec(transpose(cert.s_mat), sr);
    Vector grad = matvec(transpose(cert.frame.projector), sts_r);
    for (double& v : grad) v *= 2.0;

    MlpTape tape;
    Vector pv = mlp_forward(cert.p_net, x, tape);
    for (double& v : pv) v *= 2.0;
    const Vector gp = mlp_backprop_acc(tape, pv, nullptr);
    const Vector qv = mlp_forward(cert.q_net, x, tape);
    (void)qv;
    const Vector gq = mlp_backprop_acc(tape, Vector{1.0}, nullptr);
    for (std::size_t a = 0; a < grad.size(); ++a) grad[a] += gp[a] + gq[a];
    return grad;
}

Vector policy_eval(const DecentralizedPolicy& policy, std::span<const double> x) {
    const Vector raw = mlp_forward(policy.net, x);
    Vector u(raw.size());
    for (std::size_t a = 0; a < raw.size(); ++a) {
        const double mid = 0.5 * (policy.u_lo[a] + policy.u_hi[a]);
        const double half = 0.5 * (policy.u_hi[a] - policy.u_lo[a]);
        u[a] = mid + half * std::tanh(raw[a]);
    }
    return u;
}

namespace {

// Platoon sharing pattern: ends in one group, middles in another.
void require_platoon_pattern(const CertificateBundle& bundle, const Environment& env) {
    const NetworkTopology& topo = env.topology();
    const int n = topo.n;
    if (n < 5) throw ConfigError("port: platoon source needs at least 5 trucks for all middle roles");
    const int end_group = bundle.node_group[0];
    const int mid_group = bundle.node_group[1];
    if (bundle.node_group[n - 1] != end_group)
        throw ConfigError("port: platoon boundary-node role mismatch (first and last truck must share)");
    if (end_group == mid_group) throw ConfigError("port: platoon source must separate end and middle groups");
    for (int i = 1; i + 1 < n; ++i)
        if (bundle.node_group[i] != mid_group)
            throw ConfigError("port: platoon middle trucks must share one group");
}

}  // namespace

CertificateBundle port_certificate(const CertificateBundle& bundle, const Environment& source,
                                   const Environment& target) {
    if (bundle.kind != source.kind()) throw ConfigError("port: bundle was trained for a different kind");
    if (source.kind() != target.kind()) throw ConfigError("port: source and target kinds differ");
    if (static_cast<int>(bundle.node_group.size()) != source.n_nodes())
        throw ConfigError("port: bundle does not match the source topology");

    CertificateBundle out;
    out.kind = target.kind();
    out.groups = bundle.groups;  // deep copy; parameters stay bit-identical

    switch (source.kind()) {
        case EnvKind::Platoon: {
            require_platoon_pattern(bundle, source);
            const int n_t = target.n_nodes();
            if (n_t < 2) throw ConfigError("port: platoon target needs at least two trucks");
            const int end_group = bundle.node_group[0];
            const int mid_group = bundle.node_group[1];
            out.node_group.assign(n_t, mid_group);
            out.node_group[0] = end_group;
            out.node_group[n_t - 1] = end_group;
            // Neighborhood maps: target end trucks pair a boundary slot with a
            // middle neighbor exactly like source nodes 0 and n-1; target
            // middles map onto the interior middle block. Dynamics match per
            // role by construction, so validation reduces to the role check.
            break;
        }
        case EnvKind::PlanarDrone: {
            for (int g : bundle.node_group)
                if (g != bundle.node_group[0])
                    throw ConfigError("port: drone source must share a single group across nodes");
            out.node_group.assign(target.n_nodes(), bundle.node_group[0]);
            break;
        }
        case EnvKind::Microgrid:
            throw ConfigError("port: microgrid networks have no role-preserving neighborhood maps");
    }

    // Target nodes must agree with the group dimensions they now reference.
    for (int i = 0; i < target.n_nodes(); ++i) {
        const CertificateGroup& g = out.groups[out.node_group[i]];
        if (g.cert.dim() != static_cast<std::size_t>(target.state_dim(i)) ||
            g.policy.net.out_dim() != static_cast<std::size_t>(target.control_dim(i)))
            throw ConfigError("port: target node dimensions do not match the ported group");
    }
    out.validate();
    return out;
}

}  // namespace iss
