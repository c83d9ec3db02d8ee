#include <cmath>
#include <string>

#include "iss/environment.hpp"
#include "iss/errors.hpp"

namespace iss {

namespace {

Vector filled(Vector v, int n, double def) {
    if (v.empty()) v.assign(n, def);
    if (static_cast<int>(v.size()) != n) throw ConfigError("microgrid: per-node parameter size mismatch");
    return v;
}

std::vector<MicrogridEnv::Edge> default_edges(int n) {
    std::vector<MicrogridEnv::Edge> edges;
    for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 1.0, 0.1});
    if (n > 2) edges.push_back({n - 1, 0, 1.0, 0.1});
    if (n >= 4) {
        edges.push_back({0, 2, 0.5, 0.1});
        edges.push_back({1, 3, 0.5, 0.1});
    }
    return edges;
}

}  // namespace

MicrogridEnv::MicrogridEnv(Params p) : params_(std::move(p)) {
    const int n = params_.n;
    if (n < 1) throw ConfigError("microgrid: need at least one node");
    kind_ = EnvKind::Microgrid;
    params_.m_angle = filled(params_.m_angle, n, 1.0);
    params_.m_volt = filled(params_.m_volt, n, 1.0);
    params_.d_angle = filled(params_.d_angle, n, 1.0);
    params_.d_volt = filled(params_.d_volt, n, 1.0);
    params_.delta_ref = filled(params_.delta_ref, n, 0.0);
    params_.e_ref = filled(params_.e_ref, n, 0.0);
    params_.g_self = filled(params_.g_self, n, 0.2);
    params_.b_self = filled(params_.b_self, n, 0.3);
    for (int i = 0; i < n; ++i) {
        if (params_.m_angle[i] == 0.0 || params_.m_volt[i] == 0.0)
            throw ConfigError("microgrid: zero inertia coefficient at node " + std::to_string(i));
    }
    if (params_.edges.empty()) params_.edges = default_edges(n);

    topo_.n = n;
    topo_.neighbors.resize(n);
    topo_.share_group.assign(n, 0);
    topo_.state_dim.assign(n, 2);
    topo_.control_dim.assign(n, 2);
    y_.resize(n);
    sigma_.resize(n);
    for (const Edge& e : params_.edges) {
        if (e.i < 0 || e.i >= n || e.j < 0 || e.j >= n || e.i == e.j)
            throw ConfigError("microgrid: bad edge endpoints");
        topo_.neighbors[e.i].push_back(e.j);
        topo_.neighbors[e.j].push_back(e.i);
        y_[e.i].push_back(e.y);
        y_[e.j].push_back(e.y);
        sigma_[e.i].push_back(e.sigma);
        sigma_[e.j].push_back(e.sigma);
    }

    dt_ = params_.dt;
    horizon_ = params_.horizon;
    train_box_ = params_.train_box.empty() ? Box{{-3.0, -3.0}, {3.0, 3.0}} : params_.train_box;
    test_box_ = params_.test_box.empty() ? Box{{-2.0, -3.0}, {2.0, 3.0}} : params_.test_box;
    vertices_ = {Vector{}};  // no modeled uncertainty
    control_lo_ = {-params_.control_limit, -params_.control_limit};
    control_hi_ = {params_.control_limit, params_.control_limit};
    reward_offset_ = params_.reward_offset;

    // Power references default to the values that make the reference point an
    // equilibrium of the uncontrolled dynamics.
    const bool derive_p = params_.p_ref.empty();
    const bool derive_q = params_.q_ref.empty();
    if (derive_p) params_.p_ref.assign(n, 0.0);
    if (derive_q) params_.q_ref.assign(n, 0.0);
    if (static_cast<int>(params_.p_ref.size()) != n || static_cast<int>(params_.q_ref.size()) != n)
        throw ConfigError("microgrid: power reference size mismatch");
    if (derive_p || derive_q) {
        for (int i = 0; i < n; ++i) {
            const double ei = params_.e_ref[i];
            const double di = params_.delta_ref[i];
            double flow_p = params_.g_self[i] * ei * ei;
            double flow_q = -params_.b_self[i] * ei * ei;
            for (std::size_t k = 0; k < topo_.neighbors[i].size(); ++k) {
                const int j = topo_.neighbors[i][k];
                const double angle = params_.delta_ref[j] - di - sigma_[i][k];
                flow_p += ei * params_.e_ref[j] * y_[i][k] * std::cos(angle);
                flow_q += ei * params_.e_ref[j] * y_[i][k] * std::sin(angle);
            }
            if (derive_p) params_.p_ref[i] = flow_p;
            if (derive_q) params_.q_ref[i] = flow_q;
        }
    }

    frames_.resize(n);
    for (int i = 0; i < n; ++i) {
        frames_[i].projector = Matrix::identity(2);
        frames_[i].offset = {params_.delta_ref[i], params_.e_ref[i]};
    }
    validate_common();
}

Vector MicrogridEnv::node_derivative(int i, const NetworkState& s, std::span<const double> u) const {
    const Vector& x = s.node[i];
    if (!all_finite(x) || !all_finite(u)) throw NumericError("microgrid derivative: non-finite input");
    const double delta = x[0];
    const double e = x[1];
    double sum_p = 0.0;
    double sum_q = 0.0;
    for (std::size_t k = 0; k < topo_.neighbors[i].size(); ++k) {
        const int j = topo_.neighbors[i][k];
        const double ej = s.node[j][1];
        const double angle = s.node[j][0] - delta - sigma_[i][k];
        sum_p += e * ej * y_[i][k] * std::cos(angle);
        sum_q += e * ej * y_[i][k] * std::sin(angle);
    }
    const double power_p = params_.p_ref[i] - params_.g_self[i] * e * e - sum_p;
    const double power_q = params_.q_ref[i] + params_.b_self[i] * e * e - sum_q;
    Vector dx(2);
    dx[0] = (-(delta - params_.delta_ref[i]) + u[0] + params_.d_angle[i] * power_p) / params_.m_angle[i];
    dx[1] = (-(e - params_.e_ref[i]) + u[1] + params_.d_volt[i] * power_q) / params_.m_volt[i];
    return dx;
}

Matrix MicrogridEnv::control_matrix(int i, const NetworkState& /*s*/) const {
    Matrix g(2, 2);
    g(0, 0) = 1.0 / params_.m_angle[i];
    g(1, 1) = 1.0 / params_.m_volt[i];
    return g;
}

const GoalFrame& MicrogridEnv::goal_frame(int i) const { return frames_[i]; }

void MicrogridEnv::sample_goal_node(int i, Rng& /*rng*/, Vector& out) const {
    out = {params_.delta_ref[i], params_.e_ref[i]};
}

Vector MicrogridEnv::initial_boundary(const Scenario& scen) const {
    if (!scen.boundary0.empty()) throw ConfigError("microgrid scenario: no boundary values expected");
    if (scen.profile != "constant") throw ConfigError("microgrid scenario: unknown profile " + scen.profile);
    return {};
}

void MicrogridEnv::advance_boundary(Vector& /*boundary*/, double /*t*/, const Scenario& /*scen*/) const {}

}  // namespace iss
