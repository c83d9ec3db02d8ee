#include <cmath>

#include "iss/environment.hpp"
#include "iss/errors.hpp"

namespace iss {

namespace {

NetworkTopology platoon_topology(int n) {
    NetworkTopology t;
    t.n = n;
    t.neighbors.resize(n);
    t.share_group.resize(n);
    t.state_dim.assign(n, 3);
    t.control_dim.assign(n, 1);
    for (int i = 0; i < n; ++i) {
        if (i > 0) t.neighbors[i].push_back(i - 1);
        if (i + 1 < n) t.neighbors[i].push_back(i + 1);
        t.share_group[i] = (i == 0 || i == n - 1) ? 0 : 1;
    }
    return t;
}

GoalFrame platoon_frame() {
    // Goal manifold p_front == p_back; residual is the orthogonal deviation.
    GoalFrame f;
    f.projector = Matrix(3, 3);
    f.projector(0, 0) = 0.5;
    f.projector(0, 1) = -0.5;
    f.projector(1, 0) = -0.5;
    f.projector(1, 1) = 0.5;
    f.offset = Vector(3, 0.0);
    return f;
}

}  // namespace

PlatoonEnv::PlatoonEnv(Params p) {
    if (p.n < 1) throw ConfigError("platoon: need at least one controllable truck");
    kind_ = EnvKind::Platoon;
    topo_ = platoon_topology(p.n);
    dt_ = p.dt;
    horizon_ = p.horizon;
    train_box_ = p.train_box.empty() ? Box{{0.0, 0.0, 0.0}, {2.0, 2.0, 4.0}} : p.train_box;
    test_box_ = p.test_box.empty() ? Box{{0.6, 0.6, 1.0}, {1.4, 1.4, 1.2}} : p.test_box;
    vertices_ = p.vertices;
    control_lo_ = {-p.accel_limit};
    control_hi_ = {p.accel_limit};
    reward_offset_ = p.reward_offset;
    frame_ = platoon_frame();
    validate_common();
}

Vector PlatoonEnv::node_derivative(int i, const NetworkState& s, std::span<const double> u) const {
    const Vector& x = s.node[i];
    if (!all_finite(x) || !all_finite(u) || !all_finite(s.boundary))
        throw NumericError("platoon derivative: non-finite input");
    const double v = x[2];
    const double v_lead = s.boundary[0];
    const double v_front = (i == 0) ? v_lead : s.node[i - 1][2];
    // The trailing truck mirrors the lead velocity to hold the total length.
    const double v_behind = (i == topo_.n - 1) ? v_lead : s.node[i + 1][2];
    return {v_front - v, v - v_behind, u[0]};
}

Matrix PlatoonEnv::control_matrix(int /*i*/, const NetworkState& /*s*/) const {
    Matrix g(3, 1);
    g(2, 0) = 1.0;
    return g;
}

const GoalFrame& PlatoonEnv::goal_frame(int /*i*/) const { return frame_; }

void PlatoonEnv::sample_goal_node(int /*i*/, Rng& rng, Vector& out) const {
    out.resize(3);
    for (std::size_t a = 0; a < 3; ++a) out[a] = rng.uniform(train_box_.lo[a], train_box_.hi[a]);
    out[1] = out[0];  // impose p_front == p_back exactly
}

Vector PlatoonEnv::initial_boundary(const Scenario& scen) const {
    if (!scen.boundary0.empty()) {
        if (scen.boundary0.size() != 1) throw ConfigError("platoon scenario: boundary0 must have one entry");
        return scen.boundary0;
    }
    if (scen.profile == "lead_sin") return {2.0};
    if (scen.profile == "constant") return vertices_.front();
    throw ConfigError("platoon scenario: unknown profile " + scen.profile);
}

void PlatoonEnv::advance_boundary(Vector& boundary, double t, const Scenario& scen) const {
    if (scen.profile == "lead_sin") {
        boundary[0] += dt_ * std::sin(5.0 * t);
    } else if (scen.profile != "constant") {
        throw ConfigError("platoon scenario: unknown profile " + scen.profile);
    }
}

}  // namespace iss
