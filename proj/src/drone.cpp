#include <cmath>
#include <numbers>

#include "iss/environment.hpp"
#include "iss/errors.hpp"

namespace iss {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

}  // namespace

DroneEnv::DroneEnv(Params p) : params_(p) {
    if (p.rows < 1 || p.cols < 1) throw ConfigError("drone: need at least a 1x1 grid");
    if (p.mass <= 0.0 || p.inertia <= 0.0 || p.arm <= 0.0) throw ConfigError("drone: bad physical constants");
    kind_ = EnvKind::PlanarDrone;
    const int n = p.rows * p.cols;
    topo_.n = n;
    topo_.neighbors.resize(n);
    topo_.share_group.assign(n, 0);
    topo_.state_dim.assign(n, 8);
    topo_.control_dim.assign(n, 2);
    left_.assign(n, -1);
    right_.assign(n, -1);
    up_.assign(n, -1);
    down_.assign(n, -1);
    // Row index increases upward; column index increases rightward.
    for (int r = 0; r < p.rows; ++r) {
        for (int c = 0; c < p.cols; ++c) {
            const int i = r * p.cols + c;
            if (c > 0) left_[i] = i - 1;
            if (c + 1 < p.cols) right_[i] = i + 1;
            if (r + 1 < p.rows) up_[i] = i + p.cols;
            if (r > 0) down_[i] = i - p.cols;
            for (int nb : {left_[i], right_[i], up_[i], down_[i]})
                if (nb >= 0) topo_.neighbors[i].push_back(nb);
        }
    }
    dt_ = p.dt;
    horizon_ = p.horizon;
    train_box_ = p.train_box.empty()
                     ? Box{{0.0, 0.0, 0.0, 0.0, -kHalfPi, -7.0, -5.0, -kHalfPi},
                           {5.0, 5.0, 5.0, 5.0, kHalfPi, 7.0, 5.0, kHalfPi}}
                     : p.train_box;
    test_box_ = p.test_box.empty()
                    ? Box{{0.8, 0.8, 0.09, 0.09, -0.05, 0.85, -0.15, -0.05},
                          {1.2, 1.2, 0.11, 0.11, 0.05, 1.15, 0.15, 0.05}}
                    : p.test_box;
    vertices_ = p.vertices;
    control_lo_ = {0.0, 0.0};
    control_hi_ = {2.0 * p.mass * p.gravity, 2.0 * p.mass * p.gravity};
    reward_offset_ = p.reward_offset;

    // Goal manifold: p_l == p_r, p_u == p_d, theta == omega == 0.
    frame_.projector = Matrix(8, 8);
    frame_.projector(0, 0) = 0.5;
    frame_.projector(0, 1) = -0.5;
    frame_.projector(1, 0) = -0.5;
    frame_.projector(1, 1) = 0.5;
    frame_.projector(2, 2) = 0.5;
    frame_.projector(2, 3) = -0.5;
    frame_.projector(3, 2) = -0.5;
    frame_.projector(3, 3) = 0.5;
    frame_.projector(4, 4) = 1.0;
    frame_.projector(7, 7) = 1.0;
    frame_.offset = Vector(8, 0.0);
    validate_common();
}

Vector DroneEnv::node_derivative(int i, const NetworkState& s, std::span<const double> u) const {
    const Vector& x = s.node[i];
    if (!all_finite(x) || !all_finite(u) || !all_finite(s.boundary))
        throw NumericError("drone derivative: non-finite input");
    const double theta = x[4];
    const double vx = x[5];
    const double vy = x[6];
    const double omega = x[7];
    const double vref_x = s.boundary[0];
    const double vref_y = s.boundary[1];
    const auto vx_of = [&](int j) { return j >= 0 ? s.node[j][5] : vref_x; };
    const double vy_up = up_[i] >= 0 ? s.node[up_[i]][6] : vref_y;
    const double vy_down = down_[i] >= 0 ? s.node[down_[i]][6] : vref_y;
    const double thrust = u[0] + u[1];
    Vector dx(8);
    dx[0] = vx - vx_of(left_[i]);    // p_l = own x minus left x
    dx[1] = vx_of(right_[i]) - vx;   // p_r = right x minus own x
    dx[2] = vy_up - vy;              // p_u = upper y minus own y
    dx[3] = vy - vy_down;            // p_d = own y minus lower y
    dx[4] = omega;
    dx[5] = -thrust * std::sin(theta) / params_.mass;
    dx[6] = thrust * std::cos(theta) / params_.mass - params_.gravity;
    dx[7] = params_.arm * (u[0] - u[1]) / params_.inertia;
    return dx;
}

Matrix DroneEnv::control_matrix(int i, const NetworkState& s) const {
    const double theta = s.node[i][4];
    Matrix g(8, 2);
    g(5, 0) = -std::sin(theta) / params_.mass;
    g(5, 1) = g(5, 0);
    g(6, 0) = std::cos(theta) / params_.mass;
    g(6, 1) = g(6, 0);
    g(7, 0) = params_.arm / params_.inertia;
    g(7, 1) = -g(7, 0);
    return g;
}

const GoalFrame& DroneEnv::goal_frame(int /*i*/) const { return frame_; }

void DroneEnv::sample_goal_node(int /*i*/, Rng& rng, Vector& out) const {
    out.resize(8);
    for (std::size_t a = 0; a < 8; ++a) out[a] = rng.uniform(train_box_.lo[a], train_box_.hi[a]);
    out[1] = out[0];  // p_r == p_l
    out[3] = out[2];  // p_d == p_u
    out[4] = 0.0;     // theta
    out[7] = 0.0;     // omega
}

Vector DroneEnv::initial_boundary(const Scenario& scen) const {
    if (!scen.boundary0.empty()) {
        if (scen.boundary0.size() != 2) throw ConfigError("drone scenario: boundary0 must have two entries");
        return scen.boundary0;
    }
    if (scen.profile == "ref_sin") return {1.0, 0.0};
    if (scen.profile == "constant") return vertices_.front();
    throw ConfigError("drone scenario: unknown profile " + scen.profile);
}

void DroneEnv::advance_boundary(Vector& boundary, double t, const Scenario& scen) const {
    if (scen.profile == "ref_sin") {
        boundary[0] += dt_ * (0.5 * std::sin(t) - 0.25);
        boundary[0] = std::max(boundary[0], 0.5);  // reference speed clipped from below
        boundary[1] = 0.0;
    } else if (scen.profile != "constant") {
        throw ConfigError("drone scenario: unknown profile " + scen.profile);
    }
}

}  // namespace iss
