#include "iss/baselines.hpp"

#include <cmath>

#include "iss/errors.hpp"
#include "iss/riccati.hpp"

namespace iss {

void platoon_lqr_model(Matrix& a, Matrix& b) {
    // z = (p_front - p_back, v - v_mean):  dz1 = -2 z2, dz2 = u.
    a = Matrix(2, 2);
    a(0, 1) = -2.0;
    b = Matrix(2, 1);
    b(1, 0) = 1.0;
}

void drone_lqr_model(const Environment& env, Matrix& a, Matrix& b) {
    const auto& drone = dynamic_cast<const DroneEnv&>(env);
    // z = (p_l - p_r, p_u - p_d, theta, v_x - v_ref, v_y - v_ref, omega)
    // about hover: u1 = u2 = m g / 2.
    a = Matrix(6, 6);
    a(0, 3) = 2.0;                   // d(p_l - p_r) = 2 (v_x - mean)
    a(1, 4) = -2.0;                  // d(p_u - p_d) = -2 (v_y - mean)
    a(2, 5) = 1.0;                   // theta' = omega
    a(3, 2) = -drone.gravity();      // v_x' = -g theta at hover thrust
    b = Matrix(6, 2);
    b(4, 0) = 1.0 / drone.mass();
    b(4, 1) = 1.0 / drone.mass();
    b(5, 0) = drone.arm() / drone.inertia();
    b(5, 1) = -drone.arm() / drone.inertia();
}

namespace {

Matrix weight_or_identity(const Matrix& w, std::size_t n, const char* what) {
    if (w.empty()) return Matrix::identity(n);
    if (w.rows != n || w.cols != n) throw ConfigError(std::string(what) + ": weight shape mismatch");
    return w;
}

class PlatoonLqr : public NominalController {
public:
    PlatoonLqr(const PlatoonEnv& env, const BaselineSpec& spec) : env_(env) {
        Matrix a, b;
        platoon_lqr_model(a, b);
        const Matrix q = weight_or_identity(spec.q_weight, 2, "platoon lqr Q");
        const Matrix r = weight_or_identity(spec.r_weight, 1, "platoon lqr R");
        k_ = care_solve(a, b, q, r).k;
    }

    Vector control(int node, const NetworkState& s) const override {
        const Vector& x = s.node[node];
        const int n = static_cast<int>(s.node.size());
        const double v_front = node == 0 ? s.boundary[0] : s.node[node - 1][2];
        const double v_behind = node == n - 1 ? s.boundary[0] : s.node[node + 1][2];
        const double z1 = x[0] - x[1];
        const double z2 = x[2] - 0.5 * (v_front + v_behind);
        const Vector u{-(k_(0, 0) * z1 + k_(0, 1) * z2)};
        return env_.clamp_control(node, u);
    }

private:
    const PlatoonEnv& env_;
    Matrix k_;
};

class DroneLqr : public NominalController {
public:
    DroneLqr(const DroneEnv& env, const BaselineSpec& spec) : env_(env) {
        Matrix a, b;
        drone_lqr_model(env, a, b);
        const Matrix q = weight_or_identity(spec.q_weight, 6, "drone lqr Q");
        const Matrix r = weight_or_identity(spec.r_weight, 2, "drone lqr R");
        k_ = care_solve(a, b, q, r).k;
        hover_ = 0.5 * env.mass() * env.gravity();
    }

    Vector control(int node, const NetworkState& s) const override {
        const Vector& x = s.node[node];
        // Local goal velocity: mean of the directional neighbors per axis,
        // grid edges reading the reference carried on the boundary.
        const auto vx_of = [&](int j) { return j >= 0 ? s.node[j][5] : s.boundary[0]; };
        const auto vy_of = [&](int j) { return j >= 0 ? s.node[j][6] : s.boundary[1]; };
        const double vx_mean = 0.5 * (vx_of(env_.left_of(node)) + vx_of(env_.right_of(node)));
        const double vy_mean = 0.5 * (vy_of(env_.up_of(node)) + vy_of(env_.down_of(node)));
        const double z[6] = {x[0] - x[1], x[2] - x[3], x[4], x[5] - vx_mean, x[6] - vy_mean, x[7]};
        Vector u(2, 0.0);
        for (int a = 0; a < 2; ++a) {
            double acc = 0.0;
            for (int c = 0; c < 6; ++c) acc += k_(a, c) * z[c];
            u[a] = hover_ - acc;
        }
        return env_.clamp_control(node, u);
    }

private:
    const DroneEnv& env_;
    Matrix k_;
    double hover_ = 0.0;
};

class MicrogridDroop : public NominalController {
public:
    MicrogridDroop(const MicrogridEnv& env, const BaselineSpec& spec)
        : env_(env), gain_p_(spec.droop_gain_p), gain_q_(spec.droop_gain_q) {}

    Vector control(int node, const NetworkState& s) const override {
        const Vector& x = s.node[node];
        const Vector u{-gain_p_ * (x[0] - env_.params().delta_ref[node]),
                       -gain_q_ * (x[1] - env_.params().e_ref[node])};
        return env_.clamp_control(node, u);
    }

private:
    const MicrogridEnv& env_;
    double gain_p_;
    double gain_q_;
};

}  // namespace

std::unique_ptr<NominalController> make_nominal_controller(const Environment& env, const BaselineSpec& spec) {
    BaselineKind kind = spec.kind;
    if (kind == BaselineKind::Nominal)
        kind = env.kind() == EnvKind::Microgrid ? BaselineKind::Droop : BaselineKind::Lqr;
    switch (kind) {
        case BaselineKind::Lqr:
            if (env.kind() == EnvKind::Platoon)
                return std::make_unique<PlatoonLqr>(dynamic_cast<const PlatoonEnv&>(env), spec);
            if (env.kind() == EnvKind::PlanarDrone)
                return std::make_unique<DroneLqr>(dynamic_cast<const DroneEnv&>(env), spec);
            throw ConfigError("lqr baseline: not defined for " + to_string(env.kind()));
        case BaselineKind::Droop:
            if (env.kind() == EnvKind::Microgrid)
                return std::make_unique<MicrogridDroop>(dynamic_cast<const MicrogridEnv&>(env), spec);
            throw ConfigError("droop baseline: not defined for " + to_string(env.kind()));
        case BaselineKind::Nominal: break;
    }
    throw ConfigError("unknown baseline kind");
}

std::function<Vector(int, const NetworkState&)> make_nominal(const Environment& env, const BaselineSpec& spec) {
    std::shared_ptr<NominalController> ctrl = make_nominal_controller(env, spec);
    return [ctrl](int node, const NetworkState& s) { return ctrl->control(node, s); };
}

}  // namespace iss
