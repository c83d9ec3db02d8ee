#pragma once

#include <functional>
#include <memory>

#include "iss/environment.hpp"
#include "iss/la.hpp"

namespace iss {

enum class BaselineKind { Lqr, Droop, Nominal };  // Nominal: the environment's default

struct BaselineSpec {
    BaselineKind kind = BaselineKind::Nominal;
    Matrix q_weight;  // empty: identity
    Matrix r_weight;  // empty: identity
    double droop_gain_p = 1.0;
    double droop_gain_q = 1.0;
};

/// Classical per-node controller. LQR designs ride on the stabilizable
/// goal-relative linearization of a single subsystem and re-anchor the local
/// goal from observed neighbor values each step; droop is proportional
/// feedback on the reference deviation.
class NominalController {
public:
    virtual ~NominalController() = default;
    virtual Vector control(int node, const NetworkState& state) const = 0;
};

std::unique_ptr<NominalController> make_nominal_controller(const Environment& env,
                                                           const BaselineSpec& spec = BaselineSpec{});

/// Convenience adaptor for training losses.
std::function<Vector(int, const NetworkState&)> make_nominal(const Environment& env,
                                                             const BaselineSpec& spec = BaselineSpec{});

/// The goal-relative linearization the platoon LQR is designed on:
/// states (p_front - p_back, v - v_mean), input acceleration.
void platoon_lqr_model(Matrix& a, Matrix& b);
/// Hover linearization for the drone LQR: states
/// (p_l - p_r, p_u - p_d, theta, v_x - v_ref, v_y - v_ref, omega).
void drone_lqr_model(const Environment& env, Matrix& a, Matrix& b);

}  // namespace iss
