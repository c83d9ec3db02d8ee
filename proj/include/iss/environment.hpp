#pragma once

#include <memory>
#include <string>
#include <vector>

#include "iss/la.hpp"
#include "iss/rng.hpp"

namespace iss {

enum class EnvKind { Platoon, PlanarDrone, Microgrid };

std::string to_string(EnvKind kind);
EnvKind env_kind_from_string(const std::string& name);

struct NetworkTopology {
    int n = 0;
    std::vector<std::vector<int>> neighbors;  // controllable neighbors only; boundary coupling is separate
    std::vector<int> share_group;
    std::vector<int> state_dim;
    std::vector<int> control_dim;

    int n_groups() const;
    void validate() const;
};

struct NetworkState {
    std::vector<Vector> node;
    /// Exogenous values the node dynamics read at the network boundary
    /// (platoon: lead/last velocity, drone: reference velocity). During
    /// training and checking this doubles as the uncertain parameter vector;
    /// during rollouts a scenario profile drives it.
    Vector boundary;
    double t = 0.0;
};

/// Axis-aligned per-node sampling box. Scenario boxes may be degenerate
/// (lo == hi pins an axis); training boxes must have positive volume.
struct Box {
    Vector lo, hi;
    bool empty() const { return lo.empty(); }
    void validate(std::size_t dim, const std::string& what, bool allow_degenerate = false) const;
};

struct Scenario {
    std::string profile = "constant";  // kind-specific name, or "constant"
    Vector boundary0;                  // empty: profile default
    Box init_box;                      // empty: environment test box
};

/// Linear description of a node's goal set: residual(x) = P (x - x0) is the
/// orthogonal deviation from the goal manifold, so |residual| is the goal
/// distance and residual == 0 exactly on the goal set.
struct GoalFrame {
    Matrix projector;
    Vector offset;

    Vector residual(std::span<const double> x) const;
};

class Environment {
public:
    virtual ~Environment() = default;

    EnvKind kind() const { return kind_; }
    const NetworkTopology& topology() const { return topo_; }
    int n_nodes() const { return topo_.n; }
    int state_dim(int i) const { return topo_.state_dim[i]; }
    int control_dim(int i) const { return topo_.control_dim[i]; }
    double dt() const { return dt_; }
    int horizon() const { return horizon_; }
    const Box& train_box() const { return train_box_; }
    const Box& test_box() const { return test_box_; }
    const std::vector<Vector>& uncertainty_vertices() const { return vertices_; }
    const Vector& control_lo() const { return control_lo_; }
    const Vector& control_hi() const { return control_hi_; }
    double reward_offset() const { return reward_offset_; }
    virtual std::size_t boundary_dim() const = 0;

    /// f_i(x_i, x_{N_i}, u_i) with boundary values read from state.boundary.
    virtual Vector node_derivative(int i, const NetworkState& s, std::span<const double> u) const = 0;
    /// df_i/du_i (the control-affine input matrix).
    virtual Matrix control_matrix(int i, const NetworkState& s) const = 0;
    virtual const GoalFrame& goal_frame(int i) const = 0;
    virtual void sample_goal_node(int i, Rng& rng, Vector& out) const = 0;

    virtual Vector initial_boundary(const Scenario& scen) const = 0;
    virtual void advance_boundary(Vector& boundary, double t, const Scenario& scen) const = 0;

    double dist_to_goal(int i, std::span<const double> x) const;

    Vector clamp_control(int i, std::span<const double> u) const;

    /// Uniform draw from the convex hull of the uncertainty vertices.
    Vector sample_beta(Rng& rng) const;
    /// Node states uniform in the train box, boundary drawn by sample_beta.
    NetworkState sample_state(Rng& rng) const;
    std::vector<NetworkState> sample_states(int count, Rng& rng) const;
    std::vector<NetworkState> sample_goal_states(int count, Rng& rng) const;
    /// Initial condition for a rollout: scenario init box + profile boundary.
    NetworkState sample_initial(const Scenario& scen, Rng& rng) const;

    /// Explicit Euler step. Controls are clamped to the actuation bounds.
    /// Without a scenario the boundary stays constant. Returns false (and
    /// leaves the state untouched) when the next state would be non-finite.
    bool step_euler(NetworkState& s, const std::vector<Vector>& controls, const Scenario* scen = nullptr) const;

protected:
    EnvKind kind_;
    NetworkTopology topo_;
    double dt_ = 0.01;
    int horizon_ = 500;
    Box train_box_, test_box_;
    std::vector<Vector> vertices_;
    Vector control_lo_, control_hi_;
    double reward_offset_ = 10.0;

    void validate_common() const;
};

/// Truck string. Node state [p_front, p_back, v]; control [accel]. The lead
/// vehicle velocity is the boundary value; the trailing vehicle mirrors it.
class PlatoonEnv : public Environment {
public:
    struct Params {
        int n = 5;
        double dt = 0.01;
        int horizon = 500;
        double accel_limit = 5.0;
        Box train_box;                       // default [0,2]x[0,2]x[0,4]
        Box test_box;                        // default [0.6,1.4]^2 x [1.0,1.2]
        std::vector<Vector> vertices = {{1.0}, {3.0}};  // lead-velocity bounds
        double reward_offset = 10.0;
    };

    explicit PlatoonEnv(Params p);

    std::size_t boundary_dim() const override { return 1; }
    Vector node_derivative(int i, const NetworkState& s, std::span<const double> u) const override;
    Matrix control_matrix(int i, const NetworkState& s) const override;
    const GoalFrame& goal_frame(int i) const override;
    void sample_goal_node(int i, Rng& rng, Vector& out) const override;
    Vector initial_boundary(const Scenario& scen) const override;
    void advance_boundary(Vector& boundary, double t, const Scenario& scen) const override;

private:
    GoalFrame frame_;
};

/// Planar drones holding a mesh formation. Node state
/// [p_l, p_r, p_u, p_d, theta, v_x, v_y, omega]; controls are the two
/// propeller forces. Grid-edge neighbor slots read the reference-trajectory
/// velocity from the boundary values (v_ref_x, v_ref_y).
class DroneEnv : public Environment {
public:
    struct Params {
        int rows = 2;
        int cols = 2;
        double dt = 0.03;
        int horizon = 500;
        double mass = 1.0;
        double inertia = 0.01;
        double arm = 0.25;
        double gravity = 9.81;
        Box train_box;  // default p in [0,5], theta in [-pi/2,pi/2], vx in [-7,7], vy in [-5,5], omega in [-pi/2,pi/2]
        Box test_box;
        std::vector<Vector> vertices = {{0.5, 0.0}, {1.5, 0.0}};  // reference-velocity hull
        double reward_offset = 100.0;
    };

    explicit DroneEnv(Params p);

    int rows() const { return params_.rows; }
    int cols() const { return params_.cols; }
    double mass() const { return params_.mass; }
    double inertia() const { return params_.inertia; }
    double arm() const { return params_.arm; }
    double gravity() const { return params_.gravity; }
    // Directional neighbors; -1 marks a grid edge (reference slot).
    int left_of(int i) const { return left_[i]; }
    int right_of(int i) const { return right_[i]; }
    int up_of(int i) const { return up_[i]; }
    int down_of(int i) const { return down_[i]; }

    std::size_t boundary_dim() const override { return 2; }
    Vector node_derivative(int i, const NetworkState& s, std::span<const double> u) const override;
    Matrix control_matrix(int i, const NetworkState& s) const override;
    const GoalFrame& goal_frame(int i) const override;
    void sample_goal_node(int i, Rng& rng, Vector& out) const override;
    Vector initial_boundary(const Scenario& scen) const override;
    void advance_boundary(Vector& boundary, double t, const Scenario& scen) const override;

private:
    Params params_;
    GoalFrame frame_;
    // Directional neighbor ids; -1 marks a grid edge (reference slot).
    std::vector<int> left_, right_, up_, down_;
};

/// Interconnected microgrids. Node state [delta, E] (voltage angle and
/// magnitude); control [u_P, u_Q]. Synthetic ring-with-chords admittance;
/// the structure follows the angle/magnitude droop-augmented swing form.
class MicrogridEnv : public Environment {
public:
    struct Edge {
        int i = 0, j = 0;
        double y = 1.0;      // admittance magnitude Y_ij = Y_ji
        double sigma = 0.1;  // admittance angle
    };

    struct Params {
        int n = 5;
        double dt = 0.01;
        int horizon = 500;
        double control_limit = 5.0;
        Vector m_angle, m_volt;    // inertia coefficients, default 1
        Vector d_angle, d_volt;    // droop coefficients, default 1
        Vector delta_ref, e_ref;   // default 0 (zero-centered references)
        Vector g_self, b_self;     // default 0.2 / 0.3
        std::vector<Edge> edges;   // default ring + two chords
        Vector p_ref, q_ref;       // empty: computed so the reference is an equilibrium
        Box train_box;             // default [-3,3]^2
        Box test_box;              // default [-2,2] x [-3,3]
        double reward_offset = 10.0;
    };

    explicit MicrogridEnv(Params p);

    const Params& params() const { return params_; }

    std::size_t boundary_dim() const override { return 0; }
    Vector node_derivative(int i, const NetworkState& s, std::span<const double> u) const override;
    Matrix control_matrix(int i, const NetworkState& s) const override;
    const GoalFrame& goal_frame(int i) const override;
    void sample_goal_node(int i, Rng& rng, Vector& out) const override;
    Vector initial_boundary(const Scenario& scen) const override;
    void advance_boundary(Vector& boundary, double t, const Scenario& scen) const override;

private:
    Params params_;
    std::vector<GoalFrame> frames_;
    // admittance lookup aligned with topology neighbor lists
    std::vector<std::vector<double>> y_, sigma_;
};

}  // namespace iss
