#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "iss/certificate.hpp"
#include "iss/environment.hpp"
#include "iss/rollout.hpp"

namespace iss {

/// Pure per-node evaluation of the implication condition at one state:
/// premise  V_i >= max_j gain(V_j) + margin_a
/// conclusion  grad V_i . f_i <= -alpha_i V_i + margin_b
struct NodeClassification {
    bool premise = false;
    bool conclusion = false;
    double v = 0.0;
    double gain_term = 0.0;      // max over neighbors of gain(V_j); 0 when isolated
    double lie = 0.0;            // grad V_i . f_i under the bundled policy
    double decrease_residual = 0.0;  // lie + alpha * v
};

NodeClassification classify_node(const CertificateBundle& bundle, const Environment& env, const NetworkState& state,
                                 int node, double margin_a, double margin_b);

struct NodeCheckStats {
    long samples = 0;
    long premise_true = 0;
    long violations = 0;

    double conditional_rate() const {
        return premise_true > 0 ? static_cast<double>(violations) / static_cast<double>(premise_true) : 0.0;
    }
    double unconditional_rate() const {
        return samples > 0 ? static_cast<double>(violations) / static_cast<double>(samples) : 0.0;
    }
};

struct Counterexample {
    int node = -1;
    NetworkState state;
    double v = 0.0;
    double gain_term = 0.0;
    double lie = 0.0;
    double decrease_residual = 0.0;
};

struct CheckReport {
    long n_samples = 0;
    double margin_a = 0.0, margin_b = 0.0, delta_off = 0.0;
    std::vector<NodeCheckStats> per_node;
    double goal_zero_mean = 0.0;   // mean |V| over fresh goal samples
    double positivity_min = 0.0;   // min V among off-goal samples (dist > delta_off)
    long n_goal_samples = 0;
    long n_offgoal_samples = 0;
    std::vector<Counterexample> worst;                       // largest decrease residuals
    std::vector<std::pair<double, double>> min_v_by_distance;  // (bin upper edge, min V)
    std::vector<std::string> unchecked_assumptions;

    double conditional_rate() const;    // pooled over nodes
    double unconditional_rate() const;  // pooled over nodes
    double max_node_conditional_rate() const;
};

/// Sampling check of the certificate conditions. States are drawn from the
/// train box; the uncertain boundary parameter is drawn from the vertex hull
/// unless `pinned_beta` fixes it. Reports, never asserts.
CheckReport check_certificate(const CertificateBundle& bundle, const Environment& env, long n_samples,
                              double margin_a, double margin_b, double delta_off, std::uint64_t seed,
                              long n_goal_samples = 10000, const Vector* pinned_beta = nullptr,
                              std::size_t max_counterexamples = 10);

/// Exhaustive grid enumeration of the same predicate over the train box
/// (cell centers, per-axis counts across the flattened network state).
struct GridSpec {
    std::vector<int> per_axis;  // length: sum of node state dims
    Vector beta;                // empty: first uncertainty vertex

    long total_points() const;
};

NetworkState oracle_grid_state(const Environment& env, const GridSpec& grid, long flat_index);

/// Exact set of violating (flat grid index, node) pairs, enumerated in order.
std::vector<std::pair<long, int>> implication_oracle(const CertificateBundle& bundle, const Environment& env,
                                                     const GridSpec& grid, double margin_a, double margin_b);

struct RobustReport {
    std::vector<Vector> betas;  // vertices first, then interior combinations
    std::vector<CheckReport> reports;
    std::size_t n_vertices = 0;
    double max_vertex_conditional_rate = 0.0;
    double max_interior_conditional_rate = 0.0;
    double affine_residual = 0.0;  // max deviation of f from beta-affineness
    std::string notice;
};

/// Vertex-pinned checks plus interior convex combinations; every beta is
/// checked against the same state sample (shared seed) so rates compare
/// directly. Also measures how far the dynamics deviate from affinity in
/// the uncertain parameter, which the vertex argument relies on.
RobustReport check_robust_vertices(const CertificateBundle& bundle, const Environment& env, long n_samples,
                                   int n_interior, std::uint64_t seed, double margin_a = 0.0, double margin_b = 0.0,
                                   double delta_off = 1e-2);

struct MonitorReport {
    double decrease_fraction = 1.0;  // fraction of counted steps with V_{t+1} <= V_t (1 + tol)
    double max_single_step_increase = 0.0;
    double decay_rate_fit = 0.0;  // least-squares rate of ln V over counted steps
    long counted_steps = 0;
    double eta = 0.0;
    double tol = 0.0;
    bool recorded_consistent = true;  // recomputed max-V matches the trace recording
};

/// Max-composed certificate value along a rollout. Steps inside the
/// eta-neighborhood of the goal (eta_frac of the initial total distance) are
/// excluded from the decrease statistics.
MonitorReport monitor_composed_v(const RolloutTrace& trace, const CertificateBundle& bundle, double tol = 1e-3,
                                 double eta_frac = 0.05);

/// Composition helper: per-step max over recorded per-node values.
Vector composed_v_series(std::span<const Vector> node_v);

nlohmann::json to_json(const CheckReport& report);
nlohmann::json to_json(const RobustReport& report);
nlohmann::json to_json(const MonitorReport& report);

}  // namespace iss
