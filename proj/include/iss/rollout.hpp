#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "iss/baselines.hpp"
#include "iss/certificate.hpp"
#include "iss/environment.hpp"

namespace iss {

/// Any per-node control law over the network state. Learned policies read
/// only their own node's state; classical baselines also read the locally
/// observed neighbor values.
using Controller = std::function<Vector(int node, const NetworkState& state)>;

Controller policy_controller(const CertificateBundle& bundle);
Controller baseline_controller(std::shared_ptr<NominalController> ctrl);

struct RolloutTrace {
    std::vector<NetworkState> states;           // horizon+1 entries (unless aborted)
    std::vector<std::vector<Vector>> controls;  // per executed step
    std::vector<Vector> node_dist;              // per state, per node
    std::vector<Vector> node_v;                 // per state, per node (empty without a bundle)
    Vector reward;                              // per executed step: reward_offset - error
    bool aborted = false;
    int abort_step = -1;

    int n_steps() const { return static_cast<int>(controls.size()); }
};

/// Closed-loop simulation over the environment horizon; the scenario drives
/// the boundary and the initial-state draw (seeded). When `v_source` is
/// given, per-node certificate values are recorded along the trace.
RolloutTrace rollout(const Environment& env, const Controller& controller, const Scenario& scenario,
                     std::uint64_t seed, const CertificateBundle* v_source = nullptr);

struct RolloutMetrics {
    Vector error_series;  // per state: summed node goal distances
    double cumulative_reward = 0.0;
    double mean_error = 0.0;
    double final_error = 0.0;
    bool aborted = false;
};

RolloutMetrics metrics(const RolloutTrace& trace);
/// Mean of the error series over its last `k` entries.
double mean_error_last(const RolloutTrace& trace, int k);

struct CompareRow {
    std::string name;
    std::uint64_t seed = 0;
    double cumulative_reward = 0.0;
    double mean_error = 0.0;
    double final_error = 0.0;
    bool failed = false;
};

struct CompareAggregate {
    std::string name;
    double reward_mean = 0.0, reward_std = 0.0;
    double error_mean = 0.0, error_std = 0.0;
};

struct CompareResult {
    std::vector<CompareRow> rows;
    std::vector<CompareAggregate> aggregates;
    // Per-step mean/std of the error series per controller, for curve export.
    std::vector<std::string> names;
    std::vector<Vector> curve_mean;
    std::vector<Vector> curve_std;
};

/// Rollouts for every (controller, seed) pair. Each rollout draws from an
/// RNG derived only from its own seed, so `parallel` execution is
/// bitwise-identical to sequential.
CompareResult compare(const Environment& env, const std::vector<std::pair<std::string, Controller>>& controllers,
                      const Scenario& scenario, std::span<const std::uint64_t> seeds, bool parallel = false);

void write_trace_csv(const std::string& path, const Environment& env, const RolloutTrace& trace);
void write_compare_csv(const std::string& path, const CompareResult& result);
void write_curves_csv(const std::string& path, const CompareResult& result);

}  // namespace iss
