#include "iss/checker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "iss/errors.hpp"

namespace iss {

NodeClassification classify_node(const CertificateBundle& bundle, const Environment& env, const NetworkState& state,
                                 int node, double margin_a, double margin_b) {
    const CertificateGroup& grp = bundle.group_of(node);
    NodeClassification c;
    c.v = v_eval(grp.cert, state.node[node]);
    bool first = true;
    for (int j : env.topology().neighbors[node]) {
        const double g = gain_eval(grp.cert.gain_k, v_eval(bundle.group_of(j).cert, state.node[j]));
        if (first || g > c.gain_term) c.gain_term = g;
        first = false;
    }
    // Margin tightens the premise so larger margins only shrink the checked set.
    c.premise = c.v >= c.gain_term + margin_a;
    const Vector u = policy_eval(grp.policy, state.node[node]);
    const Vector f = env.node_derivative(node, state, u);
    c.lie = dot(v_grad(grp.cert, state.node[node]), f);
    c.decrease_residual = c.lie + grp.cert.alpha * c.v;
    c.conclusion = c.lie <= -grp.cert.alpha * c.v + margin_b;
    return c;
}

double CheckReport::conditional_rate() const {
    long premise = 0, violations = 0;
    for (const NodeCheckStats& s : per_node) {
        premise += s.premise_true;
        violations += s.violations;
    }
    return premise > 0 ? static_cast<double>(violations) / static_cast<double>(premise) : 0.0;
}

double CheckReport::unconditional_rate() const {
    long samples = 0, violations = 0;
    for (const NodeCheckStats& s : per_node) {
        samples += s.samples;
        violations += s.violations;
    }
    return samples > 0 ? static_cast<double>(violations) / static_cast<double>(samples) : 0.0;
}

double CheckReport::max_node_conditional_rate() const {
    double rate = 0.0;
    for (const NodeCheckStats& s : per_node) rate = std::max(rate, s.conditional_rate());
    return rate;
}

CheckReport check_certificate(const CertificateBundle& bundle, const Environment& env, long n_samples,
                              double margin_a, double margin_b, double delta_off, std::uint64_t seed,
                              long n_goal_samples, const Vector* pinned_beta, std::size_t max_counterexamples) {
    if (n_samples < 1) throw ConfigError("check_certificate: need at least one sample");
    if (margin_a < 0.0 || margin_b < 0.0) throw ConfigError("check_certificate: margins must be non-negative");
    const int n = env.n_nodes();
    CheckReport report;
    report.n_samples = n_samples;
    report.margin_a = margin_a;
    report.margin_b = margin_b;
    report.delta_off = delta_off;
    report.per_node.assign(n, NodeCheckStats{});
    report.unchecked_assumptions = {
        "class-Kinfty sandwich bounds on V (condition (1)) are not certified from samples;"
        " the report shows goal-zero and off-goal positivity proxies instead"};

    constexpr int kBins = 20;
    double max_dist = 0.0;
    std::vector<std::pair<double, double>> dist_v;
    dist_v.reserve(static_cast<std::size_t>(n_samples) * n);

    Rng rng(derive_seed(seed, stream::verify));
    report.positivity_min = std::numeric_limits<double>::infinity();
    for (long k = 0; k < n_samples; ++k) {
        NetworkState s = env.sample_state(rng);
        if (pinned_beta != nullptr) s.boundary = *pinned_beta;
        for (int i = 0; i < n; ++i) {
            const NodeClassification c = classify_node(bundle, env, s, i, margin_a, margin_b);
            NodeCheckStats& stats = report.per_node[i];
            stats.samples += 1;
            if (c.premise) {
                stats.premise_true += 1;
                if (!c.conclusion) {
                    stats.violations += 1;
                    const bool full = report.worst.size() >= max_counterexamples;
                    if (!full || c.decrease_residual > report.worst.back().decrease_residual) {
                        Counterexample ce{i, s, c.v, c.gain_term, c.lie, c.decrease_residual};
                        report.worst.push_back(std::move(ce));
                        std::sort(report.worst.begin(), report.worst.end(),
                                  [](const Counterexample& a, const Counterexample& b) {
                                      return a.decrease_residual > b.decrease_residual;
                                  });
                        if (report.worst.size() > max_counterexamples) report.worst.pop_back();
                    }
                }
            }
            const double dist = env.dist_to_goal(i, s.node[i]);
            if (dist > delta_off) {
                report.n_offgoal_samples += 1;
                report.positivity_min = std::min(report.positivity_min, c.v);
            }
            dist_v.emplace_back(dist, c.v);
            max_dist = std::max(max_dist, dist);
        }
    }
    if (report.n_offgoal_samples == 0) report.positivity_min = 0.0;

    report.min_v_by_distance.assign(kBins, {0.0, std::numeric_limits<double>::infinity()});
    for (int b = 0; b < kBins; ++b) report.min_v_by_distance[b].first = max_dist * (b + 1) / kBins;
    for (const auto& [dist, v] : dist_v) {
        int b = max_dist > 0.0 ? static_cast<int>(dist / max_dist * kBins) : 0;
        b = std::clamp(b, 0, kBins - 1);
        report.min_v_by_distance[b].second = std::min(report.min_v_by_distance[b].second, v);
    }
    for (auto& [edge, v] : report.min_v_by_distance)
        if (!std::isfinite(v)) v = 0.0;

    if (n_goal_samples > 0) {
        const auto goals = env.sample_goal_states(static_cast<int>(n_goal_samples), rng);
        double total = 0.0;
        for (const NetworkState& s : goals)
            for (int i = 0; i < n; ++i) total += std::fabs(v_eval(bundle.group_of(i).cert, s.node[i]));
        report.goal_zero_mean = total / (static_cast<double>(n_goal_samples) * n);
        report.n_goal_samples = n_goal_samples;
    }
    return report;
}

long GridSpec::total_points() const {
    long total = 1;
    for (int c : per_axis) {
        if (c < 1) throw ConfigError("grid spec: per-axis counts must be positive");
        if (total > 1000000 / c + 1) return 1000001;  // early-out before overflow
        total *= c;
    }
    return total;
}

NetworkState oracle_grid_state(const Environment& env, const GridSpec& grid, long flat_index) {
    NetworkState s;
    s.node.resize(env.n_nodes());
    const Box& box = env.train_box();
    long rem = flat_index;
    std::size_t axis = 0;
    for (int i = 0; i < env.n_nodes(); ++i) {
        s.node[i].resize(env.state_dim(i));
        for (int a = 0; a < env.state_dim(i); ++a, ++axis) {
            const int count = grid.per_axis[axis];
            const long idx = rem % count;
            rem /= count;
            const double lo = box.lo[a];
            const double hi = box.hi[a];
            s.node[i][a] = lo + (static_cast<double>(idx) + 0.5) * (hi - lo) / count;
        }
    }
    s.boundary = grid.beta.empty() ? env.uncertainty_vertices().front() : grid.beta;
    s.t = 0.0;
    return s;
}

std::vector<std::pair<long, int>> implication_oracle(const CertificateBundle& bundle, const Environment& env,
                                                     const GridSpec& grid, double margin_a, double margin_b) {
    std::size_t total_axes = 0;
    for (int i = 0; i < env.n_nodes(); ++i) total_axes += static_cast<std::size_t>(env.state_dim(i));
    if (grid.per_axis.size() != total_axes) throw ConfigError("implication_oracle: grid axis count mismatch");
    const long total = grid.total_points();
    if (total > 1000000) throw ConfigError("implication_oracle: grid too large (over 1e6 points)");

    std::vector<std::pair<long, int>> violating;
    for (long idx = 0; idx < total; ++idx) {
        const NetworkState s = oracle_grid_state(env, grid, idx);
        for (int i = 0; i < env.n_nodes(); ++i) {
            const NodeClassification c = classify_node(bundle, env, s, i, margin_a, margin_b);
            if (c.premise && !c.conclusion) violating.emplace_back(idx, i);
        }
    }
    return violating;
}

RobustReport check_robust_vertices(const CertificateBundle& bundle, const Environment& env, long n_samples,
                                   int n_interior, std::uint64_t seed, double margin_a, double margin_b,
                                   double delta_off) {
    const auto& vertices = env.uncertainty_vertices();
    RobustReport report;
    report.n_vertices = vertices.size();
    if (vertices.size() < 2) {
        report.notice = "single uncertainty vertex: robust check reduces to the plain certificate check";
        report.betas.push_back(vertices.front());
        report.reports.push_back(check_certificate(bundle, env, n_samples, margin_a, margin_b, delta_off, seed, 0,
                                                   &vertices.front()));
        report.max_vertex_conditional_rate = report.reports.front().conditional_rate();
        return report;
    }

    for (const Vector& beta : vertices) {
        report.betas.push_back(beta);
        // Shared seed: every beta is checked against identical state samples.
        report.reports.push_back(
            check_certificate(bundle, env, n_samples, margin_a, margin_b, delta_off, seed, 0, &beta));
        report.max_vertex_conditional_rate =
            std::max(report.max_vertex_conditional_rate, report.reports.back().conditional_rate());
    }
    Rng combo_rng(derive_seed(seed, stream::verify + 17));
    for (int k = 0; k < n_interior; ++k) {
        const Vector beta = env.sample_beta(combo_rng);
        report.betas.push_back(beta);
        report.reports.push_back(
            check_certificate(bundle, env, n_samples, margin_a, margin_b, delta_off, seed, 0, &beta));
        report.max_interior_conditional_rate =
            std::max(report.max_interior_conditional_rate, report.reports.back().conditional_rate());
    }

    // Affineness of f in the boundary parameter over random states, controls,
    // vertex pairs, and mixing weights.
    Rng aff_rng(derive_seed(seed, stream::verify + 31));
    constexpr int kAffineSamples = 100;
    for (int k = 0; k < kAffineSamples; ++k) {
        NetworkState s = env.sample_state(aff_rng);
        const std::size_t a_idx = aff_rng.index(vertices.size());
        std::size_t b_idx = aff_rng.index(vertices.size());
        if (b_idx == a_idx) b_idx = (b_idx + 1) % vertices.size();
        const double lam = aff_rng.uniform();
        Vector beta_mix(env.boundary_dim());
        for (std::size_t a = 0; a < beta_mix.size(); ++a)
            beta_mix[a] = lam * vertices[a_idx][a] + (1.0 - lam) * vertices[b_idx][a];
        for (int i = 0; i < env.n_nodes(); ++i) {
            Vector u(env.control_dim(i));
            for (std::size_t a = 0; a < u.size(); ++a) u[a] = aff_rng.uniform(env.control_lo()[a], env.control_hi()[a]);
            s.boundary = beta_mix;
            const Vector f_mix = env.node_derivative(i, s, u);
            s.boundary = vertices[a_idx];
            const Vector f_a = env.node_derivative(i, s, u);
            s.boundary = vertices[b_idx];
            const Vector f_b = env.node_derivative(i, s, u);
            for (std::size_t a = 0; a < f_mix.size(); ++a) {
                const double res = std::fabs(f_mix[a] - lam * f_a[a] - (1.0 - lam) * f_b[a]);
                report.affine_residual = std::max(report.affine_residual, res);
            }
        }
    }
    return report;
}

Vector composed_v_series(std::span<const Vector> node_v) {
    Vector out;
    out.reserve(node_v.size());
    for (const Vector& vals : node_v) {
        double m = 0.0;
        for (std::size_t i = 0; i < vals.size(); ++i) m = i == 0 ? vals[i] : std::max(m, vals[i]);
        out.push_back(m);
    }
    return out;
}

MonitorReport monitor_composed_v(const RolloutTrace& trace, const CertificateBundle& bundle, double tol,
                                 double eta_frac) {
    if (trace.states.size() < 2) throw ConfigError("monitor_composed_v: trace needs at least two steps");
    MonitorReport report;
    report.tol = tol;

    const std::size_t n_states = trace.states.size();
    const int n = static_cast<int>(trace.states.front().node.size());
    std::vector<Vector> node_v(n_states, Vector(n, 0.0));
    for (std::size_t t = 0; t < n_states; ++t)
        for (int i = 0; i < n; ++i) node_v[t][i] = v_eval(bundle.group_of(i).cert, trace.states[t].node[i]);
    const Vector composed = composed_v_series(node_v);
    if (!trace.node_v.empty()) {
        const Vector recorded = composed_v_series(trace.node_v);
        for (std::size_t t = 0; t < n_states && report.recorded_consistent; ++t)
            if (recorded[t] != composed[t]) report.recorded_consistent = false;
    }

    Vector total_dist(n_states, 0.0);
    for (std::size_t t = 0; t < n_states; ++t)
        for (double d : trace.node_dist[t]) total_dist[t] += d;
    report.eta = eta_frac * total_dist.front();

    long decreased = 0;
    double sum_t = 0.0, sum_lnv = 0.0, sum_tt = 0.0, sum_tlnv = 0.0;
    long n_fit = 0;
    for (std::size_t t = 0; t + 1 < n_states; ++t) {
        if (total_dist[t] <= report.eta) continue;
        report.counted_steps += 1;
        if (composed[t + 1] <= composed[t] * (1.0 + tol)) decreased += 1;
        report.max_single_step_increase = std::max(report.max_single_step_increase, composed[t + 1] - composed[t]);
        if (composed[t] > 0.0) {
            const double time = trace.states[t].t;
            const double lnv = std::log(composed[t]);
            sum_t += time;
            sum_lnv += lnv;
            sum_tt += time * time;
            sum_tlnv += time * lnv;
            n_fit += 1;
        }
    }
    if (report.counted_steps > 0)
        report.decrease_fraction = static_cast<double>(decreased) / static_cast<double>(report.counted_steps);
    if (n_fit > 1) {
        const double denom = n_fit * sum_tt - sum_t * sum_t;
        if (std::fabs(denom) > 1e-30) report.decay_rate_fit = -(n_fit * sum_tlnv - sum_t * sum_lnv) / denom;
    }
    return report;
}

namespace {

nlohmann::json state_to_json(const NetworkState& s) {
    nlohmann::json j;
    j["node"] = s.node;
    j["boundary"] = s.boundary;
    j["t"] = s.t;
    return j;
}

}  // namespace

nlohmann::json to_json(const CheckReport& report) {
    nlohmann::json j;
    j["n_samples"] = report.n_samples;
    j["margin_a"] = report.margin_a;
    j["margin_b"] = report.margin_b;
    j["delta_off"] = report.delta_off;
    j["goal_zero_mean"] = report.goal_zero_mean;
    j["positivity_min"] = report.positivity_min;
    j["n_goal_samples"] = report.n_goal_samples;
    j["n_offgoal_samples"] = report.n_offgoal_samples;
    j["conditional_rate"] = report.conditional_rate();
    j["unconditional_rate"] = report.unconditional_rate();
    nlohmann::json nodes = nlohmann::json::array();
    for (const NodeCheckStats& s : report.per_node) {
        nodes.push_back({{"samples", s.samples},
                         {"premise_true", s.premise_true},
                         {"violations", s.violations},
                         {"conditional_rate", s.conditional_rate()},
                         {"unconditional_rate", s.unconditional_rate()}});
    }
    j["per_node"] = nodes;
    nlohmann::json worst = nlohmann::json::array();
    for (const Counterexample& ce : report.worst) {
        worst.push_back({{"node", ce.node},
                         {"state", state_to_json(ce.state)},
                         {"v", ce.v},
                         {"gain_term", ce.gain_term},
                         {"lie", ce.lie},
                         {"decrease_residual", ce.decrease_residual}});
    }
    j["worst_counterexamples"] = worst;
    nlohmann::json scatter = nlohmann::json::array();
    for (const auto& [edge, v] : report.min_v_by_distance) scatter.push_back({{"dist_upper", edge}, {"min_v", v}});
    j["min_v_by_distance"] = scatter;
    j["unchecked_assumptions"] = report.unchecked_assumptions;
    return j;
}

nlohmann::json to_json(const RobustReport& report) {
    nlohmann::json j;
    j["n_vertices"] = report.n_vertices;
    j["max_vertex_conditional_rate"] = report.max_vertex_conditional_rate;
    j["max_interior_conditional_rate"] = report.max_interior_conditional_rate;
    j["affine_residual"] = report.affine_residual;
    if (!report.notice.empty()) j["notice"] = report.notice;
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t k = 0; k < report.reports.size(); ++k) {
        entries.push_back({{"beta", report.betas[k]},
                           {"kind", k < report.n_vertices ? "vertex" : "interior"},
                           {"report", to_json(report.reports[k])}});
    }
    j["checks"] = entries;
    return j;
}

nlohmann::json to_json(const MonitorReport& report) {
    return nlohmann::json{{"decrease_fraction", report.decrease_fraction},
                          {"max_single_step_increase", report.max_single_step_increase},
                          {"decay_rate_fit", report.decay_rate_fit},
                          {"counted_steps", report.counted_steps},
                          {"eta", report.eta},
                          {"tol", report.tol},
                          {"recorded_consistent", report.recorded_consistent}};
}

}  // namespace iss
