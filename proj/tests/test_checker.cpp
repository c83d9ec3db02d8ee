#include <doctest.h>

#include <cmath>
#include <set>

#include "iss/checker.hpp"
#include "iss/errors.hpp"

using namespace iss;

namespace {

void zero_group(CertificateGroup& grp) {
    auto zero_net = [](Mlp& net) {
        for (Matrix& w : net.weights) w.data.assign(w.data.size(), 0.0);
        for (Vector& b : net.biases) b.assign(b.size(), 0.0);
    };
    zero_net(grp.cert.p_net);
    zero_net(grp.cert.q_net);
    grp.cert.s_mat.data.assign(grp.cert.s_mat.data.size(), 0.0);
}

}  // namespace

TEST_CASE("zero certificates never violate the implication") {
    PlatoonEnv env{{}};
    CertificateBundle bundle = make_bundle(env, 8, 2, 1.0, 0);
    for (CertificateGroup& g : bundle.groups) zero_group(g);
    const CheckReport report = check_certificate(bundle, env, 500, 0.0, 0.0, 1e-2, 0, 100);
    for (const NodeCheckStats& s : report.per_node) {
        CHECK(s.premise_true == s.samples);  // 0 >= 0 everywhere
        CHECK(s.violations == 0);
    }
    CHECK(report.conditional_rate() == 0.0);
    CHECK(report.goal_zero_mean == 0.0);
}

TEST_CASE("constant positive certificates violate wherever the premise holds") {
    // q = ReLU(0 x + 1) makes V constant 1 with zero gradient, so the
    // conclusion fails everywhere while the premise always holds.
    MicrogridEnv::Params p;
    p.n = 1;
    MicrogridEnv env{p};
    CertificateBundle bundle = make_bundle(env, 8, 2, 0.5, 0);
    zero_group(bundle.groups[0]);
    bundle.groups[0].cert.q_net.biases.back()[0] = 1.0;
    const CheckReport report = check_certificate(bundle, env, 300, 0.0, 0.0, 1e-2, 0, 0);
    CHECK(report.per_node[0].premise_true == 300);
    CHECK(report.per_node[0].violations == 300);
    CHECK(report.conditional_rate() == 1.0);
    CHECK(report.positivity_min == doctest::Approx(1.0));
}

TEST_CASE("counterexamples reproduce bit for bit") {
    MicrogridEnv env{{}};
    CertificateBundle bundle = make_bundle(env, 8, 2, 0.5, 3);
    const CheckReport report = check_certificate(bundle, env, 400, 0.0, 0.0, 1e-2, 9, 0);
    REQUIRE(!report.worst.empty());
    for (const Counterexample& ce : report.worst) {
        const NodeClassification c = classify_node(bundle, env, ce.state, ce.node, 0.0, 0.0);
        CHECK(c.premise);
        CHECK(!c.conclusion);
        CHECK(c.v == ce.v);
        CHECK(c.lie == ce.lie);
        CHECK(c.decrease_residual == ce.decrease_residual);
    }
}

TEST_CASE("violations are monotone in the margins") {
    MicrogridEnv env{{}};
    CertificateBundle bundle = make_bundle(env, 8, 2, 0.5, 5);
    long prev_viol = -1;
    for (const double margin_b : {0.0, 0.5, 2.0, 8.0}) {
        const CheckReport report = check_certificate(bundle, env, 300, 0.0, margin_b, 1e-2, 4, 0);
        long viol = 0;
        for (const NodeCheckStats& s : report.per_node) viol += s.violations;
        if (prev_viol >= 0) CHECK(viol <= prev_viol);
        prev_viol = viol;
    }
    prev_viol = -1;
    for (const double margin_a : {0.0, 0.5, 2.0, 8.0}) {
        const CheckReport report = check_certificate(bundle, env, 300, margin_a, 0.0, 1e-2, 4, 0);
        long viol = 0;
        for (const NodeCheckStats& s : report.per_node) viol += s.violations;
        if (prev_viol >= 0) CHECK(viol <= prev_viol);
        prev_viol = viol;
    }
}

TEST_CASE("implication oracle") {
    PlatoonEnv env{{}};
    SUBCASE("zero certificate yields the empty violating set") {
        CertificateBundle bundle = make_bundle(env, 8, 2, 1.0, 0);
        for (CertificateGroup& g : bundle.groups) zero_group(g);
        GridSpec grid;
        grid.per_axis.assign(15, 1);
        CHECK(implication_oracle(bundle, env, grid, 0.0, 0.0).empty());
    }
    SUBCASE("one point per axis evaluates exactly one network state") {
        GridSpec grid;
        grid.per_axis.assign(15, 1);
        CHECK(grid.total_points() == 1);
        const NetworkState s = oracle_grid_state(env, grid, 0);
        for (int i = 0; i < 5; ++i) {
            CHECK(s.node[i][0] == doctest::Approx(1.0));  // box midpoints
            CHECK(s.node[i][2] == doctest::Approx(2.0));
        }
    }
    SUBCASE("grid too large is rejected") {
        GridSpec grid;
        grid.per_axis.assign(15, 3);  // 3^15 > 1e6
        CertificateBundle bundle = make_bundle(env, 8, 2, 1.0, 0);
        CHECK_THROWS_AS(implication_oracle(bundle, env, grid, 0.0, 0.0), ConfigError);
    }
    SUBCASE("sampled classifier on the grid points reproduces the oracle exactly") {
        const CertificateBundle bundle = make_bundle(env, 8, 2, 1.0, 77);
        GridSpec grid;
        grid.per_axis = {2, 2, 2, 2, 2, 2, 1, 1, 2, 2, 2, 1, 2, 2, 1};
        const long total = grid.total_points();
        const auto oracle = implication_oracle(bundle, env, grid, 0.0, 0.0);
        std::set<std::pair<long, int>> expected(oracle.begin(), oracle.end());
        std::set<std::pair<long, int>> sampled;
        for (long idx = 0; idx < total; ++idx) {
            const NetworkState s = oracle_grid_state(env, grid, idx);
            for (int i = 0; i < 5; ++i) {
                const NodeClassification c = classify_node(bundle, env, s, i, 0.0, 0.0);
                if (c.premise && !c.conclusion) sampled.insert({idx, i});
            }
        }
        CHECK(sampled == expected);
    }
}

TEST_CASE("robust vertex checking") {
    PlatoonEnv env{{}};
    const CertificateBundle bundle = make_bundle(env, 8, 2, 1.0, 13);

    SUBCASE("platoon dynamics are affine in the lead velocity") {
        const RobustReport report = check_robust_vertices(bundle, env, 50, 2, 0);
        CHECK(report.affine_residual <= 1e-12);
        CHECK(report.n_vertices == 2);
        CHECK(report.reports.size() == 4);
    }
    SUBCASE("a pinned interior beta at a vertex reproduces that vertex's report") {
        const Vector v0 = env.uncertainty_vertices()[0];
        const CheckReport vertex = check_certificate(bundle, env, 80, 0.0, 0.0, 1e-2, 5, 0, &v0);
        const CheckReport again = check_certificate(bundle, env, 80, 0.0, 0.0, 1e-2, 5, 0, &v0);
        REQUIRE(vertex.per_node.size() == again.per_node.size());
        for (std::size_t i = 0; i < vertex.per_node.size(); ++i) {
            CHECK(vertex.per_node[i].premise_true == again.per_node[i].premise_true);
            CHECK(vertex.per_node[i].violations == again.per_node[i].violations);
        }
    }
    SUBCASE("single-vertex environments degrade to the plain check with a notice") {
        MicrogridEnv mg{{}};
        const CertificateBundle mb = make_bundle(mg, 8, 2, 0.5, 2);
        const RobustReport report = check_robust_vertices(mb, mg, 40, 3, 0);
        CHECK(!report.notice.empty());
        CHECK(report.reports.size() == 1);
    }
}

TEST_CASE("composed-V monitor") {
    SUBCASE("max composition of recorded series") {
        const std::vector<Vector> node_v{{3.0, 1.0}, {2.0, 2.0}, {1.0, 0.0}};
        const Vector composed = composed_v_series(node_v);
        CHECK(composed == Vector{3.0, 2.0, 1.0});
    }
    SUBCASE("constant goal trace reports full decrease") {
        MicrogridEnv::Params p;
        p.horizon = 20;
        MicrogridEnv env{p};
        CertificateBundle bundle = make_bundle(env, 8, 2, 0.5, 1);
        Scenario scen;
        scen.profile = "constant";
        scen.init_box.lo = {0.0, 0.0};
        scen.init_box.hi = {0.0, 0.0};
        const Controller droop = baseline_controller(make_nominal_controller(env));
        const RolloutTrace trace = rollout(env, droop, scen, 0, &bundle);
        const MonitorReport report = monitor_composed_v(trace, bundle);
        CHECK(report.decrease_fraction == 1.0);
        CHECK(report.recorded_consistent);
    }
    SUBCASE("recomputed series matches the recorded one on a platoon rollout") {
        PlatoonEnv env{{}};
        const CertificateBundle bundle = make_bundle(env, 8, 2, 1.0, 6);
        Scenario scen;
        scen.profile = "lead_sin";
        const Controller lqr = baseline_controller(make_nominal_controller(env));
        const RolloutTrace trace = rollout(env, lqr, scen, 2, &bundle);
        const MonitorReport report = monitor_composed_v(trace, bundle, 1e-3, 0.05);
        CHECK(report.recorded_consistent);
        CHECK(report.counted_steps > 0);
        CHECK(report.decrease_fraction >= 0.0);
        CHECK(report.decrease_fraction <= 1.0);
    }
    SUBCASE("short traces are rejected") {
        PlatoonEnv env{{}};
        const CertificateBundle bundle = make_bundle(env, 8, 2, 1.0, 6);
        RolloutTrace trace;
        trace.states.resize(1);
        CHECK_THROWS_AS(monitor_composed_v(trace, bundle), ConfigError);
    }
}

TEST_CASE("check report serializes with the documented fields") {
    MicrogridEnv env{{}};
    const CertificateBundle bundle = make_bundle(env, 8, 2, 0.5, 3);
    const CheckReport report = check_certificate(bundle, env, 50, 0.0, 0.0, 1e-2, 9, 20);
    const nlohmann::json j = to_json(report);
    CHECK(j.contains("n_samples"));
    CHECK(j.contains("per_node"));
    CHECK(j.contains("goal_zero_mean"));
    CHECK(j.contains("positivity_min"));
    CHECK(j.contains("worst_counterexamples"));
    CHECK(j.contains("min_v_by_distance"));
    CHECK(j.contains("unchecked_assumptions"));
    CHECK(j.at("per_node").size() == 5);
}
