#include <doctest.h>

#include <cmath>

#include "iss/environment.hpp"
#include "iss/errors.hpp"
#include "iss/rng.hpp"

using namespace iss;

namespace {

NetworkState platoon_state(const PlatoonEnv& env, std::initializer_list<Vector> nodes, double v_lead) {
    NetworkState s;
    s.node = nodes;
    s.boundary = {v_lead};
    (void)env;
    return s;
}

// 1-D minimization oracle for the platoon goal distance: the goal manifold is
// parameterized by the common gap c and free velocity, so minimize over c.
double platoon_dist_oracle(const Vector& x) {
    double best = 1e300;
    for (double c = -10.0; c <= 10.0; c += 1e-4) {
        const double d = std::sqrt((x[0] - c) * (x[0] - c) + (x[1] - c) * (x[1] - c));
        best = std::min(best, d);
    }
    return best;
}

}  // namespace

TEST_CASE("platoon derivative follows the gap/velocity kinematics") {
    PlatoonEnv env{{}};
    NetworkState s = platoon_state(env, {{1, 1, 2}, {1, 1, 2}, {1, 1, 2}, {1, 1, 2}, {1, 1, 2}}, 2.0);

    SUBCASE("equilibrium when all velocities match") {
        const Vector dx = env.node_derivative(2, s, Vector{0.0});
        CHECK(dx == Vector{0.0, 0.0, 0.0});
    }
    SUBCASE("velocity differences move the gaps") {
        s.node[1][2] = 3.0;  // front neighbor of node 2
        s.node[3][2] = 1.0;  // rear neighbor of node 2
        const Vector dx = env.node_derivative(2, s, Vector{0.5});
        CHECK(dx[0] == doctest::Approx(1.0));
        CHECK(dx[1] == doctest::Approx(1.0));
        CHECK(dx[2] == doctest::Approx(0.5));
    }
    SUBCASE("stationary platoon only accelerates") {
        for (Vector& x : s.node) x[2] = 0.0;
        s.boundary[0] = 0.0;
        const Vector dx = env.node_derivative(2, s, Vector{-1.0});
        CHECK(dx == Vector{0.0, 0.0, -1.0});
    }
    SUBCASE("boundary velocity feeds the first and last trucks") {
        s.boundary[0] = 5.0;
        const Vector d0 = env.node_derivative(0, s, Vector{0.0});
        CHECK(d0[0] == doctest::Approx(3.0));  // v_lead - v
        const Vector d4 = env.node_derivative(4, s, Vector{0.0});
        CHECK(d4[1] == doctest::Approx(-3.0));  // v - v_lead (mirrored boundary)
    }
    SUBCASE("non-finite input is rejected") {
        s.node[0][0] = std::nan("");
        CHECK_THROWS_AS(env.node_derivative(0, s, Vector{0.0}), NumericError);
    }
}

TEST_CASE("drone derivative matches the planar thrust model") {
    DroneEnv env{{}};
    const double m = env.mass(), g = env.gravity(), r = env.arm(), inertia = env.inertia();
    NetworkState s;
    s.node.assign(4, Vector{1, 1, 1, 1, 0, 0.5, 0, 0});
    s.boundary = {0.5, 0.0};

    SUBCASE("hover is an equilibrium") {
        const Vector dx = env.node_derivative(0, s, Vector{m * g / 2, m * g / 2});
        for (double v : dx) CHECK(v == doctest::Approx(0.0));
    }
    SUBCASE("free fall with no thrust") {
        const Vector dx = env.node_derivative(0, s, Vector{0.0, 0.0});
        CHECK(dx[6] == doctest::Approx(-g));
        CHECK(dx[7] == doctest::Approx(0.0));
    }
    SUBCASE("differential thrust produces angular acceleration") {
        const double du = inertia / r;
        const Vector dx = env.node_derivative(0, s, Vector{du, 0.0});
        CHECK(dx[7] == doctest::Approx(1.0));
    }
    SUBCASE("tilt redirects thrust") {
        s.node[0][4] = 0.3;
        const Vector dx = env.node_derivative(0, s, Vector{m * g / 2, m * g / 2});
        CHECK(dx[5] == doctest::Approx(-g * std::sin(0.3)));
        CHECK(dx[6] == doctest::Approx(g * std::cos(0.3) - g));
    }
}

TEST_CASE("microgrid derivative matches the swing-form model") {
    SUBCASE("reference point is an equilibrium of the default network") {
        MicrogridEnv env{{}};
        NetworkState s;
        s.node.assign(5, Vector{0.0, 0.0});
        for (int i = 0; i < 5; ++i)
            s.node[i] = {env.params().delta_ref[i], env.params().e_ref[i]};
        for (int i = 0; i < 5; ++i) {
            const Vector dx = env.node_derivative(i, s, Vector{0.0, 0.0});
            CHECK(dx[0] == doctest::Approx(0.0));
            CHECK(dx[1] == doctest::Approx(0.0));
        }
    }
    SUBCASE("doubling the angle inertia halves the angle rate") {
        MicrogridEnv::Params p;
        MicrogridEnv env{p};
        p.m_angle = Vector(5, 2.0);
        MicrogridEnv heavy{p};
        NetworkState s;
        s.node.assign(5, Vector{0.7, 0.4});
        const double base = env.node_derivative(2, s, Vector{0.3, -0.2})[0];
        const double slow = heavy.node_derivative(2, s, Vector{0.3, -0.2})[0];
        CHECK(slow == doctest::Approx(base / 2.0));
    }
    SUBCASE("isolated node relaxes to its angle reference") {
        MicrogridEnv::Params p;
        p.n = 1;
        p.d_angle = {0.0};  // kill the droop path so only the relaxation term remains
        MicrogridEnv env{p};
        NetworkState s;
        s.node = {Vector{env.params().delta_ref[0] + 1.0, env.params().e_ref[0]}};
        const Vector dx = env.node_derivative(0, s, Vector{0.0, 0.0});
        CHECK(dx[0] == doctest::Approx(-1.0 / env.params().m_angle[0]));
    }
    SUBCASE("zero inertia is a configuration error") {
        MicrogridEnv::Params p;
        p.m_angle = Vector(5, 0.0);
        CHECK_THROWS_AS(MicrogridEnv{p}, ConfigError);
    }
}

TEST_CASE("step_euler") {
    PlatoonEnv env{{}};
    SUBCASE("zero derivative leaves node states unchanged and advances time") {
        NetworkState s = platoon_state(env, {{1, 1, 2}, {1, 1, 2}, {1, 1, 2}, {1, 1, 2}, {1, 1, 2}}, 2.0);
        const NetworkState before = s;
        REQUIRE(env.step_euler(s, std::vector<Vector>(5, Vector{0.0})));
        for (int i = 0; i < 5; ++i) CHECK(s.node[i] == before.node[i]);
        CHECK(s.t == doctest::Approx(0.01));
    }
    SUBCASE("euler increment") {
        NetworkState s = platoon_state(env, {{1, 1, 2}, {1, 1, 2}, {1, 1, 2}, {1, 1, 2}, {1, 1, 2}}, 2.0);
        s.node[1][2] = 3.0;
        s.node[3][2] = 1.0;
        REQUIRE(env.step_euler(s, std::vector<Vector>(5, Vector{0.5})));
        CHECK(s.node[2][0] == doctest::Approx(1.0 + 0.01 * 1.0));
        CHECK(s.node[2][1] == doctest::Approx(1.0 + 0.01 * 1.0));
        CHECK(s.node[2][2] == doctest::Approx(2.0 + 0.01 * 0.5));
    }
    SUBCASE("controls outside the bounds behave exactly like clamped controls") {
        NetworkState a = platoon_state(env, {{1, 1, 2}, {1, 1, 2}, {1, 1, 2}, {1, 1, 2}, {1, 1, 2}}, 2.0);
        NetworkState b = a;
        REQUIRE(env.step_euler(a, std::vector<Vector>(5, Vector{99.0})));
        REQUIRE(env.step_euler(b, std::vector<Vector>(5, Vector{5.0})));
        for (int i = 0; i < 5; ++i) CHECK(a.node[i] == b.node[i]);
    }
}

TEST_CASE("adjacent trucks sharing a gap stay consistent along a rollout") {
    PlatoonEnv env{{}};
    Rng rng(3);
    NetworkState s = env.sample_state(rng);
    // Shared gap: p_back of truck i equals p_front of truck i+1 initially.
    for (int i = 0; i + 1 < 5; ++i) s.node[i][1] = s.node[i + 1][0];
    Rng ctrl_rng(4);
    for (int t = 0; t < 200; ++t) {
        std::vector<Vector> u(5);
        for (Vector& ui : u) ui = {ctrl_rng.uniform(-5.0, 5.0)};
        REQUIRE(env.step_euler(s, u));
        for (int i = 0; i + 1 < 5; ++i) CHECK(std::fabs(s.node[i][1] - s.node[i + 1][0]) <= 1e-9);
    }
}

TEST_CASE("sampling respects the boxes and is deterministic") {
    PlatoonEnv env{{}};
    SUBCASE("train box bounds") {
        Rng rng(0);
        for (const NetworkState& s : env.sample_states(200, rng)) {
            for (const Vector& x : s.node) {
                CHECK(x[0] >= 0.0);
                CHECK(x[0] <= 2.0);
                CHECK(x[1] >= 0.0);
                CHECK(x[1] <= 2.0);
                CHECK(x[2] >= 0.0);
                CHECK(x[2] <= 4.0);
            }
            CHECK(s.boundary[0] >= 1.0);
            CHECK(s.boundary[0] <= 3.0);
        }
    }
    SUBCASE("count zero gives an empty batch") {
        Rng rng(0);
        CHECK(env.sample_states(0, rng).empty());
    }
    SUBCASE("fixed seed reproduces the batch") {
        Rng a(42), b(42);
        const auto sa = env.sample_states(17, a);
        const auto sb = env.sample_states(17, b);
        for (std::size_t k = 0; k < sa.size(); ++k) {
            CHECK(sa[k].boundary == sb[k].boundary);
            for (int i = 0; i < 5; ++i) CHECK(sa[k].node[i] == sb[k].node[i]);
        }
    }
}

TEST_CASE("goal samples sit exactly on the goal manifold") {
    SUBCASE("platoon") {
        PlatoonEnv env{{}};
        Rng rng(1);
        for (const NetworkState& s : env.sample_goal_states(300, rng))
            for (const Vector& x : s.node) {
                CHECK(x[0] == x[1]);
                CHECK(env.dist_to_goal(0, x) == 0.0);
            }
    }
    SUBCASE("drone") {
        DroneEnv env{{}};
        Rng rng(1);
        for (const NetworkState& s : env.sample_goal_states(200, rng))
            for (const Vector& x : s.node) {
                CHECK(x[0] == x[1]);
                CHECK(x[2] == x[3]);
                CHECK(x[4] == 0.0);
                CHECK(x[7] == 0.0);
                CHECK(env.dist_to_goal(0, x) == 0.0);
            }
    }
    SUBCASE("microgrid goal is the reference point") {
        MicrogridEnv env{{}};
        Rng rng(1);
        for (const NetworkState& s : env.sample_goal_states(50, rng))
            for (int i = 0; i < 5; ++i) {
                CHECK(s.node[i][0] == env.params().delta_ref[i]);
                CHECK(s.node[i][1] == env.params().e_ref[i]);
            }
    }
}

TEST_CASE("goal distances") {
    SUBCASE("platoon closed form against the 1-D search oracle") {
        PlatoonEnv env{{}};
        CHECK(env.dist_to_goal(0, Vector{1.0, 1.0, 3.7}) == 0.0);
        const double d = env.dist_to_goal(0, Vector{2.0, 0.0, 1.0});
        CHECK(d == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
        Rng rng(9);
        for (int k = 0; k < 20; ++k) {
            const Vector x{rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 4.0)};
            CHECK(env.dist_to_goal(0, x) == doctest::Approx(platoon_dist_oracle(x)).epsilon(1e-3));
        }
    }
    SUBCASE("microgrid point goal is the euclidean norm") {
        MicrogridEnv env{{}};
        const Vector x{env.params().delta_ref[0] + 3.0, env.params().e_ref[0] + 4.0};
        CHECK(env.dist_to_goal(0, x) == doctest::Approx(5.0));
    }
    SUBCASE("projection residual is orthogonal to the goal manifold") {
        PlatoonEnv env{{}};
        // Moving along the manifold (equal shift of both gaps, any velocity
        // change) leaves the residual unchanged.
        const Vector x{1.7, 0.4, 2.0};
        const Vector r0 = env.goal_frame(0).residual(x);
        const Vector x2{1.7 + 0.3, 0.4 + 0.3, 2.9};
        const Vector r2 = env.goal_frame(0).residual(x2);
        for (std::size_t a = 0; a < 3; ++a) CHECK(r0[a] == doctest::Approx(r2[a]).epsilon(1e-12));
    }
}

TEST_CASE("dynamics are control-affine for all kinds") {
    Rng rng(77);
    auto check_affine = [&](const Environment& env) {
        for (int trial = 0; trial < 10; ++trial) {
            Rng srng(trial);
            const NetworkState s = env.sample_state(srng);
            for (int i = 0; i < env.n_nodes(); ++i) {
                Vector u1(env.control_dim(i)), u2(env.control_dim(i));
                for (std::size_t a = 0; a < u1.size(); ++a) {
                    u1[a] = rng.uniform(env.control_lo()[a], env.control_hi()[a]);
                    u2[a] = rng.uniform(env.control_lo()[a], env.control_hi()[a]);
                }
                const Vector f0 = env.node_derivative(i, s, Vector(u1.size(), 0.0));
                const Vector f1 = env.node_derivative(i, s, u1);
                const Vector f2 = env.node_derivative(i, s, u2);
                Vector u_mix(u1.size());
                for (std::size_t a = 0; a < u1.size(); ++a) u_mix[a] = 0.5 * (u1[a] + u2[a]);
                const Vector f_mix = env.node_derivative(i, s, u_mix);
                const Matrix g = env.control_matrix(i, s);
                for (std::size_t a = 0; a < f0.size(); ++a) {
                    CHECK(f_mix[a] == doctest::Approx(0.5 * (f1[a] + f2[a])).epsilon(1e-10));
                    double gu = 0.0;
                    for (std::size_t c = 0; c < u1.size(); ++c) gu += g(a, c) * u1[c];
                    CHECK(f1[a] - f0[a] == doctest::Approx(gu).epsilon(1e-10));
                }
            }
        }
    };
    check_affine(PlatoonEnv{{}});
    check_affine(DroneEnv{{}});
    check_affine(MicrogridEnv{{}});
}

TEST_CASE("beta samples stay inside the vertex hull") {
    PlatoonEnv env{{}};
    Rng rng(5);
    for (int k = 0; k < 500; ++k) {
        const Vector beta = env.sample_beta(rng);
        CHECK(beta[0] >= 1.0);
        CHECK(beta[0] <= 3.0);
    }
}

TEST_CASE("topology invariants are enforced") {
    NetworkTopology t;
    t.n = 2;
    t.neighbors = {{1}, {0}};
    t.share_group = {0, 0};
    t.state_dim = {3, 3};
    t.control_dim = {1, 1};
    CHECK_NOTHROW(t.validate());

    NetworkTopology self_loop = t;
    self_loop.neighbors[0] = {0};
    CHECK_THROWS_AS(self_loop.validate(), ConfigError);

    NetworkTopology mismatched = t;
    mismatched.state_dim = {3, 2};
    CHECK_THROWS_AS(mismatched.validate(), ConfigError);
}
