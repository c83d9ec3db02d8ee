#include <doctest.h>

#include <cmath>
#include <vector>

#include "iss/errors.hpp"
#include "iss/finite_diff.hpp"
#include "iss/mlp.hpp"
#include "iss/rng.hpp"

using namespace iss;

namespace {

Mlp tiny_affine_net(double w, double b) {
    // 1-layer net y = w x + b, no activations.
    const std::size_t widths[] = {1, 1};
    Mlp net = mlp_init(widths, HiddenActivation::Tanh, OutputActivation::None, 0);
    net.weights[0](0, 0) = w;
    net.biases[0][0] = b;
    return net;
}

void zero_params(Mlp& net) {
    for (Matrix& w : net.weights) w.data.assign(w.data.size(), 0.0);
    for (Vector& b : net.biases) b.assign(b.size(), 0.0);
}

// Flatten/unflatten helpers for finite-difference parameter checks.
Vector flatten_params(const Mlp& net) {
    Vector out;
    for (const Matrix& w : net.weights) out.insert(out.end(), w.data.begin(), w.data.end());
    for (const Vector& b : net.biases) out.insert(out.end(), b.begin(), b.end());
    return out;
}

void unflatten_params(Mlp& net, std::span<const double> flat) {
    std::size_t off = 0;
    for (Matrix& w : net.weights) {
        std::copy(flat.begin() + off, flat.begin() + off + w.data.size(), w.data.begin());
        off += w.data.size();
    }
    for (Vector& b : net.biases) {
        std::copy(flat.begin() + off, flat.begin() + off + b.size(), b.begin());
        off += b.size();
    }
}

Vector flatten_grads(const MlpGrads& g) {
    Vector out;
    for (const Matrix& w : g.w) out.insert(out.end(), w.data.begin(), w.data.end());
    for (const Vector& b : g.b) out.insert(out.end(), b.begin(), b.end());
    return out;
}

bool rel_close(const Vector& a, const Vector& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({1.0, std::fabs(a[i]), std::fabs(b[i])});
        if (std::fabs(a[i] - b[i]) > tol * scale) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("mlp_init is deterministic and shape-correct") {
    const std::size_t widths[] = {2, 64, 64, 1};
    const Mlp a = mlp_init(widths, HiddenActivation::Tanh, OutputActivation::None, 0);
    const Mlp b = mlp_init(widths, HiddenActivation::Tanh, OutputActivation::None, 0);
    REQUIRE(a.n_layers() == 3);
    for (std::size_t l = 0; l < a.n_layers(); ++l) {
        CHECK(a.weights[l].data == b.weights[l].data);
        CHECK(a.power_vec[l] == b.power_vec[l]);
    }
    const Mlp c = mlp_init(widths, HiddenActivation::Tanh, OutputActivation::None, 1);
    CHECK(a.weights[0].data != c.weights[0].data);

    const std::size_t shapes[] = {2, 4, 1};
    const Mlp d = mlp_init(shapes, HiddenActivation::Tanh, OutputActivation::None, 0);
    CHECK(d.weights[0].rows == 4);
    CHECK(d.weights[0].cols == 2);
    CHECK(d.weights[1].rows == 1);
    CHECK(d.weights[1].cols == 4);
    CHECK(d.biases[0].size() == 4);
    CHECK(d.biases[1].size() == 1);
    // power vectors are unit norm
    for (std::size_t l = 0; l < d.n_layers(); ++l) CHECK(norm2(d.power_vec[l]) == doctest::Approx(1.0).epsilon(1e-9));

    const std::size_t bad[] = {3};
    CHECK_THROWS_AS(mlp_init(bad, HiddenActivation::Tanh, OutputActivation::None, 0), ConfigError);
}

TEST_CASE("mlp_forward basics") {
    const std::size_t widths[] = {3, 8, 8, 2};
    SUBCASE("zero network maps everything to zero") {
        Mlp net = mlp_init(widths, HiddenActivation::Tanh, OutputActivation::None, 3);
        zero_params(net);
        const Vector y = mlp_forward(net, Vector{0.3, -1.0, 2.0});
        CHECK(y == Vector{0.0, 0.0});

        Mlp relu_net = mlp_init(widths, HiddenActivation::Tanh, OutputActivation::Relu, 3);
        zero_params(relu_net);
        const Vector yr = mlp_forward(relu_net, Vector{0.3, -1.0, 2.0});
        CHECK(yr == Vector{0.0, 0.0});
    }
    SUBCASE("single affine layer") {
        const Mlp net = tiny_affine_net(2.0, 1.0);
        const Vector y = mlp_forward(net, Vector{3.0});
        CHECK(y[0] == doctest::Approx(7.0));
    }
    SUBCASE("dimension and finiteness errors") {
        const Mlp net = mlp_init(widths, HiddenActivation::Tanh, OutputActivation::None, 3);
        CHECK_THROWS_AS(mlp_forward(net, Vector{1.0, 2.0}), ConfigError);
        CHECK_THROWS_AS(mlp_forward(net, Vector{1.0, 2.0, std::nan("")}), NumericError);
    }
}

TEST_CASE("relu output networks are non-negative everywhere") {
    Rng rng(5);
    const std::size_t widths[] = {4, 16, 16, 3};
    for (int trial = 0; trial < 20; ++trial) {
        const Mlp net = mlp_init(widths, HiddenActivation::Tanh, OutputActivation::Relu, 1000 + trial);
        for (int k = 0; k < 200; ++k) {
            Vector x(4);
            for (double& v : x) v = rng.uniform(-10.0, 10.0);
            for (double y : mlp_forward(net, x)) CHECK(y >= 0.0);
        }
    }
}

TEST_CASE("backprop on the affine net matches the chain rule") {
    Mlp net = tiny_affine_net(2.0, 1.0);
    MlpTape tape;
    mlp_forward(net, Vector{3.0}, tape);

    SUBCASE("zero upstream gives zero gradients") {
        MlpGrads grads;
        const Vector gx = backprop(tape, Vector{0.0}, grads);
        CHECK(gx[0] == 0.0);
        CHECK(grads.w[0](0, 0) == 0.0);
        CHECK(grads.b[0][0] == 0.0);
    }
    SUBCASE("unit upstream") {
        MlpGrads grads;
        const Vector gx = backprop(tape, Vector{1.0}, grads);
        CHECK(gx[0] == doctest::Approx(2.0));
        CHECK(grads.w[0](0, 0) == doctest::Approx(3.0));
        CHECK(grads.b[0][0] == doctest::Approx(1.0));
    }
    SUBCASE("a tape is consumed by one backward pass") {
        MlpGrads grads;
        backprop(tape, Vector{1.0}, grads);
        CHECK_THROWS_AS(backprop(tape, Vector{1.0}, grads), NumericError);
        CHECK_THROWS_AS(backprop(tape, Vector{1.0, 2.0}, grads), NumericError);
    }
}

TEST_CASE("backprop matches central finite differences on random tanh nets") {
    Rng rng(17);
    const std::size_t widths[] = {3, 12, 12, 2};
    for (int trial = 0; trial < 10; ++trial) {
        Mlp net = mlp_init(widths, HiddenActivation::Tanh,
                           trial % 2 == 0 ? OutputActivation::None : OutputActivation::Relu, 40 + trial);
        Vector x(3), upstream(2);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        for (double& v : upstream) v = rng.uniform(-1.0, 1.0);

        MlpTape tape;
        mlp_forward(net, x, tape);
        MlpGrads grads;
        const Vector gx = backprop(tape, upstream, grads);

        auto loss_of_input = [&](std::span<const double> probe) {
            const Vector y = mlp_forward(net, probe);
            return dot(y, upstream);
        };
        const Vector gx_fd = finite_diff_grad(loss_of_input, x, 1e-5);
        CHECK(rel_close(gx, gx_fd, 1e-4));

        const Vector theta = flatten_params(net);
        auto loss_of_params = [&](std::span<const double> probe) {
            Mlp probe_net = net;
            unflatten_params(probe_net, probe);
            return dot(mlp_forward(probe_net, x), upstream);
        };
        const Vector gp_fd = finite_diff_grad(loss_of_params, theta, 1e-5);
        CHECK(rel_close(flatten_grads(grads), gp_fd, 1e-4));
    }
}

TEST_CASE("dual forward computes the exact directional derivative") {
    Rng rng(29);
    const std::size_t widths[] = {3, 10, 10, 2};
    for (int trial = 0; trial < 6; ++trial) {
        const Mlp net = mlp_init(widths, HiddenActivation::Tanh,
                                 trial % 2 == 0 ? OutputActivation::None : OutputActivation::Relu, 90 + trial);
        Vector x(3), dir(3);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        for (double& v : dir) v = rng.uniform(-1.0, 1.0);
        MlpDualTape tape;
        const DualOutput out = mlp_forward_dual(net, x, dir, tape);

        // J dir via finite differences of each output coordinate.
        const double h = 1e-6;
        Vector xp = x, xm = x;
        for (std::size_t a = 0; a < 3; ++a) {
            xp[a] += h * dir[a];
            xm[a] -= h * dir[a];
        }
        const Vector yp = mlp_forward(net, xp);
        const Vector ym = mlp_forward(net, xm);
        for (std::size_t o = 0; o < 2; ++o)
            CHECK(out.tangent[o] == doctest::Approx((yp[o] - ym[o]) / (2 * h)).epsilon(1e-4));
        CHECK(out.value == mlp_forward(net, x));
    }
}

TEST_CASE("dual backprop differentiates value and tangent outputs exactly") {
    Rng rng(31);
    const std::size_t widths[] = {2, 6, 6, 2};
    for (int trial = 0; trial < 6; ++trial) {
        Mlp net = mlp_init(widths, HiddenActivation::Tanh,
                           trial % 2 == 0 ? OutputActivation::None : OutputActivation::Relu, 700 + trial);
        Vector x(2), dir(2), val_adj(2), tan_adj(2);
        for (double& v : x) v = rng.uniform(-1.5, 1.5);
        for (double& v : dir) v = rng.uniform(-1.0, 1.0);
        for (double& v : val_adj) v = rng.uniform(-1.0, 1.0);
        for (double& v : tan_adj) v = rng.uniform(-1.0, 1.0);

        MlpDualTape tape;
        mlp_forward_dual(net, x, dir, tape);
        MlpGrads grads = MlpGrads::like(net);
        mlp_backprop_dual(tape, val_adj, tan_adj, &grads);

        const Vector theta = flatten_params(net);
        auto scalar_of_params = [&](std::span<const double> probe) {
            Mlp probe_net = net;
            unflatten_params(probe_net, probe);
            MlpDualTape probe_tape;
            const DualOutput out = mlp_forward_dual(probe_net, x, dir, probe_tape);
            return dot(out.value, val_adj) + dot(out.tangent, tan_adj);
        };
        const Vector fd = finite_diff_grad(scalar_of_params, theta, 1e-6);
        CHECK(rel_close(flatten_grads(grads), fd, 2e-4));
    }
}

TEST_CASE("spectral normalization") {
    SUBCASE("diagonal matrix rescales to unit top singular value") {
        const std::size_t widths[] = {2, 2};
        Mlp net = mlp_init(widths, HiddenActivation::Tanh, OutputActivation::None, 0);
        net.spectral_norm[0] = 1;
        net.weights[0] = Matrix(2, 2);
        net.weights[0](0, 0) = 3.0;
        net.weights[0](1, 1) = 1.0;
        spectral_normalize(net, 20);
        // Exact SVD of diag(3, 1): sigma = 3, so W' = diag(1, 1/3).
        CHECK(net.weights[0](0, 0) == doctest::Approx(1.0).epsilon(1e-3));
        CHECK(net.weights[0](1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-3));
        const double sigma = spectral_norm_estimate(net.weights[0], net.power_vec[0], 50);
        CHECK(sigma == doctest::Approx(1.0).epsilon(1e-3));
    }
    SUBCASE("matrices with small norm still rescale to unit spectral norm") {
        const std::size_t widths[] = {3, 3};
        Mlp net = mlp_init(widths, HiddenActivation::Tanh, OutputActivation::None, 4);
        net.spectral_norm[0] = 1;
        for (double& v : net.weights[0].data) v *= 0.1;
        spectral_normalize(net, 50);
        const double sigma = spectral_norm_estimate(net.weights[0], net.power_vec[0], 100);
        CHECK(sigma == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("zero matrix is left unchanged") {
        const std::size_t widths[] = {2, 2};
        Mlp net = mlp_init(widths, HiddenActivation::Tanh, OutputActivation::None, 0);
        net.spectral_norm[0] = 1;
        net.weights[0].data.assign(4, 0.0);
        const Vector u_before = net.power_vec[0];
        spectral_normalize(net, 5);
        CHECK(net.weights[0].data == Vector(4, 0.0));
        CHECK(net.power_vec[0] == u_before);
    }
    SUBCASE("idempotent up to the power-iteration tolerance") {
        const std::size_t widths[] = {6, 8, 8, 2};
        Mlp net = mlp_init(widths, HiddenActivation::Tanh, OutputActivation::None, 99);
        for (Matrix& w : net.weights)
            for (double& v : w.data) v *= 3.0;
        spectral_normalize(net, 20);
        Mlp again = net;
        spectral_normalize(again, 20);
        for (std::size_t l = 0; l < net.n_layers(); ++l) {
            if (!net.spectral_norm[l]) continue;
            const Matrix diff = sub(again.weights[l], net.weights[l]);
            CHECK(frobenius_norm(diff) <= 1e-3);
        }
    }
}
