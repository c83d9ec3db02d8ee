#include <doctest.h>

#include <cstdio>

#include "iss/checkpoint.hpp"
#include "iss/errors.hpp"

using namespace iss;
using nlohmann::json;

namespace {

Checkpoint sample_checkpoint() {
    PlatoonEnv env{{}};
    Checkpoint ckpt;
    ckpt.env_config = json{{"kind", "platoon"}, {"n", 5}};
    ckpt.train_config = TrainConfig{};
    ckpt.bundle = make_bundle(env, 8, 2, 1.0, 42);
    ckpt.history_summary = json{{"iterations", 0}};
    ckpt.seed = 42;
    return ckpt;
}

}  // namespace

TEST_CASE("environment factory parses kinds, defaults and overrides") {
    SUBCASE("platoon with paper defaults") {
        const auto env = make_environment(json{{"kind", "platoon"}});
        CHECK(env->kind() == EnvKind::Platoon);
        CHECK(env->n_nodes() == 5);
        CHECK(env->dt() == 0.01);
        CHECK(env->horizon() == 500);
        CHECK(env->train_box().hi == Vector{2.0, 2.0, 4.0});
        CHECK(env->uncertainty_vertices().size() == 2);
    }
    SUBCASE("drone grid dimensions") {
        const auto env = make_environment(json{{"kind", "planar_drone"}, {"rows", 3}, {"cols", 2}});
        CHECK(env->n_nodes() == 6);
        CHECK(env->dt() == 0.03);
        CHECK(env->state_dim(0) == 8);
    }
    SUBCASE("microgrid with custom references") {
        const auto env = make_environment(json{{"kind", "microgrid"}, {"n", 3}, {"delta_ref", {0.1, 0.2, 0.3}}});
        CHECK(env->n_nodes() == 3);
        const auto& mg = dynamic_cast<const MicrogridEnv&>(*env);
        CHECK(mg.params().delta_ref == Vector{0.1, 0.2, 0.3});
    }
    SUBCASE("overriding the vertex hull") {
        const auto env = make_environment(
            json{{"kind", "platoon"}, {"uncertainty_vertices", json::array({json::array({1.5}), json::array({2.5})})}});
        CHECK(env->uncertainty_vertices()[0] == Vector{1.5});
        CHECK(env->uncertainty_vertices()[1] == Vector{2.5});
    }
    SUBCASE("unknown kind and malformed boxes are rejected") {
        CHECK_THROWS_AS(make_environment(json{{"kind", "pendulum"}}), ConfigError);
        CHECK_THROWS_AS(make_environment(json{{"kind", "platoon"}, {"train_box", json{{"lo", {0, 0, 0}}}}}),
                        ConfigError);
        CHECK_THROWS_AS(make_environment(json::object()), ConfigError);
    }
}

TEST_CASE("train config json round trip preserves every field") {
    TrainConfig cfg;
    cfg.alpha = 0.2;
    cfg.mu_b = 3.0;
    cfg.mu_ctrl = 0.2;
    cfg.batch_size = 512;
    cfg.iterations = 3000;
    cfg.grad_mode = GradMode::OneStep;
    cfg.seed = 3;
    const TrainConfig back = train_config_from_json(train_config_to_json(cfg));
    CHECK(back.alpha == cfg.alpha);
    CHECK(back.mu_b == cfg.mu_b);
    CHECK(back.mu_ctrl == cfg.mu_ctrl);
    CHECK(back.batch_size == cfg.batch_size);
    CHECK(back.grad_mode == cfg.grad_mode);
    CHECK(back.seed == cfg.seed);

    // Table values for the drone row pass validation.
    const TrainConfig drone = train_config_from_json(json{{"alpha", 0.2}, {"mu_b", 3.0}, {"mu_ctrl", 0.2}});
    CHECK(drone.alpha == 0.2);

    CHECK_THROWS_AS(train_config_from_json(json{{"alpha", -1.0}}), ConfigError);
    CHECK_THROWS_AS(train_config_from_json(json{{"batch_size", 0}}), ConfigError);
    CHECK_THROWS_AS(train_config_from_json(json{{"grad_mode", "exact"}}), ConfigError);
}

TEST_CASE("bundle json round trip is bit-exact") {
    PlatoonEnv env{{}};
    const CertificateBundle bundle = make_bundle(env, 8, 2, 1.0, 7);
    const json j = bundle_to_json(bundle);
    const CertificateBundle back = bundle_from_json(j);
    REQUIRE(back.groups.size() == bundle.groups.size());
    CHECK(back.node_group == bundle.node_group);
    for (std::size_t g = 0; g < bundle.groups.size(); ++g) {
        CHECK(back.groups[g].cert.s_mat.data == bundle.groups[g].cert.s_mat.data);
        CHECK(back.groups[g].cert.gain_k == bundle.groups[g].cert.gain_k);
        for (std::size_t l = 0; l < bundle.groups[g].cert.p_net.n_layers(); ++l) {
            CHECK(back.groups[g].cert.p_net.weights[l].data == bundle.groups[g].cert.p_net.weights[l].data);
            CHECK(back.groups[g].cert.p_net.power_vec[l] == bundle.groups[g].cert.p_net.power_vec[l]);
        }
        for (std::size_t l = 0; l < bundle.groups[g].policy.net.n_layers(); ++l)
            CHECK(back.groups[g].policy.net.weights[l].data == bundle.groups[g].policy.net.weights[l].data);
    }
    // Dump of the reloaded bundle equals the original dump byte for byte.
    CHECK(bundle_to_json(back).dump() == j.dump());
}

TEST_CASE("checkpoint file round trip") {
    const Checkpoint ckpt = sample_checkpoint();
    const std::string path = "ckpt_test.json";
    save_checkpoint(path, ckpt);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.format_version == kCheckpointFormatVersion);
    CHECK(back.seed == ckpt.seed);
    CHECK(back.bundle.node_group == ckpt.bundle.node_group);

    // save(load(save(x))) produces identical bytes.
    const std::string path2 = "ckpt_test2.json";
    save_checkpoint(path2, back);
    auto slurp = [](const std::string& p) {
        std::FILE* f = std::fopen(p.c_str(), "rb");
        REQUIRE(f != nullptr);
        std::string out;
        char buf[4096];
        std::size_t n;
        while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
        std::fclose(f);
        return out;
    };
    CHECK(slurp(path) == slurp(path2));
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST_CASE("checkpoint validation rejects bad inputs") {
    const Checkpoint ckpt = sample_checkpoint();
    json j = checkpoint_to_json(ckpt);

    SUBCASE("format version mismatch") {
        j["format_version"] = 999;
        CHECK_THROWS_AS(checkpoint_from_json(j), ConfigError);
    }
    SUBCASE("kind mismatch between env and bundle") {
        j["env"] = json{{"kind", "microgrid"}, {"n", 5}};
        CHECK_THROWS_AS(checkpoint_from_json(j), ConfigError);
    }
    SUBCASE("node count mismatch") {
        j["env"] = json{{"kind", "platoon"}, {"n", 7}};
        CHECK_THROWS_AS(checkpoint_from_json(j), ConfigError);
    }
    SUBCASE("non-finite parameters") {
        j["bundle"]["groups"][0]["certificate"]["s"]["data"][0] = "bogus";
        CHECK_THROWS(checkpoint_from_json(j));
    }
}

TEST_CASE("scenario json parsing") {
    const Scenario scen = scenario_from_json(json{{"profile", "lead_sin"}, {"boundary0", {2.5}}});
    CHECK(scen.profile == "lead_sin");
    CHECK(scen.boundary0 == Vector{2.5});
    const Scenario plain = scenario_from_json(json::object());
    CHECK(plain.profile == "constant");
}
