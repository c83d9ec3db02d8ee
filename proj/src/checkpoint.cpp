#include "iss/checkpoint.hpp"

#include <fstream>

#include "iss/errors.hpp"

namespace iss {

namespace {

using nlohmann::json;

Box box_from_json(const json& j, const std::string& what) {
    if (!j.is_object() || !j.contains("lo") || !j.contains("hi"))
        throw ConfigError(what + ": box needs lo and hi arrays");
    Box b;
    b.lo = j.at("lo").get<Vector>();
    b.hi = j.at("hi").get<Vector>();
    return b;
}

json box_to_json(const Box& b) { return json{{"lo", b.lo}, {"hi", b.hi}}; }

std::vector<Vector> vertices_from_json(const json& j) {
    std::vector<Vector> out;
    for (const json& v : j) out.push_back(v.get<Vector>());
    return out;
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

}  // namespace

std::unique_ptr<Environment> make_environment(const json& env_cfg) {
    if (!env_cfg.is_object() || !env_cfg.contains("kind")) throw ConfigError("env config: missing kind");
    const EnvKind kind = env_kind_from_string(env_cfg.at("kind").get<std::string>());
    switch (kind) {
        case EnvKind::Platoon: {
            PlatoonEnv::Params p;
            p.n = get_or(env_cfg, "n", p.n);
            p.dt = get_or(env_cfg, "dt", p.dt);
            p.horizon = get_or(env_cfg, "horizon", p.horizon);
            p.accel_limit = get_or(env_cfg, "accel_limit", p.accel_limit);
            if (env_cfg.contains("train_box")) p.train_box = box_from_json(env_cfg.at("train_box"), "train_box");
            if (env_cfg.contains("test_init_box"))
                p.test_box = box_from_json(env_cfg.at("test_init_box"), "test_init_box");
            if (env_cfg.contains("uncertainty_vertices"))
                p.vertices = vertices_from_json(env_cfg.at("uncertainty_vertices"));
            p.reward_offset = get_or(env_cfg, "reward_offset", p.reward_offset);
            return std::make_unique<PlatoonEnv>(p);
        }
        case EnvKind::PlanarDrone: {
            DroneEnv::Params p;
            p.rows = get_or(env_cfg, "rows", p.rows);
            p.cols = get_or(env_cfg, "cols", p.cols);
            p.dt = get_or(env_cfg, "dt", p.dt);
            p.horizon = get_or(env_cfg, "horizon", p.horizon);
            p.mass = get_or(env_cfg, "mass", p.mass);
            p.inertia = get_or(env_cfg, "inertia", p.inertia);
            p.arm = get_or(env_cfg, "arm", p.arm);
            p.gravity = get_or(env_cfg, "gravity", p.gravity);
            if (env_cfg.contains("train_box")) p.train_box = box_from_json(env_cfg.at("train_box"), "train_box");
            if (env_cfg.contains("test_init_box"))
                p.test_box = box_from_json(env_cfg.at("test_init_box"), "test_init_box");
            if (env_cfg.contains("uncertainty_vertices"))
                p.vertices = vertices_from_json(env_cfg.at("uncertainty_vertices"));
            p.reward_offset = get_or(env_cfg, "reward_offset", p.reward_offset);
            return std::make_unique<DroneEnv>(p);
        }
        case EnvKind::Microgrid: {
            MicrogridEnv::Params p;
            p.n = get_or(env_cfg, "n", p.n);
            p.dt = get_or(env_cfg, "dt", p.dt);
            p.horizon = get_or(env_cfg, "horizon", p.horizon);
            p.control_limit = get_or(env_cfg, "control_limit", p.control_limit);
            p.m_angle = get_or(env_cfg, "m_angle", p.m_angle);
            p.m_volt = get_or(env_cfg, "m_volt", p.m_volt);
            p.d_angle = get_or(env_cfg, "d_angle", p.d_angle);
            p.d_volt = get_or(env_cfg, "d_volt", p.d_volt);
            p.delta_ref = get_or(env_cfg, "delta_ref", p.delta_ref);
            p.e_ref = get_or(env_cfg, "e_ref", p.e_ref);
            p.g_self = get_or(env_cfg, "g_self", p.g_self);
            p.b_self = get_or(env_cfg, "b_self", p.b_self);
            p.p_ref = get_or(env_cfg, "p_ref", p.p_ref);
            p.q_ref = get_or(env_cfg, "q_ref", p.q_ref);
            if (env_cfg.contains("edges")) {
                for (const json& e : env_cfg.at("edges")) {
                    MicrogridEnv::Edge edge;
                    edge.i = e.at("i").get<int>();
                    edge.j = e.at("j").get<int>();
                    edge.y = get_or(e, "y", edge.y);
                    edge.sigma = get_or(e, "sigma", edge.sigma);
                    p.edges.push_back(edge);
                }
            }
            if (env_cfg.contains("train_box")) p.train_box = box_from_json(env_cfg.at("train_box"), "train_box");
            if (env_cfg.contains("test_init_box"))
                p.test_box = box_from_json(env_cfg.at("test_init_box"), "test_init_box");
            p.reward_offset = get_or(env_cfg, "reward_offset", p.reward_offset);
            return std::make_unique<MicrogridEnv>(p);
        }
    }
    throw ConfigError("env config: unhandled kind");
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig cfg;
    cfg.alpha = get_or(j, "alpha", cfg.alpha);
    cfg.eps_a = get_or(j, "eps_a", cfg.eps_a);
    cfg.eps_b = get_or(j, "eps_b", cfg.eps_b);
    cfg.mu_goal = get_or(j, "mu_goal", cfg.mu_goal);
    cfg.mu_a = get_or(j, "mu_a", cfg.mu_a);
    cfg.mu_b = get_or(j, "mu_b", cfg.mu_b);
    cfg.mu_ctrl = get_or(j, "mu_ctrl", cfg.mu_ctrl);
    cfg.batch_size = get_or(j, "batch_size", cfg.batch_size);
    cfg.goal_batch_size = get_or(j, "goal_batch_size", cfg.goal_batch_size);
    cfg.iterations = get_or(j, "iterations", cfg.iterations);
    cfg.pretrain_ctrl_iters = get_or(j, "pretrain_ctrl_iters", cfg.pretrain_ctrl_iters);
    cfg.pretrain_lyap_iters = get_or(j, "pretrain_lyap_iters", cfg.pretrain_lyap_iters);
    cfg.lr_v = get_or(j, "lr_v", cfg.lr_v);
    cfg.lr_pi = get_or(j, "lr_pi", cfg.lr_pi);
    cfg.lr_k = get_or(j, "lr_k", cfg.lr_k);
    cfg.weight_decay = get_or(j, "weight_decay", cfg.weight_decay);
    cfg.coupled_decay = get_or(j, "coupled_decay", cfg.coupled_decay);
    cfg.nominal_q_scale = get_or(j, "nominal_q_scale", cfg.nominal_q_scale);
    if (j.contains("grad_mode")) cfg.grad_mode = grad_mode_from_string(j.at("grad_mode").get<std::string>());
    cfg.policy_from_decrease = get_or(j, "policy_from_decrease", cfg.policy_from_decrease);
    cfg.policy_decrease_weight = get_or(j, "policy_decrease_weight", cfg.policy_decrease_weight);
    cfg.hidden_width = get_or(j, "hidden_width", cfg.hidden_width);
    cfg.hidden_layers = get_or(j, "hidden_layers", cfg.hidden_layers);
    cfg.checkpoint_every = get_or(j, "checkpoint_every", cfg.checkpoint_every);
    cfg.seed = get_or(j, "seed", cfg.seed);
    cfg.validate();
    return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
    return json{{"alpha", cfg.alpha},
                {"eps_a", cfg.eps_a},
                {"eps_b", cfg.eps_b},
                {"mu_goal", cfg.mu_goal},
                {"mu_a", cfg.mu_a},
                {"mu_b", cfg.mu_b},
                {"mu_ctrl", cfg.mu_ctrl},
                {"batch_size", cfg.batch_size},
                {"goal_batch_size", cfg.goal_batch_size},
                {"iterations", cfg.iterations},
                {"pretrain_ctrl_iters", cfg.pretrain_ctrl_iters},
                {"pretrain_lyap_iters", cfg.pretrain_lyap_iters},
                {"lr_v", cfg.lr_v},
                {"lr_pi", cfg.lr_pi},
                {"lr_k", cfg.lr_k},
                {"weight_decay", cfg.weight_decay},
                {"coupled_decay", cfg.coupled_decay},
                {"nominal_q_scale", cfg.nominal_q_scale},
                {"grad_mode", to_string(cfg.grad_mode)},
                {"policy_from_decrease", cfg.policy_from_decrease},
                {"policy_decrease_weight", cfg.policy_decrease_weight},
                {"hidden_width", cfg.hidden_width},
                {"hidden_layers", cfg.hidden_layers},
                {"checkpoint_every", cfg.checkpoint_every},
                {"seed", cfg.seed}};
}

Scenario scenario_from_json(const json& j) {
    Scenario scen;
    scen.profile = get_or<std::string>(j, "profile", scen.profile);
    scen.boundary0 = get_or(j, "boundary0", scen.boundary0);
    if (j.contains("init_box")) scen.init_box = box_from_json(j.at("init_box"), "scenario init_box");
    return scen;
}

namespace {

json matrix_to_json(const Matrix& m) { return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}}; }

Matrix matrix_from_json(const json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    m.data = j.at("data").get<Vector>();
    if (m.data.size() != m.rows * m.cols) throw ConfigError("checkpoint: matrix data size mismatch");
    if (!all_finite(m)) throw ConfigError("checkpoint: non-finite matrix entries");
    return m;
}

json mlp_to_json(const Mlp& net) {
    json j;
    j["widths"] = net.widths;
    j["output"] = net.output == OutputActivation::Relu ? "relu" : "none";
    json layers = json::array();
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
        layers.push_back({{"w", matrix_to_json(net.weights[l])},
                          {"b", net.biases[l]},
                          {"spectral_norm", static_cast<bool>(net.spectral_norm[l])},
                          {"power_vec", net.power_vec[l]}});
    }
    j["layers"] = layers;
    return j;
}

Mlp mlp_from_json(const json& j) {
    Mlp net;
    net.widths = j.at("widths").get<std::vector<std::size_t>>();
    if (net.widths.size() < 2) throw ConfigError("checkpoint: mlp needs at least two widths");
    const std::string out = j.at("output").get<std::string>();
    if (out == "relu")
        net.output = OutputActivation::Relu;
    else if (out == "none")
        net.output = OutputActivation::None;
    else
        throw ConfigError("checkpoint: unknown output activation " + out);
    for (const json& layer : j.at("layers")) {
        net.weights.push_back(matrix_from_json(layer.at("w")));
        net.biases.push_back(layer.at("b").get<Vector>());
        net.spectral_norm.push_back(layer.at("spectral_norm").get<bool>() ? 1 : 0);
        net.power_vec.push_back(layer.at("power_vec").get<Vector>());
        if (!all_finite(net.biases.back()) || !all_finite(net.power_vec.back()))
            throw ConfigError("checkpoint: non-finite mlp entries");
    }
    if (net.weights.size() + 1 != net.widths.size()) throw ConfigError("checkpoint: mlp layer count mismatch");
    for (std::size_t l = 0; l < net.n_layers(); ++l) {
        if (net.weights[l].rows != net.widths[l + 1] || net.weights[l].cols != net.widths[l] ||
            net.biases[l].size() != net.widths[l + 1])
            throw ConfigError("checkpoint: mlp layer shape mismatch");
    }
    return net;
}

}  // namespace

json bundle_to_json(const CertificateBundle& bundle) {
    json j;
    j["kind"] = to_string(bundle.kind);
    j["node_group"] = bundle.node_group;
    json groups = json::array();
    for (const CertificateGroup& g : bundle.groups) {
        json cert;
        cert["s"] = matrix_to_json(g.cert.s_mat);
        cert["p_net"] = mlp_to_json(g.cert.p_net);
        cert["q_net"] = mlp_to_json(g.cert.q_net);
        cert["gain_k"] = g.cert.gain_k;
        cert["alpha"] = g.cert.alpha;
        cert["frame"] = {{"projector", matrix_to_json(g.cert.frame.projector)}, {"offset", g.cert.frame.offset}};
        json policy;
        policy["net"] = mlp_to_json(g.policy.net);
        policy["u_lo"] = g.policy.u_lo;
        policy["u_hi"] = g.policy.u_hi;
        groups.push_back({{"certificate", cert}, {"policy", policy}});
    }
    j["groups"] = groups;
    return j;
}

CertificateBundle bundle_from_json(const json& j) {
    CertificateBundle bundle;
    bundle.kind = env_kind_from_string(j.at("kind").get<std::string>());
    bundle.node_group = j.at("node_group").get<std::vector<int>>();
    for (const json& g : j.at("groups")) {
        CertificateGroup grp;
        const json& cert = g.at("certificate");
        grp.cert.s_mat = matrix_from_json(cert.at("s"));
        grp.cert.p_net = mlp_from_json(cert.at("p_net"));
        grp.cert.q_net = mlp_from_json(cert.at("q_net"));
        grp.cert.gain_k = cert.at("gain_k").get<double>();
        grp.cert.alpha = cert.at("alpha").get<double>();
        grp.cert.frame.projector = matrix_from_json(cert.at("frame").at("projector"));
        grp.cert.frame.offset = cert.at("frame").at("offset").get<Vector>();
        const json& policy = g.at("policy");
        grp.policy.net = mlp_from_json(policy.at("net"));
        grp.policy.u_lo = policy.at("u_lo").get<Vector>();
        grp.policy.u_hi = policy.at("u_hi").get<Vector>();
        bundle.groups.push_back(std::move(grp));
    }
    bundle.validate();
    return bundle;
}

json checkpoint_to_json(const Checkpoint& ckpt) {
    json j;
    j["format_version"] = ckpt.format_version;
    j["created_at"] = ckpt.created_at;
    j["env"] = ckpt.env_config;
    j["train"] = train_config_to_json(ckpt.train_config);
    j["bundle"] = bundle_to_json(ckpt.bundle);
    j["history_summary"] = ckpt.history_summary;
    j["seed"] = ckpt.seed;
    return j;
}

Checkpoint checkpoint_from_json(const json& j) {
    Checkpoint ckpt;
    if (!j.contains("format_version")) throw ConfigError("checkpoint: missing format_version");
    ckpt.format_version = j.at("format_version").get<int>();
    if (ckpt.format_version != kCheckpointFormatVersion)
        throw ConfigError("checkpoint: format version " + std::to_string(ckpt.format_version) +
                          " not supported (expected " + std::to_string(kCheckpointFormatVersion) + ")");
    ckpt.created_at = get_or<std::string>(j, "created_at", "");
    ckpt.env_config = j.at("env");
    ckpt.train_config = train_config_from_json(j.at("train"));
    ckpt.bundle = bundle_from_json(j.at("bundle"));
    ckpt.history_summary = get_or(j, "history_summary", json::object());
    ckpt.seed = get_or<std::uint64_t>(j, "seed", 0);

    // The bundle must be usable on the environment it claims to match.
    auto env = make_environment(ckpt.env_config);
    if (env->kind() != ckpt.bundle.kind) throw ConfigError("checkpoint: bundle kind does not match env kind");
    if (env->n_nodes() != ckpt.bundle.n_nodes())
        throw ConfigError("checkpoint: bundle node count does not match env");
    return ckpt;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed JSON in " + path + ": " + e.what());
    }
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open file for writing: " + path);
    out << j.dump(2) << "\n";
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    write_json_file(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_json(load_json_file(path)); }

}  // namespace iss
