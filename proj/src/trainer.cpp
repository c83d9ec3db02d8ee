#include "iss/trainer.hpp"

#include <cstdio>
#include <string>

#include "iss/baselines.hpp"
#include "iss/errors.hpp"

namespace iss {

namespace {

void collect_v_blocks(CertificateBundle& bundle, BundleGrads& grads, ParamBlocks& params, GradBlocks& gblocks) {
    for (std::size_t g = 0; g < bundle.groups.size(); ++g) {
        CertificateGroup& grp = bundle.groups[g];
        BundleGrads::GroupGrads& gg = grads.groups[g];
        params.emplace_back(grp.cert.s_mat.data);
        gblocks.emplace_back(gg.s.data);
        for (std::size_t l = 0; l < grp.cert.p_net.n_layers(); ++l) {
            params.emplace_back(grp.cert.p_net.weights[l].data);
            gblocks.emplace_back(gg.p.w[l].data);
            params.emplace_back(grp.cert.p_net.biases[l]);
            gblocks.emplace_back(gg.p.b[l]);
        }
        for (std::size_t l = 0; l < grp.cert.q_net.n_layers(); ++l) {
            params.emplace_back(grp.cert.q_net.weights[l].data);
            gblocks.emplace_back(gg.q.w[l].data);
            params.emplace_back(grp.cert.q_net.biases[l]);
            gblocks.emplace_back(gg.q.b[l]);
        }
    }
}

void collect_pi_blocks(CertificateBundle& bundle, BundleGrads& grads, ParamBlocks& params, GradBlocks& gblocks) {
    for (std::size_t g = 0; g < bundle.groups.size(); ++g) {
        CertificateGroup& grp = bundle.groups[g];
        BundleGrads::GroupGrads& gg = grads.groups[g];
        for (std::size_t l = 0; l < grp.policy.net.n_layers(); ++l) {
            params.emplace_back(grp.policy.net.weights[l].data);
            gblocks.emplace_back(gg.pi.w[l].data);
            params.emplace_back(grp.policy.net.biases[l]);
            gblocks.emplace_back(gg.pi.b[l]);
        }
    }
}

void collect_k_blocks(CertificateBundle& bundle, BundleGrads& grads, ParamBlocks& params, GradBlocks& gblocks) {
    for (std::size_t g = 0; g < bundle.groups.size(); ++g) {
        params.emplace_back(&bundle.groups[g].cert.gain_k, 1);
        gblocks.emplace_back(&grads.groups[g].k, 1);
    }
}

}  // namespace

namespace {

NominalFn default_nominal(const Environment& env, const TrainConfig& cfg) {
    BaselineSpec spec;
    if (cfg.nominal_q_scale != 1.0 && env.kind() != EnvKind::Microgrid) {
        const std::size_t dim = env.kind() == EnvKind::Platoon ? 2 : 6;
        spec.q_weight = scaled(Matrix::identity(dim), cfg.nominal_q_scale);
    }
    return make_nominal(env, spec);
}

}  // namespace

Trainer::Trainer(const Environment& env, TrainConfig cfg) : Trainer(env, cfg, default_nominal(env, cfg)) {}

Trainer::Trainer(const Environment& env, TrainConfig cfg, NominalFn nominal)
    : env_(env),
      cfg_(std::move(cfg)),
      eval_(env, cfg_, std::move(nominal)),
      batch_rng_(derive_seed(cfg_.seed, stream::train_batch)),
      goal_rng_(derive_seed(cfg_.seed, stream::goal_batch)) {
    cfg_.validate();
    opt_v_.cfg = {cfg_.lr_v, 0.9, 0.999, 1e-8, cfg_.weight_decay, cfg_.coupled_decay};
    opt_pi_.cfg = {cfg_.lr_pi, 0.9, 0.999, 1e-8, cfg_.weight_decay, cfg_.coupled_decay};
    opt_k_.cfg = {cfg_.lr_k, 0.9, 0.999, 1e-8, 0.0, false};
}

CertificateBundle Trainer::initial_bundle() const {
    return make_bundle(env_, cfg_.hidden_width, cfg_.hidden_layers, cfg_.alpha, cfg_.seed);
}

void Trainer::iterate(CertificateBundle& bundle, int iters, Phase phase, std::vector<LossBreakdown>* history,
                      const CheckpointSink& checkpoint_sink, int iteration_offset) {
    if (iters <= 0) return;
    PhaseWeights w;
    switch (phase) {
        case Phase::Controller: w = {0.0, 0.0, 0.0, 1.0, 0.0}; break;
        case Phase::Lyapunov: w = {0.0, 0.0, cfg_.mu_b, 0.0, 0.0}; break;
        case Phase::Joint:
            w = {cfg_.mu_goal, cfg_.mu_a, cfg_.mu_b, cfg_.mu_ctrl,
                 cfg_.policy_from_decrease ? cfg_.mu_b : cfg_.policy_decrease_weight};
            break;
    }
    BundleGrads grads = BundleGrads::like(bundle);
    for (int it = 0; it < iters; ++it) {
        for (CertificateGroup& grp : bundle.groups) {
            if (phase != Phase::Controller) {
                spectral_normalize(grp.cert.p_net, 1);
                spectral_normalize(grp.cert.q_net, 1);
            }
            if (phase != Phase::Lyapunov) spectral_normalize(grp.policy.net, 1);
        }
        const auto states = env_.sample_states(cfg_.batch_size, batch_rng_);
        const auto goals = env_.sample_goal_states(cfg_.effective_goal_batch(), goal_rng_);
        grads.zero();
        const LossBreakdown loss = eval_.evaluate(bundle, states, goals, w, &grads);
        if (history != nullptr) history->push_back(loss);

        ParamBlocks params;
        GradBlocks gblocks;
        if (phase != Phase::Controller) {
            collect_v_blocks(bundle, grads, params, gblocks);
            adam_step(opt_v_, params, gblocks);
        }
        if (phase != Phase::Lyapunov) {
            params.clear();
            gblocks.clear();
            collect_pi_blocks(bundle, grads, params, gblocks);
            adam_step(opt_pi_, params, gblocks);
        }
        if (phase == Phase::Joint) {
            params.clear();
            gblocks.clear();
            collect_k_blocks(bundle, grads, params, gblocks);
            adam_step(opt_k_, params, gblocks);
        }
        if (checkpoint_sink && cfg_.checkpoint_every > 0 && (it + 1) % cfg_.checkpoint_every == 0)
            checkpoint_sink(bundle, iteration_offset + it + 1);
    }
}

void Trainer::phase_controller(CertificateBundle& bundle, int iters, std::vector<LossBreakdown>* history) {
    iterate(bundle, iters, Phase::Controller, history, nullptr, 0);
}

void Trainer::phase_lyapunov(CertificateBundle& bundle, int iters, std::vector<LossBreakdown>* history) {
    iterate(bundle, iters, Phase::Lyapunov, history, nullptr, 0);
}

void Trainer::phase_joint(CertificateBundle& bundle, int iters, std::vector<LossBreakdown>* history,
                          const CheckpointSink& checkpoint_sink, int iteration_offset) {
    iterate(bundle, iters, Phase::Joint, history, checkpoint_sink, iteration_offset);
}

TrainResult Trainer::run(CheckpointSink checkpoint_sink) {
    TrainResult result;
    result.bundle = initial_bundle();
    const int joint_iters = cfg_.iterations - cfg_.pretrain_ctrl_iters - cfg_.pretrain_lyap_iters;
    phase_controller(result.bundle, cfg_.pretrain_ctrl_iters, &result.history);
    phase_lyapunov(result.bundle, cfg_.pretrain_lyap_iters, &result.history);
    phase_joint(result.bundle, joint_iters, &result.history, checkpoint_sink,
                cfg_.pretrain_ctrl_iters + cfg_.pretrain_lyap_iters);
    // Export-quality spectral estimate.
    for (CertificateGroup& grp : result.bundle.groups) {
        spectral_normalize(grp.cert.p_net, 20);
        spectral_normalize(grp.cert.q_net, 20);
        spectral_normalize(grp.policy.net, 20);
    }
    if (checkpoint_sink) checkpoint_sink(result.bundle, cfg_.iterations);
    return result;
}

void write_history_csv(const std::string& path, std::span<const LossBreakdown> history) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (f == nullptr) throw IoError("cannot open history file: " + path);
    std::fprintf(f, "iteration,goal,cond_a,decrease_b,ctrl,total\n");
    for (std::size_t i = 0; i < history.size(); ++i) {
        const LossBreakdown& h = history[i];
        std::fprintf(f, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, h.goal, h.cond_a, h.decrease_b, h.ctrl, h.total);
    }
    std::fclose(f);
}

}  // namespace iss
