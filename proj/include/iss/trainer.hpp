#pragma once

#include <functional>
#include <string>
#include <vector>

#include "iss/adam.hpp"
#include "iss/losses.hpp"

namespace iss {

struct TrainResult {
    CertificateBundle bundle;
    std::vector<LossBreakdown> history;  // one row per iteration, all phases
};

/// Three-phase procedure: controller imitation, certificate initialization
/// with the controller frozen, then joint minimization of the full loss.
/// Flagged layers are spectral-normalized with one power iteration before
/// every step and with twenty at export.
class Trainer {
public:
    using CheckpointSink = std::function<void(const CertificateBundle&, int iteration)>;

    Trainer(const Environment& env, TrainConfig cfg);
    Trainer(const Environment& env, TrainConfig cfg, NominalFn nominal);

    TrainResult run(CheckpointSink checkpoint_sink = nullptr);

    /// Individual phases, exposed for tests. Histories append in place.
    void phase_controller(CertificateBundle& bundle, int iters, std::vector<LossBreakdown>* history);
    void phase_lyapunov(CertificateBundle& bundle, int iters, std::vector<LossBreakdown>* history);
    void phase_joint(CertificateBundle& bundle, int iters, std::vector<LossBreakdown>* history,
                     const CheckpointSink& checkpoint_sink = nullptr, int iteration_offset = 0);

    CertificateBundle initial_bundle() const;
    const LossEvaluator& evaluator() const { return eval_; }

private:
    enum class Phase { Controller, Lyapunov, Joint };

    void iterate(CertificateBundle& bundle, int iters, Phase phase, std::vector<LossBreakdown>* history,
                 const CheckpointSink& checkpoint_sink, int iteration_offset);

    const Environment& env_;
    TrainConfig cfg_;
    LossEvaluator eval_;
    Rng batch_rng_;
    Rng goal_rng_;
    AdamState opt_v_, opt_pi_, opt_k_;
};

/// Columns: iteration, goal, cond_a, decrease_b, ctrl, total.
void write_history_csv(const std::string& path, std::span<const LossBreakdown> history);

}  // namespace iss
