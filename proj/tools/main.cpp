// isscert: train, check, port, and evaluate compositional stability
// certificates for networked dynamical systems.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "iss/checker.hpp"
#include "iss/checkpoint.hpp"
#include "iss/errors.hpp"
#include "iss/rollout.hpp"
#include "iss/trainer.hpp"

namespace {

using nlohmann::json;

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

iss::Scenario default_scenario(const iss::Environment& env) {
    iss::Scenario scen;
    switch (env.kind()) {
        case iss::EnvKind::Platoon: scen.profile = "lead_sin"; break;
        case iss::EnvKind::PlanarDrone: scen.profile = "ref_sin"; break;
        case iss::EnvKind::Microgrid: scen.profile = "constant"; break;
    }
    return scen;
}

iss::Scenario scenario_for(const json& config, const iss::Environment& env) {
    if (config.contains("scenario")) return iss::scenario_from_json(config.at("scenario"));
    return default_scenario(env);
}

/// Environment + config resolution shared by the checkpoint-consuming
/// subcommands: the checkpoint's embedded env is the default, an explicit
/// --config overrides it after a kind check.
struct Loaded {
    iss::Checkpoint ckpt;
    std::unique_ptr<iss::Environment> env;
    json config;  // file config if given, else {"env": ckpt.env}
};

Loaded load_for_eval(const std::string& checkpoint_path, const std::string& config_path) {
    Loaded loaded;
    loaded.ckpt = iss::load_checkpoint(checkpoint_path);
    json env_cfg = loaded.ckpt.env_config;
    if (!config_path.empty()) {
        loaded.config = iss::load_json_file(config_path);
        if (!loaded.config.contains("env")) throw iss::ConfigError("config: missing env object");
        env_cfg = loaded.config.at("env");
    } else {
        loaded.config = json{{"env", env_cfg}};
    }
    loaded.env = iss::make_environment(env_cfg);
    if (loaded.env->kind() != loaded.ckpt.bundle.kind)
        throw iss::ConfigError("env kind does not match the checkpoint bundle");
    if (loaded.env->n_nodes() != loaded.ckpt.bundle.n_nodes())
        throw iss::ConfigError("env node count does not match the checkpoint bundle");
    return loaded;
}

json history_summary(const std::vector<iss::LossBreakdown>& history) {
    json j;
    j["iterations"] = history.size();
    if (!history.empty()) {
        const iss::LossBreakdown& last = history.back();
        j["final"] = {{"goal", last.goal},
                      {"cond_a", last.cond_a},
                      {"decrease_b", last.decrease_b},
                      {"ctrl", last.ctrl},
                      {"total", last.total}};
    }
    return j;
}

int cmd_train(const std::string& config_path, long seed_override, const std::string& out_path,
              const std::string& history_path, bool stamp) {
    const json config = iss::load_json_file(config_path);
    if (!config.contains("env")) throw iss::ConfigError("config: missing env object");
    auto env = iss::make_environment(config.at("env"));
    iss::TrainConfig cfg = iss::train_config_from_json(config.contains("train") ? config.at("train") : json::object());
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);

    iss::Trainer trainer(*env, cfg);
    const iss::TrainResult result = trainer.run();

    iss::Checkpoint ckpt;
    ckpt.created_at = stamp ? utc_now() : "";
    ckpt.env_config = config.at("env");
    ckpt.train_config = cfg;
    ckpt.bundle = result.bundle;
    ckpt.history_summary = history_summary(result.history);
    ckpt.seed = cfg.seed;
    iss::save_checkpoint(out_path, ckpt);
    if (!history_path.empty()) iss::write_history_csv(history_path, result.history);

    std::printf("trained %s for %d iterations; checkpoint written to %s\n", iss::to_string(env->kind()).c_str(),
                cfg.iterations, out_path.c_str());
    if (!result.history.empty())
        std::printf("final loss: total=%.6g goal=%.6g cond_a=%.6g decrease_b=%.6g ctrl=%.6g\n",
                    result.history.back().total, result.history.back().goal, result.history.back().cond_a,
                    result.history.back().decrease_b, result.history.back().ctrl);
    return 0;
}

int cmd_verify(const std::string& checkpoint_path, const std::string& config_path, long n_samples, long goal_samples,
               double margin_a, double margin_b, double delta_off, long seed, const std::string& out_path,
               bool robust, int interior) {
    Loaded loaded = load_for_eval(checkpoint_path, config_path);
    json out;
    const iss::CheckReport report = iss::check_certificate(loaded.ckpt.bundle, *loaded.env, n_samples, margin_a,
                                                           margin_b, delta_off, static_cast<std::uint64_t>(seed),
                                                           goal_samples);
    out = iss::to_json(report);
    std::printf("checked %ld samples: conditional violation rate %.4g (max node %.4g), goal mean |V| %.4g\n",
                n_samples, report.conditional_rate(), report.max_node_conditional_rate(), report.goal_zero_mean);
    if (robust) {
        const iss::RobustReport rr = iss::check_robust_vertices(loaded.ckpt.bundle, *loaded.env, n_samples, interior,
                                                                static_cast<std::uint64_t>(seed), margin_a, margin_b,
                                                                delta_off);
        out["robust"] = iss::to_json(rr);
        std::printf("robust: max vertex rate %.4g, max interior rate %.4g, affine residual %.3g\n",
                    rr.max_vertex_conditional_rate, rr.max_interior_conditional_rate, rr.affine_residual);
    }
    if (!out_path.empty()) {
        iss::write_json_file(out_path, out);
        std::printf("report written to %s\n", out_path.c_str());
    }
    return 0;
}

int cmd_port(const std::string& checkpoint_path, int target_n, int target_rows, int target_cols,
             const std::string& out_path, bool stamp) {
    iss::Checkpoint ckpt = iss::load_checkpoint(checkpoint_path);
    auto source_env = iss::make_environment(ckpt.env_config);
    json target_cfg = ckpt.env_config;
    if (source_env->kind() == iss::EnvKind::Platoon) {
        if (target_n <= 0) throw iss::ConfigError("port: --target-n required for platoon checkpoints");
        target_cfg["n"] = target_n;
    } else if (source_env->kind() == iss::EnvKind::PlanarDrone) {
        if (target_rows <= 0 || target_cols <= 0)
            throw iss::ConfigError("port: --target-rows and --target-cols required for drone checkpoints");
        target_cfg["rows"] = target_rows;
        target_cfg["cols"] = target_cols;
    } else {
        throw iss::ConfigError("port: unsupported environment kind " + iss::to_string(source_env->kind()));
    }
    auto target_env = iss::make_environment(target_cfg);
    iss::Checkpoint out = ckpt;
    out.created_at = stamp ? utc_now() : "";
    out.env_config = target_cfg;
    out.bundle = iss::port_certificate(ckpt.bundle, *source_env, *target_env);
    iss::save_checkpoint(out_path, out);
    std::printf("ported %d-node bundle to %d nodes; checkpoint written to %s\n", source_env->n_nodes(),
                target_env->n_nodes(), out_path.c_str());
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path, const std::string& baseline,
             long seed, const std::string& out_path) {
    std::unique_ptr<iss::Environment> env;
    const iss::CertificateBundle* bundle = nullptr;
    iss::Checkpoint ckpt;
    json config;
    if (!checkpoint_path.empty()) {
        Loaded loaded = load_for_eval(checkpoint_path, config_path);
        ckpt = std::move(loaded.ckpt);
        env = std::move(loaded.env);
        config = std::move(loaded.config);
        bundle = &ckpt.bundle;
    } else {
        if (config_path.empty()) throw iss::ConfigError("eval: need --checkpoint or --config");
        config = iss::load_json_file(config_path);
        if (!config.contains("env")) throw iss::ConfigError("config: missing env object");
        env = iss::make_environment(config.at("env"));
    }
    const iss::Scenario scen = scenario_for(config, *env);

    iss::Controller controller;
    std::string name;
    if (baseline.empty() || baseline == "none") {
        if (bundle == nullptr) throw iss::ConfigError("eval: no checkpoint given, pick a --baseline");
        controller = iss::policy_controller(*bundle);
        name = "policy";
    } else {
        iss::BaselineSpec spec;
        if (baseline == "lqr")
            spec.kind = iss::BaselineKind::Lqr;
        else if (baseline == "droop")
            spec.kind = iss::BaselineKind::Droop;
        else if (baseline == "nominal")
            spec.kind = iss::BaselineKind::Nominal;
        else
            throw iss::ConfigError("eval: unknown baseline " + baseline);
        controller = iss::baseline_controller(iss::make_nominal_controller(*env, spec));
        name = baseline;
    }

    const iss::RolloutTrace trace = iss::rollout(*env, controller, scen, static_cast<std::uint64_t>(seed), bundle);
    const iss::RolloutMetrics m = iss::metrics(trace);
    std::printf("%s rollout: %d steps, cumulative reward %.4f, mean error %.6f, final error %.6f%s\n", name.c_str(),
                trace.n_steps(), m.cumulative_reward, m.mean_error, m.final_error,
                trace.aborted ? " (aborted)" : "");
    if (!out_path.empty()) {
        iss::write_trace_csv(out_path, *env, trace);
        std::printf("trace written to %s\n", out_path.c_str());
    }
    return trace.aborted ? 1 : 0;
}

int cmd_compare(const std::string& checkpoint_path, const std::string& config_path, const std::string& baseline,
                const std::string& seeds_arg, const std::string& out_path, const std::string& curves_path,
                bool parallel) {
    Loaded loaded = load_for_eval(checkpoint_path, config_path);
    const iss::Scenario scen = scenario_for(loaded.config, *loaded.env);

    std::vector<std::uint64_t> seeds;
    std::size_t pos = 0;
    while (pos < seeds_arg.size()) {
        const std::size_t comma = seeds_arg.find(',', pos);
        const std::string tok = seeds_arg.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!tok.empty()) seeds.push_back(std::stoull(tok));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (seeds.empty()) throw iss::ConfigError("compare: no seeds given");

    std::vector<std::pair<std::string, iss::Controller>> controllers;
    controllers.emplace_back("policy", iss::policy_controller(loaded.ckpt.bundle));
    if (!baseline.empty() && baseline != "none") {
        iss::BaselineSpec spec;
        if (baseline == "lqr")
            spec.kind = iss::BaselineKind::Lqr;
        else if (baseline == "droop")
            spec.kind = iss::BaselineKind::Droop;
        else if (baseline == "nominal")
            spec.kind = iss::BaselineKind::Nominal;
        else
            throw iss::ConfigError("compare: unknown baseline " + baseline);
        controllers.emplace_back(baseline, iss::baseline_controller(iss::make_nominal_controller(*loaded.env, spec)));
    }

    const iss::CompareResult result = iss::compare(*loaded.env, controllers, scen, seeds, parallel);
    for (const iss::CompareAggregate& agg : result.aggregates)
        std::printf("%-10s reward %.2f +- %.2f   mean error %.6f +- %.6f\n", agg.name.c_str(), agg.reward_mean,
                    agg.reward_std, agg.error_mean, agg.error_std);
    if (!out_path.empty()) iss::write_compare_csv(out_path, result);
    if (!curves_path.empty()) iss::write_curves_csv(curves_path, result);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"compositional stability certificates for networked dynamical systems"};
    app.require_subcommand(1);

    // Per-subcommand option state; subcommands must not share variables or a
    // default on one leaks into the others.
    struct TrainArgs {
        std::string config, out = "checkpoint.json", history;
        long seed = -1;
        bool stamp = false;
    } train_args;
    struct VerifyArgs {
        std::string checkpoint, config, out;
        long samples = 100000, goal_samples = 10000, seed = 0;
        double margin_a = 0.0, margin_b = 0.0, delta_off = 1e-2;
        bool robust = false;
        int interior = 4;
    } verify_args;
    struct PortArgs {
        std::string checkpoint, out = "ported.json";
        int target_n = 0, target_rows = 0, target_cols = 0;
        bool stamp = false;
    } port_args;
    struct EvalArgs {
        std::string checkpoint, config, baseline, out;
        long seed = 0;
    } eval_args;
    struct CompareArgs {
        std::string checkpoint, config, baseline = "nominal", seeds = "0,1,2,3", out, curves;
        bool parallel = false;
    } compare_args;

    CLI::App* train = app.add_subcommand("train", "train certificates and controllers");
    train->add_option("--config", train_args.config, "config JSON with env and train sections")->required();
    train->add_option("--seed", train_args.seed, "override the training seed");
    train->add_option("--out", train_args.out, "checkpoint output path");
    train->add_option("--history", train_args.history, "training history CSV path");
    train->add_flag("--stamp", train_args.stamp, "record the wall-clock time in the checkpoint");

    CLI::App* verify = app.add_subcommand("verify", "sampling check of the certificate conditions");
    verify->add_option("--checkpoint", verify_args.checkpoint, "trained checkpoint")->required();
    verify->add_option("--config", verify_args.config, "optional env config override");
    verify->add_option("--samples", verify_args.samples, "number of sampled network states");
    verify->add_option("--goal-samples", verify_args.goal_samples, "number of goal samples");
    verify->add_option("--ma", verify_args.margin_a, "premise margin");
    verify->add_option("--mb", verify_args.margin_b, "conclusion margin");
    verify->add_option("--delta-off", verify_args.delta_off, "goal tube excluded from the positivity check");
    verify->add_option("--seed", verify_args.seed, "sampling seed");
    verify->add_option("--out", verify_args.out, "report JSON path");
    verify->add_flag("--robust", verify_args.robust, "also run the vertex/interior robustness check");
    verify->add_option("--interior", verify_args.interior, "number of interior combinations for --robust");

    CLI::App* port = app.add_subcommand("port", "re-target a trained bundle to a larger network");
    port->add_option("--checkpoint", port_args.checkpoint, "source checkpoint")->required();
    port->add_option("--target-n", port_args.target_n, "target platoon size");
    port->add_option("--target-rows", port_args.target_rows, "target drone grid rows");
    port->add_option("--target-cols", port_args.target_cols, "target drone grid cols");
    port->add_option("--out", port_args.out, "target checkpoint path");
    port->add_flag("--stamp", port_args.stamp, "record the wall-clock time in the checkpoint");

    CLI::App* eval = app.add_subcommand("eval", "closed-loop rollout with trace export");
    eval->add_option("--checkpoint", eval_args.checkpoint, "trained checkpoint (optional for baselines)");
    eval->add_option("--config", eval_args.config, "env config (defaults to the checkpoint's)");
    eval->add_option("--baseline", eval_args.baseline, "lqr | droop | nominal | none");
    eval->add_option("--seed", eval_args.seed, "rollout seed");
    eval->add_option("--out", eval_args.out, "trace CSV path");

    CLI::App* compare_cmd = app.add_subcommand("compare", "policy vs baseline over multiple seeds");
    compare_cmd->add_option("--checkpoint", compare_args.checkpoint, "trained checkpoint")->required();
    compare_cmd->add_option("--config", compare_args.config, "optional env config override");
    compare_cmd->add_option("--baseline", compare_args.baseline, "lqr | droop | nominal | none");
    compare_cmd->add_option("--seeds", compare_args.seeds, "comma-separated rollout seeds");
    compare_cmd->add_option("--out", compare_args.out, "comparison CSV path");
    compare_cmd->add_option("--curves", compare_args.curves, "per-step error curves CSV path");
    compare_cmd->add_flag("--parallel", compare_args.parallel, "run the rollouts concurrently");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed())
            return cmd_train(train_args.config, train_args.seed, train_args.out, train_args.history,
                             train_args.stamp);
        if (verify->parsed())
            return cmd_verify(verify_args.checkpoint, verify_args.config, verify_args.samples,
                              verify_args.goal_samples, verify_args.margin_a, verify_args.margin_b,
                              verify_args.delta_off, verify_args.seed, verify_args.out, verify_args.robust,
                              verify_args.interior);
        if (port->parsed())
            return cmd_port(port_args.checkpoint, port_args.target_n, port_args.target_rows, port_args.target_cols,
                            port_args.out, port_args.stamp);
        if (eval->parsed())
            return cmd_eval(eval_args.checkpoint, eval_args.config, eval_args.baseline, eval_args.seed,
                            eval_args.out);
        if (compare_cmd->parsed())
            return cmd_compare(compare_args.checkpoint, compare_args.config, compare_args.baseline,
                               compare_args.seeds, compare_args.out, compare_args.curves, compare_args.parallel);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ERROR %s\n", e.what());
        return 1;
    }
    return 0;
}
