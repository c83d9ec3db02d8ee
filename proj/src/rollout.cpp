#include "iss/rollout.hpp"

#include <cmath>
#include <cstdio>
#include <future>

#include "iss/errors.hpp"

namespace iss {

Controller policy_controller(const CertificateBundle& bundle) {
    return [&bundle](int node, const NetworkState& s) {
        return policy_eval(bundle.group_of(node).policy, s.node[node]);
    };
}

Controller baseline_controller(std::shared_ptr<NominalController> ctrl) {
    return [ctrl](int node, const NetworkState& s) { return ctrl->control(node, s); };
}

RolloutTrace rollout(const Environment& env, const Controller& controller, const Scenario& scenario,
                     std::uint64_t seed, const CertificateBundle* v_source) {
    const int n = env.n_nodes();
    Rng rng(derive_seed(seed, stream::rollout));
    RolloutTrace trace;

    auto record = [&](const NetworkState& s) {
        trace.states.push_back(s);
        Vector dist(n), vvals;
        for (int i = 0; i < n; ++i) dist[i] = env.dist_to_goal(i, s.node[i]);
        if (v_source != nullptr) {
            vvals.resize(n);
            for (int i = 0; i < n; ++i) vvals[i] = v_eval(v_source->group_of(i).cert, s.node[i]);
        }
        trace.node_dist.push_back(std::move(dist));
        if (v_source != nullptr) trace.node_v.push_back(std::move(vvals));
    };

    NetworkState s = env.sample_initial(scenario, rng);
    record(s);
    std::vector<Vector> controls(n);
    for (int t = 0; t < env.horizon(); ++t) {
        for (int i = 0; i < n; ++i) controls[i] = env.clamp_control(i, controller(i, s));
        if (!env.step_euler(s, controls, &scenario)) {
            trace.aborted = true;
            trace.abort_step = t;
            break;
        }
        trace.controls.push_back(controls);
        record(s);
        double error = 0.0;
        for (double d : trace.node_dist.back()) error += d;
        trace.reward.push_back(env.reward_offset() - error);
    }
    return trace;
}

RolloutMetrics metrics(const RolloutTrace& trace) {
    if (trace.states.empty()) throw ConfigError("metrics: empty trace");
    RolloutMetrics m;
    m.aborted = trace.aborted;
    m.error_series.reserve(trace.states.size());
    for (const Vector& dist : trace.node_dist) {
        double e = 0.0;
        for (double d : dist) e += d;
        m.error_series.push_back(e);
    }
    for (double r : trace.reward) m.cumulative_reward += r;
    double total = 0.0;
    for (double e : m.error_series) total += e;
    m.mean_error = total / static_cast<double>(m.error_series.size());
    m.final_error = m.error_series.back();
    return m;
}

double mean_error_last(const RolloutTrace& trace, int k) {
    const RolloutMetrics m = metrics(trace);
    const int len = static_cast<int>(m.error_series.size());
    const int start = std::max(0, len - k);
    double total = 0.0;
    for (int i = start; i < len; ++i) total += m.error_series[i];
    return total / static_cast<double>(len - start);
}

CompareResult compare(const Environment& env, const std::vector<std::pair<std::string, Controller>>& controllers,
                      const Scenario& scenario, std::span<const std::uint64_t> seeds, bool parallel) {
    if (controllers.empty()) throw ConfigError("compare: need at least one controller");
    if (seeds.empty()) throw ConfigError("compare: need at least one seed");

    struct Job {
        std::size_t ctrl = 0;
        std::uint64_t seed = 0;
        RolloutTrace trace;
    };
    std::vector<Job> jobs;
    for (std::size_t c = 0; c < controllers.size(); ++c)
        for (std::uint64_t s : seeds) jobs.push_back({c, s, {}});

    auto run_job = [&](Job& job) { job.trace = rollout(env, controllers[job.ctrl].second, scenario, job.seed); };
    if (parallel) {
        std::vector<std::future<void>> futures;
        futures.reserve(jobs.size());
        for (Job& job : jobs) futures.push_back(std::async(std::launch::async, run_job, std::ref(job)));
        for (auto& f : futures) f.get();
    } else {
        for (Job& job : jobs) run_job(job);
    }

    CompareResult result;
    for (const Job& job : jobs) {
        const RolloutMetrics m = metrics(job.trace);
        CompareRow row;
        row.name = controllers[job.ctrl].first;
        row.seed = job.seed;
        row.cumulative_reward = m.cumulative_reward;
        row.mean_error = m.mean_error;
        row.final_error = m.final_error;
        row.failed = m.aborted;
        result.rows.push_back(row);
    }
    for (std::size_t c = 0; c < controllers.size(); ++c) {
        CompareAggregate agg;
        agg.name = controllers[c].first;
        Vector rewards, errors;
        std::size_t n_steps = 0;
        for (const Job& job : jobs)
            if (job.ctrl == c) n_steps = std::max(n_steps, job.trace.states.size());
        Vector mean(n_steps, 0.0), m2(n_steps, 0.0), count(n_steps, 0.0);
        for (std::size_t jv = 0; jv < jobs.size(); ++jv) {
            const Job& job = jobs[jv];
            if (job.ctrl != c) continue;
            const RolloutMetrics m = metrics(job.trace);
            rewards.push_back(m.cumulative_reward);
            errors.push_back(m.mean_error);
            for (std::size_t t = 0; t < m.error_series.size(); ++t) {
                mean[t] += m.error_series[t];
                m2[t] += m.error_series[t] * m.error_series[t];
                count[t] += 1.0;
            }
        }
        auto mean_std = [](const Vector& xs, double& mu, double& sd) {
            mu = 0.0;
            for (double x : xs) mu += x;
            mu /= static_cast<double>(xs.size());
            double var = 0.0;
            for (double x : xs) var += (x - mu) * (x - mu);
            sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size())) : 0.0;
        };
        mean_std(rewards, agg.reward_mean, agg.reward_std);
        mean_std(errors, agg.error_mean, agg.error_std);
        result.aggregates.push_back(agg);
        Vector curve_mean(n_steps), curve_std(n_steps);
        for (std::size_t t = 0; t < n_steps; ++t) {
            curve_mean[t] = count[t] > 0.0 ? mean[t] / count[t] : 0.0;
            const double var = count[t] > 0.0 ? m2[t] / count[t] - curve_mean[t] * curve_mean[t] : 0.0;
            curve_std[t] = var > 0.0 ? std::sqrt(var) : 0.0;
        }
        result.names.push_back(controllers[c].first);
        result.curve_mean.push_back(std::move(curve_mean));
        result.curve_std.push_back(std::move(curve_std));
    }
    return result;
}

void write_trace_csv(const std::string& path, const Environment& env, const RolloutTrace& trace) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (f == nullptr) throw IoError("cannot open trace file: " + path);
    std::fprintf(f, "step,time");
    for (int i = 0; i < env.n_nodes(); ++i) std::fprintf(f, ",dist_%d", i);
    std::fprintf(f, ",total_error,reward\n");
    for (std::size_t t = 0; t < trace.states.size(); ++t) {
        std::fprintf(f, "%zu,%.17g", t, trace.states[t].t);
        double total = 0.0;
        for (double d : trace.node_dist[t]) {
            std::fprintf(f, ",%.17g", d);
            total += d;
        }
        const double reward = t > 0 && t - 1 < trace.reward.size() ? trace.reward[t - 1] : 0.0;
        std::fprintf(f, ",%.17g,%.17g\n", total, reward);
    }
    if (trace.aborted) std::fprintf(f, "# aborted at step %d\n", trace.abort_step);
    std::fclose(f);
}

void write_compare_csv(const std::string& path, const CompareResult& result) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (f == nullptr) throw IoError("cannot open compare file: " + path);
    std::fprintf(f, "controller,seed,cumulative_reward,mean_error,final_error\n");
    for (const CompareRow& row : result.rows) {
        std::fprintf(f, "%s,%llu,%.17g,%.17g,%.17g%s\n", row.name.c_str(),
                     static_cast<unsigned long long>(row.seed), row.cumulative_reward, row.mean_error,
                     row.final_error, row.failed ? ",failed" : "");
    }
    std::fclose(f);
}

void write_curves_csv(const std::string& path, const CompareResult& result) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (f == nullptr) throw IoError("cannot open curves file: " + path);
    std::fprintf(f, "step");
    for (const std::string& name : result.names) std::fprintf(f, ",%s_mean,%s_std", name.c_str(), name.c_str());
    std::fprintf(f, "\n");
    std::size_t n_steps = 0;
    for (const Vector& c : result.curve_mean) n_steps = std::max(n_steps, c.size());
    for (std::size_t t = 0; t < n_steps; ++t) {
        std::fprintf(f, "%zu", t);
        for (std::size_t c = 0; c < result.curve_mean.size(); ++c) {
            const double m = t < result.curve_mean[c].size() ? result.curve_mean[c][t] : 0.0;
            const double s = t < result.curve_std[c].size() ? result.curve_std[c][t] : 0.0;
            std::fprintf(f, ",%.17g,%.17g", m, s);
        }
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

}  // namespace iss
