#include "iss/environment.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "iss/errors.hpp"

namespace iss {

std::string to_string(EnvKind kind) {
    switch (kind) {
        case EnvKind::Platoon: return "platoon";
        case EnvKind::PlanarDrone: return "planar_drone";
        case EnvKind::Microgrid: return "microgrid";
    }
    return "?";
}

EnvKind env_kind_from_string(const std::string& name) {
    if (name == "platoon") return EnvKind::Platoon;
    if (name == "planar_drone") return EnvKind::PlanarDrone;
    if (name == "microgrid") return EnvKind::Microgrid;
    throw ConfigError("unknown environment kind: " + name);
}

int NetworkTopology::n_groups() const {
    int g = 0;
    for (int v : share_group) g = std::max(g, v + 1);
    return g;
}

void NetworkTopology::validate() const {
    if (n <= 0) throw ConfigError("topology: need at least one node");
    if (static_cast<int>(neighbors.size()) != n || static_cast<int>(share_group.size()) != n ||
        static_cast<int>(state_dim.size()) != n || static_cast<int>(control_dim.size()) != n)
        throw ConfigError("topology: per-node array size mismatch");
    for (int i = 0; i < n; ++i) {
        std::set<int> seen;
        for (int j : neighbors[i]) {
            if (j == i) throw ConfigError("topology: self-loop at node " + std::to_string(i));
            if (j < 0 || j >= n) throw ConfigError("topology: invalid neighbor id at node " + std::to_string(i));
            if (!seen.insert(j).second)
                throw ConfigError("topology: duplicate neighbor at node " + std::to_string(i));
        }
        if (share_group[i] < 0) throw ConfigError("topology: negative share group");
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (share_group[i] == share_group[j] &&
                (state_dim[i] != state_dim[j] || control_dim[i] != control_dim[j]))
                throw ConfigError("topology: shared group with mismatched dimensions");
        }
    }
}

void Box::validate(std::size_t dim, const std::string& what, bool allow_degenerate) const {
    if (lo.size() != dim || hi.size() != dim) throw ConfigError(what + ": box dimension mismatch");
    for (std::size_t a = 0; a < dim; ++a) {
        if (allow_degenerate ? !(lo[a] <= hi[a]) : !(lo[a] < hi[a]))
            throw ConfigError(what + ": box lower bound must be below upper bound");
    }
}

Vector GoalFrame::residual(std::span<const double> x) const {
    Vector shifted(x.size());
    for (std::size_t a = 0; a < x.size(); ++a) shifted[a] = x[a] - offset[a];
    return matvec(projector, shifted);
}

void Environment::validate_common() const {
    topo_.validate();
    if (dt_ <= 0.0) throw ConfigError("environment: dt must be positive");
    if (horizon_ <= 0) throw ConfigError("environment: horizon must be positive");
    const std::size_t d = static_cast<std::size_t>(topo_.state_dim[0]);
    train_box_.validate(d, "train_box");
    test_box_.validate(d, "test_box");
    if (vertices_.empty()) throw ConfigError("environment: need at least one uncertainty vertex");
    for (const Vector& v : vertices_)
        if (v.size() != boundary_dim()) throw ConfigError("environment: uncertainty vertex dimension mismatch");
    const std::size_t p = static_cast<std::size_t>(topo_.control_dim[0]);
    if (control_lo_.size() != p || control_hi_.size() != p)
        throw ConfigError("environment: control bound dimension mismatch");
}

double Environment::dist_to_goal(int i, std::span<const double> x) const {
    if (!all_finite(x)) throw NumericError("dist_to_goal: non-finite state");
    return norm2(goal_frame(i).residual(x));
}

Vector Environment::clamp_control(int i, std::span<const double> u) const {
    if (u.size() != static_cast<std::size_t>(control_dim(i))) throw ConfigError("clamp_control: dimension mismatch");
    Vector c(u.begin(), u.end());
    for (std::size_t a = 0; a < c.size(); ++a) c[a] = std::clamp(c[a], control_lo_[a], control_hi_[a]);
    return c;
}

Vector Environment::sample_beta(Rng& rng) const {
    if (vertices_.size() == 1) return vertices_[0];
    // Uniform convex weights (flat Dirichlet) over the vertex hull.
    Vector w(vertices_.size());
    double total = 0.0;
    for (double& v : w) {
        v = rng.exponential();
        total += v;
    }
    Vector beta(boundary_dim(), 0.0);
    for (std::size_t k = 0; k < vertices_.size(); ++k)
        for (std::size_t a = 0; a < beta.size(); ++a) beta[a] += (w[k] / total) * vertices_[k][a];
    return beta;
}

NetworkState Environment::sample_state(Rng& rng) const {
    NetworkState s;
    s.node.resize(n_nodes());
    for (int i = 0; i < n_nodes(); ++i) {
        Vector& x = s.node[i];
        x.resize(state_dim(i));
        for (std::size_t a = 0; a < x.size(); ++a) x[a] = rng.uniform(train_box_.lo[a], train_box_.hi[a]);
    }
    s.boundary = sample_beta(rng);
    s.t = 0.0;
    return s;
}

std::vector<NetworkState> Environment::sample_states(int count, Rng& rng) const {
    if (count < 0) throw ConfigError("sample_states: negative count");
    std::vector<NetworkState> out;
    out.reserve(count);
    for (int k = 0; k < count; ++k) out.push_back(sample_state(rng));
    return out;
}

std::vector<NetworkState> Environment::sample_goal_states(int count, Rng& rng) const {
    if (count < 0) throw ConfigError("sample_goal_states: negative count");
    std::vector<NetworkState> out;
    out.reserve(count);
    for (int k = 0; k < count; ++k) {
        NetworkState s;
        s.node.resize(n_nodes());
        for (int i = 0; i < n_nodes(); ++i) sample_goal_node(i, rng, s.node[i]);
        s.boundary = sample_beta(rng);
        s.t = 0.0;
        out.push_back(std::move(s));
    }
    return out;
}

NetworkState Environment::sample_initial(const Scenario& scen, Rng& rng) const {
    const Box& box = scen.init_box.empty() ? test_box_ : scen.init_box;
    box.validate(static_cast<std::size_t>(state_dim(0)), "scenario init_box", true);
    NetworkState s;
    s.node.resize(n_nodes());
    for (int i = 0; i < n_nodes(); ++i) {
        Vector& x = s.node[i];
        x.resize(state_dim(i));
        for (std::size_t a = 0; a < x.size(); ++a) x[a] = rng.uniform(box.lo[a], box.hi[a]);
    }
    s.boundary = initial_boundary(scen);
    s.t = 0.0;
    return s;
}

bool Environment::step_euler(NetworkState& s, const std::vector<Vector>& controls, const Scenario* scen) const {
    if (static_cast<int>(controls.size()) != n_nodes()) throw ConfigError("step_euler: control count mismatch");
    std::vector<Vector> next(n_nodes());
    for (int i = 0; i < n_nodes(); ++i) {
        const Vector u = clamp_control(i, controls[i]);
        const Vector dx = node_derivative(i, s, u);
        next[i].resize(s.node[i].size());
        for (std::size_t a = 0; a < dx.size(); ++a) {
            next[i][a] = s.node[i][a] + dt_ * dx[a];
            if (!std::isfinite(next[i][a])) return false;
        }
    }
    s.node = std::move(next);
    if (scen != nullptr) advance_boundary(s.boundary, s.t, *scen);
    s.t += dt_;
    return true;
}

}  // namespace iss
