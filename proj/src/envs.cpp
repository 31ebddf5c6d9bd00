#include "gio/envs.hpp"

#include <cmath>
#include <stdexcept>

namespace gio::envs {

namespace {

std::vector<double> dirichlet1_row(int n, SeededRng& rng) {
    // Dirichlet(1) = normalized iid exponentials
    std::vector<double> row(n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        row[i] = -std::log(u < 1e-300 ? 1e-300 : u);
        sum += row[i];
    }
    for (double& x : row) x /= sum;
    return row;
}

void set_deterministic_reward(TabularMdp& mdp, int s, int a, int atom) {
    for (int k = 0; k < mdp.n_atoms(); ++k) mdp.reward_dist[s][a][k] = 0.0;
    mdp.reward_dist[s][a][atom] = 1.0;
}

double get_param(const EnvSpec& spec, const std::string& key, double fallback) {
    const auto it = spec.params.find(key);
    return it == spec.params.end() ? fallback : it->second;
}

}  // namespace

TabularMdp gridworld(int n, double eps, double gamma) {
    if (n < 2) throw std::invalid_argument("gridworld: n must be >= 2");
    if (eps < 0.0 || eps > 1.0) throw std::invalid_argument("gridworld: bad slip");
    const int S = n * n;
    TabularMdp mdp = TabularMdp::zeros(S, 4, 2);
    mdp.gamma = gamma;
    mdp.reward_atoms = {0.0, 1.0};
    const int goal = S - 1;

    // actions: 0 up, 1 right, 2 down, 3 left (row 0 at the top-left)
    const int dr[4] = {-1, 0, 1, 0};
    const int dc[4] = {0, 1, 0, -1};
    auto target = [&](int s, int a) {
        const int r = s / n, c = s % n;
        const int r2 = r + dr[a], c2 = c + dc[a];
        if (r2 < 0 || r2 >= n || c2 < 0 || c2 >= n) return s;  // bounce
        return r2 * n + c2;
    };

    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < 4; ++a) {
            if (s == goal) {
                mdp.transition[s][a][s] = 1.0;  // absorbing
                set_deterministic_reward(mdp, s, a, 1);
                continue;
            }
            const int perp1 = (a + 1) % 4, perp2 = (a + 3) % 4;
            mdp.transition[s][a][target(s, a)] += 1.0 - eps;
            mdp.transition[s][a][target(s, perp1)] += eps / 2.0;
            mdp.transition[s][a][target(s, perp2)] += eps / 2.0;
            set_deterministic_reward(mdp, s, a, 0);
        }
    }
    mdp.initial_dist.assign(S, 0.0);
    mdp.initial_dist[0] = 1.0;
    require_valid(mdp);
    return mdp;
}

TabularMdp chain(int n, double gamma) {
    if (n < 2) throw std::invalid_argument("chain: n must be >= 2");
    TabularMdp mdp = TabularMdp::zeros(n, 2, 2);
    mdp.gamma = gamma;
    mdp.reward_atoms = {0.0, 1.0};
    const int goal = n - 1;
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < 2; ++a) {
            if (s == goal) {
                mdp.transition[s][a][s] = 1.0;
                set_deterministic_reward(mdp, s, a, 1);
                continue;
            }
            const int next = a == 0 ? std::max(0, s - 1) : s + 1;
            mdp.transition[s][a][next] = 1.0;
            set_deterministic_reward(mdp, s, a, 0);
        }
    }
    mdp.initial_dist.assign(n, 0.0);
    mdp.initial_dist[0] = 1.0;
    require_valid(mdp);
    return mdp;
}

TabularMdp random_mdp(int n_states, int n_actions, int n_atoms, std::uint64_t seed,
                      double gamma) {
    if (n_states < 1 || n_actions < 1 || n_atoms < 1)
        throw std::invalid_argument("random_mdp: bad dimensions");
    SeededRng rng(seed);
    TabularMdp mdp = TabularMdp::zeros(n_states, n_actions, n_atoms);
    mdp.gamma = gamma;
    for (int k = 0; k < n_atoms; ++k) mdp.reward_atoms[k] = 2.0 * rng.uniform() - 1.0;
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            mdp.transition[s][a] = dirichlet1_row(n_states, rng);
            mdp.reward_dist[s][a] = dirichlet1_row(n_atoms, rng);
        }
    mdp.initial_dist.assign(n_states, 1.0 / n_states);
    require_valid(mdp);
    return mdp;
}

TabularMdp uninformative(int n_states, int n_actions, std::uint64_t seed, double gamma) {
    SeededRng rng(seed);
    TabularMdp mdp = TabularMdp::zeros(n_states, n_actions, 2);
    mdp.gamma = gamma;
    mdp.reward_atoms = {0.0, 1.0};
    for (int s = 0; s < n_states; ++s) {
        const auto p_row = dirichlet1_row(n_states, rng);
        const auto r_row = dirichlet1_row(2, rng);
        for (int a = 0; a < n_actions; ++a) {
            mdp.transition[s][a] = p_row;  // identical across actions
            mdp.reward_dist[s][a] = r_row;
        }
    }
    mdp.initial_dist.assign(n_states, 1.0 / n_states);
    require_valid(mdp);
    return mdp;
}

TabularMdp invertible(int n_states, double gamma, std::uint64_t seed) {
    if (n_states < 2) throw std::invalid_argument("invertible: need >= 2 states");
    const int n_actions = n_states;  // distinct successor per action
    SeededRng rng(seed);
    const int n_atoms = 3;
    TabularMdp mdp = TabularMdp::zeros(n_states, n_actions, n_atoms);
    mdp.gamma = gamma;
    for (int k = 0; k < n_atoms; ++k) mdp.reward_atoms[k] = 2.0 * rng.uniform() - 1.0;
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            mdp.transition[s][a][(s + a + 1) % n_states] = 1.0;
            set_deterministic_reward(mdp, s, a, static_cast<int>(rng.below(n_atoms)));
        }
    mdp.initial_dist.assign(n_states, 1.0 / n_states);
    require_valid(mdp);
    return mdp;
}

int noisy_tv_noise_states(int n_states) { return std::max(2, n_states / 3); }

TabularMdp noisy_tv(int n_states, int n_actions, std::uint64_t seed, double gamma) {
    (void)seed;  // construction is deterministic; seed kept for spec uniformity
    if (n_states < 4) throw std::invalid_argument("noisy_tv: need >= 4 states");
    if (n_actions < 2) throw std::invalid_argument("noisy_tv: need >= 2 actions");
    const int noise = noisy_tv_noise_states(n_states);
    const int quiet = n_states - noise;  // states [0, quiet) are informative
    TabularMdp mdp = TabularMdp::zeros(n_states, n_actions, 1);
    mdp.gamma = gamma;
    mdp.reward_atoms = {0.0};

    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            mdp.reward_dist[s][a][0] = 1.0;
            if (s >= quiet) {
                // Noise region: action-independent, uniform over the noise
                // states plus an escape hatch back to state 0.
                const double p = 1.0 / (noise + 1);
                mdp.transition[s][a][0] = p;
                for (int t = quiet; t < n_states; ++t) mdp.transition[s][a][t] = p;
            } else if (a == n_actions - 1) {
                // Tune into the TV: uniform over noise states.
                for (int t = quiet; t < n_states; ++t)
                    mdp.transition[s][a][t] = 1.0 / noise;
            } else {
                // Informative region: distinct successor per action.
                mdp.transition[s][a][(s + a + 1) % quiet] = 1.0;
            }
        }
    }
    mdp.initial_dist.assign(n_states, 0.0);
    mdp.initial_dist[0] = 1.0;
    require_valid(mdp);
    return mdp;
}

TabularMdp make(const EnvSpec& spec) {
    const auto seed = spec.seed;
    if (spec.name == "gridworld")
        return gridworld(static_cast<int>(get_param(spec, "n", 5)),
                         get_param(spec, "eps", 0.1), get_param(spec, "gamma", 0.95));
    if (spec.name == "chain")
        return chain(static_cast<int>(get_param(spec, "n", 6)),
                     get_param(spec, "gamma", 0.9));
    if (spec.name == "random")
        return random_mdp(static_cast<int>(get_param(spec, "states", 5)),
                          static_cast<int>(get_param(spec, "actions", 3)),
                          static_cast<int>(get_param(spec, "atoms", 2)), seed,
                          get_param(spec, "gamma", 0.9));
    if (spec.name == "uninformative")
        return uninformative(static_cast<int>(get_param(spec, "states", 3)),
                             static_cast<int>(get_param(spec, "actions", 2)), seed,
                             get_param(spec, "gamma", 0.9));
    if (spec.name == "invertible")
        return invertible(static_cast<int>(get_param(spec, "states", 4)),
                          get_param(spec, "gamma", 0.9), seed);
    if (spec.name == "noisy-tv")
        return noisy_tv(static_cast<int>(get_param(spec, "states", 6)),
                        static_cast<int>(get_param(spec, "actions", 3)), seed,
                        get_param(spec, "gamma", 0.9));
    throw std::invalid_argument("unknown environment: " + spec.name);
}

std::vector<Benchmark> benchmark_suite() {
    std::vector<Benchmark> suite;
    suite.push_back({"uninformative-3x2",
                     {"uninformative", {{"states", 3}, {"actions", 2}}, 3},
                     {FutureKind::OneStep, 1},
                     1.0});
    suite.push_back({"invertible-4",
                     {"invertible", {{"states", 4}}, 5},
                     {FutureKind::OneStep, 1},
                     1.0});
    suite.push_back({"chain-6", {"chain", {{"n", 6}}, 0}, {FutureKind::OneStep, 1}, 0.5});
    suite.push_back({"gridworld-4",
                     {"gridworld", {{"n", 4}, {"eps", 0.1}}, 0},
                     {FutureKind::OneStep, 1},
                     0.5});
    suite.push_back({"random-5x3",
                     {"random", {{"states", 5}, {"actions", 3}, {"atoms", 2}}, 7},
                     {FutureKind::OneStep, 1},
                     1.0});
    suite.push_back({"random-4x3-nextstate",
                     {"random", {{"states", 4}, {"actions", 3}, {"atoms", 2}}, 11},
                     {FutureKind::NextStateOnly, 1},
                     1.0});
    suite.push_back({"random-4x2-kstep2",
                     {"random", {{"states", 4}, {"actions", 2}, {"atoms", 2}}, 13},
                     {FutureKind::KStep, 2},
                     1.0});
    suite.push_back({"noisy-tv-6x3",
                     {"noisy-tv", {{"states", 6}, {"actions", 3}}, 17},
                     {FutureKind::OneStep, 1},
                     1.0});
    return suite;
}

}  // namespace gio::envs
