#include "gio/mdp.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace gio {

namespace {

constexpr double kRowSumTol = 1e-12;

bool row_ok(const std::vector<double>& row, double* sum_out) {
    double sum = 0.0;
    bool nonneg = true;
    for (double p : row) {
        if (p < 0.0) nonneg = false;
        sum += p;
    }
    *sum_out = sum;
    return nonneg && std::abs(sum - 1.0) <= kRowSumTol;
}

std::string fmt(const char* pattern, int a, int b = -1) {
    char buf[128];
    if (b >= 0)
        std::snprintf(buf, sizeof(buf), pattern, a, b);
    else
        std::snprintf(buf, sizeof(buf), pattern, a);
    return buf;
}

}  // namespace

Table2 make_table2(int rows, int cols, double fill) {
    return Table2(rows, std::vector<double>(cols, fill));
}

Table3 make_table3(int d0, int d1, int d2, double fill) {
    return Table3(d0, make_table2(d1, d2, fill));
}

double TabularMdp::expected_reward(int s, int a) const {
    double r = 0.0;
    for (int k = 0; k < n_atoms(); ++k) r += reward_dist[s][a][k] * reward_atoms[k];
    return r;
}

TabularMdp TabularMdp::zeros(int n_states, int n_actions, int n_atoms) {
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.transition = make_table3(n_states, n_actions, n_states);
    mdp.reward_atoms.assign(n_atoms, 0.0);
    mdp.reward_dist = make_table3(n_states, n_actions, n_atoms);
    mdp.initial_dist.assign(n_states, 0.0);
    return mdp;
}

std::vector<std::string> validate(const TabularMdp& mdp) {
    std::vector<std::string> violations;
    if (mdp.n_states <= 0) violations.push_back("n_states must be positive");
    if (mdp.n_actions <= 0) violations.push_back("n_actions must be positive");
    if (mdp.reward_atoms.empty()) violations.push_back("reward_atoms is empty");
    if (!(mdp.gamma >= 0.0 && mdp.gamma < 1.0))
        violations.push_back("gamma outside [0, 1)");
    if (!violations.empty()) return violations;

    const int S = mdp.n_states, A = mdp.n_actions, K = mdp.n_atoms();
    if (static_cast<int>(mdp.transition.size()) != S)
        violations.push_back("transition has wrong state dimension");
    if (static_cast<int>(mdp.reward_dist.size()) != S)
        violations.push_back("reward_dist has wrong state dimension");
    if (static_cast<int>(mdp.initial_dist.size()) != S)
        violations.push_back("initial_dist has wrong length");
    if (!violations.empty()) return violations;

    for (int s = 0; s < S; ++s) {
        if (static_cast<int>(mdp.transition[s].size()) != A ||
            static_cast<int>(mdp.reward_dist[s].size()) != A) {
            violations.push_back(fmt("state %d: wrong action dimension", s));
            continue;
        }
        for (int a = 0; a < A; ++a) {
            if (static_cast<int>(mdp.transition[s][a].size()) != S) {
                violations.push_back(fmt("P[%d][%d]: wrong successor dimension", s, a));
                continue;
            }
            if (static_cast<int>(mdp.reward_dist[s][a].size()) != K) {
                violations.push_back(fmt("R[%d][%d]: wrong atom dimension", s, a));
                continue;
            }
            double sum = 0.0;
            if (!row_ok(mdp.transition[s][a], &sum))
                violations.push_back(fmt("P[%d][%d]: row not a distribution", s, a));
            if (!row_ok(mdp.reward_dist[s][a], &sum))
                violations.push_back(fmt("R[%d][%d]: row not a distribution", s, a));
        }
    }
    double rho_sum = 0.0;
    if (!row_ok(mdp.initial_dist, &rho_sum))
        violations.push_back("initial_dist not a distribution");
    return violations;
}

void require_valid(const TabularMdp& mdp) {
    const auto violations = validate(mdp);
    if (violations.empty()) return;
    std::string msg = "invalid MDP:";
    for (const auto& v : violations) msg += " [" + v + "]";
    throw std::invalid_argument(msg);
}

StepResult step(const TabularMdp& mdp, int s, int a, SeededRng& rng) {
    if (s < 0 || s >= mdp.n_states) throw std::out_of_range("step: bad state");
    if (a < 0 || a >= mdp.n_actions) throw std::out_of_range("step: bad action");
    StepResult out;
    out.next_state = rng.categorical(mdp.transition[s][a]);
    out.atom = rng.categorical(mdp.reward_dist[s][a]);
    out.reward = mdp.reward_atoms[out.atom];
    return out;
}

bool PolicyTable::rows_normalized(double tol) const {
    for (const auto& row : probs) {
        double sum = 0.0;
        for (double p : row) {
            if (p < 0.0) return false;
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol) return false;
    }
    return true;
}

bool PolicyTable::strictly_positive(double floor) const {
    for (const auto& row : probs)
        for (double p : row)
            if (p < floor) return false;
    return true;
}

PolicyTable PolicyTable::uniform(int n_states, int n_actions) {
    PolicyTable pi;
    pi.probs = make_table2(n_states, n_actions, 1.0 / n_actions);
    return pi;
}

QTable QTable::zeros(int n_states, int n_actions) {
    return QTable{make_table2(n_states, n_actions)};
}

double sup_norm_diff(const Table2& a, const Table2& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j)
            worst = std::max(worst, std::abs(a[i][j] - b[i][j]));
    return worst;
}

double min_elementwise_diff(const Table2& a, const Table2& b) {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j)
            lo = std::min(lo, a[i][j] - b[i][j]);
    return lo;
}

FutureKind future_kind_from_string(const std::string& name) {
    if (name == "one-step") return FutureKind::OneStep;
    if (name == "next-state") return FutureKind::NextStateOnly;
    if (name.rfind("k-step", 0) == 0) return FutureKind::KStep;
    throw std::invalid_argument("unknown future kind: " + name);
}

std::string to_string(FutureKind kind) {
    switch (kind) {
        case FutureKind::OneStep: return "one-step";
        case FutureKind::NextStateOnly: return "next-state";
        case FutureKind::KStep: return "k-step";
    }
    return "?";
}

int FutureSpace::index_of(const FutureOutcome& outcome) const {
    std::vector<int> key;
    key.reserve(outcome.steps.size() * 2);
    for (const auto& [ns, atom] : outcome.steps) {
        key.push_back(ns);
        key.push_back(atom);
    }
    const auto it = index_.find(key);
    return it == index_.end() ? -1 : it->second;
}

namespace {

std::vector<int> outcome_key(const FutureOutcome& outcome) {
    std::vector<int> key;
    key.reserve(outcome.steps.size() * 2);
    for (const auto& [ns, atom] : outcome.steps) {
        key.push_back(ns);
        key.push_back(atom);
    }
    return key;
}

}  // namespace

FutureSpace make_future_space(const TabularMdp& mdp, FutureKind kind, int k) {
    const int S = mdp.n_states, A = mdp.n_actions, K = mdp.n_atoms();
    FutureSpace space;
    space.kind = kind;

    // reach1[s'][k']: (s', atom) observable from at least one (s, a)
    auto pair_reachable = [&](int ns, int atom) {
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                if (mdp.transition[s][a][ns] > 0.0 && mdp.reward_dist[s][a][atom] > 0.0)
                    return true;
        return false;
    };

    switch (kind) {
        case FutureKind::OneStep: {
            space.k = 1;
            for (int ns = 0; ns < S; ++ns)
                for (int atom = 0; atom < K; ++atom)
                    if (pair_reachable(ns, atom))
                        space.support.push_back(FutureOutcome{{{ns, atom}}});
            break;
        }
        case FutureKind::NextStateOnly: {
            space.k = 1;
            for (int ns = 0; ns < S; ++ns) {
                bool reachable = false;
                for (int s = 0; s < S && !reachable; ++s)
                    for (int a = 0; a < A && !reachable; ++a)
                        if (mdp.transition[s][a][ns] > 0.0) reachable = true;
                if (reachable) space.support.push_back(FutureOutcome{{{ns, -1}}});
            }
            break;
        }
        case FutureKind::KStep: {
            if (k < 2 || k > 3)
                throw std::invalid_argument("KStep future requires k in {2, 3}");
            space.k = k;
            // continuation step from state x: some action reaches (y, atom)
            auto step_ok = [&](int x, int y, int atom) {
                for (int a = 0; a < A; ++a)
                    if (mdp.transition[x][a][y] > 0.0 && mdp.reward_dist[x][a][atom] > 0.0)
                        return true;
                return false;
            };
            std::vector<std::pair<int, int>> steps;
            auto recurse = [&](auto&& self, int depth) -> void {
                if (depth == k) {
                    space.support.push_back(FutureOutcome{steps});
                    return;
                }
                for (int ns = 0; ns < S; ++ns) {
                    for (int atom = 0; atom < K; ++atom) {
                        if (depth == 0) {
                            if (!pair_reachable(ns, atom)) continue;
                        } else if (!step_ok(steps.back().first, ns, atom)) {
                            continue;
                        }
                        steps.emplace_back(ns, atom);
                        self(self, depth + 1);
                        steps.pop_back();
                    }
                }
            };
            recurse(recurse, 0);
            break;
        }
    }

    for (int i = 0; i < space.size(); ++i)
        space.index_[outcome_key(space.support[i])] = i;
    return space;
}

FutureModel build_future_model(const TabularMdp& mdp, const FutureSpace& space,
                               const PolicyTable* policy) {
    const int S = mdp.n_states, A = mdp.n_actions, F = space.size();
    FutureModel model;
    model.space = space;
    model.likelihood = make_table3(S, A, F);

    if (space.kind == FutureKind::KStep && policy == nullptr)
        throw std::invalid_argument(
            "KStep future model needs a policy to marginalize intermediate actions");

    // continuation kernel m[x][y][atom] = sum_a pi(a|x) P[x][a][y] R[x][a][atom]
    Table3 continuation;
    if (space.kind == FutureKind::KStep) {
        continuation = make_table3(S, S, mdp.n_atoms());
        for (int x = 0; x < S; ++x)
            for (int a = 0; a < A; ++a) {
                const double pa = policy->probs[x][a];
                if (pa == 0.0) continue;
                for (int y = 0; y < S; ++y) {
                    const double py = mdp.transition[x][a][y];
                    if (py == 0.0) continue;
                    for (int atom = 0; atom < mdp.n_atoms(); ++atom)
                        continuation[x][y][atom] += pa * py * mdp.reward_dist[x][a][atom];
                }
            }
    }

    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            auto& row = model.likelihood[s][a];
            for (int f = 0; f < F; ++f) {
                const auto& steps = space.support[f].steps;
                const auto [s1, atom1] = steps[0];
                double p = mdp.transition[s][a][s1];
                if (atom1 >= 0) p *= mdp.reward_dist[s][a][atom1];
                for (std::size_t i = 1; i < steps.size() && p > 0.0; ++i)
                    p *= continuation[steps[i - 1].first][steps[i].first][steps[i].second];
                row[f] = p;
            }
        }
    }
    return model;
}

std::vector<std::pair<FutureOutcome, double>> enumerate_future(
    const TabularMdp& mdp, int s, int a, const FutureSpace& space,
    const PolicyTable* policy) {
    if (s < 0 || s >= mdp.n_states || a < 0 || a >= mdp.n_actions)
        throw std::out_of_range("enumerate_future: bad state/action");
    const FutureModel model = build_future_model(mdp, space, policy);
    std::vector<std::pair<FutureOutcome, double>> out;
    out.reserve(space.size());
    for (int f = 0; f < space.size(); ++f)
        out.emplace_back(space.support[f], model.likelihood[s][a][f]);
    return out;
}

}  // namespace gio
