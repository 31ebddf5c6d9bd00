#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gio/rng.hpp"

namespace gio {

using Table2 = std::vector<std::vector<double>>;
using Table3 = std::vector<std::vector<std::vector<double>>>;

Table2 make_table2(int rows, int cols, double fill = 0.0);
Table3 make_table3(int d0, int d1, int d2, double fill = 0.0);

/// Stored distributions are exact; logs are floored so a zero probability
/// never propagates -inf through an expectation.
inline double safe_log(double p) {
    return std::log(p < 1e-300 ? 1e-300 : p);
}

/// Finite MDP with discrete reward atoms. Rewards are a distribution over a
/// fixed atom list per (s, a); a deterministic reward function is the
/// single-atom special case.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    Table3 transition;                 // transition[s][a][s']
    std::vector<double> reward_atoms;  // atom values
    Table3 reward_dist;                // reward_dist[s][a][atom]
    double gamma = 0.9;
    std::vector<double> initial_dist;  // rho0[s]

    int n_atoms() const { return static_cast<int>(reward_atoms.size()); }

    /// Atom-expected reward r(s, a).
    double expected_reward(int s, int a) const;

    static TabularMdp zeros(int n_states, int n_actions, int n_atoms);
};

/// Checks every invariant (row sums, nonnegativity, gamma range, shapes).
/// Violations are data, not faults: each entry names the row and the defect.
std::vector<std::string> validate(const TabularMdp& mdp);

/// Throws std::invalid_argument listing all violations if any exist.
void require_valid(const TabularMdp& mdp);

struct StepResult {
    int next_state = 0;
    int atom = 0;
    double reward = 0.0;
};

/// One environment transition. Deterministic given the rng state.
StepResult step(const TabularMdp& mdp, int s, int a, SeededRng& rng);

struct PolicyTable {
    Table2 probs;  // probs[s][a]

    int n_states() const { return static_cast<int>(probs.size()); }
    int n_actions() const {
        return probs.empty() ? 0 : static_cast<int>(probs[0].size());
    }
    bool rows_normalized(double tol = 1e-12) const;
    bool strictly_positive(double floor = 1e-12) const;

    static PolicyTable uniform(int n_states, int n_actions);
};

struct QTable {
    Table2 q;  // q[s][a]
    static QTable zeros(int n_states, int n_actions);
};

struct VTable {
    std::vector<double> v;
};

double sup_norm_diff(const Table2& a, const Table2& b);
double min_elementwise_diff(const Table2& a, const Table2& b);

// ---------------------------------------------------------------------------
// Future outcome spaces: the random variable observed after executing an
// action, with an enumerable support.
// ---------------------------------------------------------------------------

enum class FutureKind { OneStep, NextStateOnly, KStep };

FutureKind future_kind_from_string(const std::string& name);
std::string to_string(FutureKind kind);

/// One realized future: a sequence of (next_state, reward_atom) steps.
/// NextStateOnly outcomes carry atom = -1.
struct FutureOutcome {
    std::vector<std::pair<int, int>> steps;

    bool operator==(const FutureOutcome&) const = default;
};

/// Enumerated support of a future variable for a given MDP. Outcomes with
/// zero probability under every (s, a) are pruned from the support.
struct FutureSpace {
    FutureKind kind = FutureKind::OneStep;
    int k = 1;  // sequence length for KStep; 1 otherwise
    std::vector<FutureOutcome> support;

    int size() const { return static_cast<int>(support.size()); }
    /// Index of an outcome in the support, or -1 if pruned/unknown.
    int index_of(const FutureOutcome& outcome) const;

private:
    friend FutureSpace make_future_space(const TabularMdp&, FutureKind, int);
    std::map<std::vector<int>, int> index_;
};

/// Builds the support. KStep requires k in {2, 3} (combinatorial guard).
FutureSpace make_future_space(const TabularMdp& mdp, FutureKind kind, int k = 1);

/// Compact descriptor for configs; the space itself is built per MDP.
struct FutureSpec {
    FutureKind kind = FutureKind::OneStep;
    int k = 1;
};

/// Likelihood p(F | s, a) for every outcome in a space. For KStep the
/// intermediate actions are marginalized under the supplied policy, so the
/// model must be rebuilt whenever that policy changes.
struct FutureModel {
    FutureSpace space;
    Table3 likelihood;  // likelihood[s][a][outcome]
};

FutureModel build_future_model(const TabularMdp& mdp, const FutureSpace& space,
                               const PolicyTable* policy = nullptr);

/// Per-(s, a) outcome distribution; thin wrapper over the model builder.
std::vector<std::pair<FutureOutcome, double>> enumerate_future(
    const TabularMdp& mdp, int s, int a, const FutureSpace& space,
    const PolicyTable* policy = nullptr);

}  // namespace gio
