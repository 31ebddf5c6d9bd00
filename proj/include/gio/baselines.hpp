#pragma once

#include <vector>

#include "gio/mdp.hpp"

namespace gio::baselines {

/// Independent reference implementations used as oracles in equivalence
/// tests. None of them touch the intrinsic solver's code paths.

/// Plain value iteration; returns optimal V.
std::vector<double> value_iteration(const TabularMdp& mdp, double tol = 1e-12,
                                    int max_iters = 1000000);

struct PiResult {
    PolicyTable policy;
    Table2 q;
    std::vector<Table2> q_per_sweep;
    bool converged = false;
};

/// Standard policy iteration: exact evaluation, greedy improvement.
PiResult standard_policy_iteration(const TabularMdp& mdp, const PolicyTable& pi0,
                                   double eval_tol = 1e-12, int max_sweeps = 1000);

/// Max-entropy (soft) policy iteration at temperature eta: evaluation uses
/// the entropy-augmented backup, improvement is softmax(Q / eta).
PiResult soft_policy_iteration(const TabularMdp& mdp, const PolicyTable& pi0,
                               double eta, double eval_tol = 1e-10,
                               int max_sweeps = 1000, double outer_tol = 1e-10);

/// Plain clipped-double-Q agent with Polyak soft targets and a softmax
/// behaviour policy over the pessimistic critic. The eta = 0 ablation
/// baseline for the intrinsic agent.
struct TwinCriticConfig {
    double gamma = 0.95;
    double tau = 0.01;
    double lr = 0.3;
    double temperature = 0.05;  // softmax over min(Q1, Q2)
    int batch_size = 64;
    int buffer_capacity = 50000;
    int warmup = 200;
    int episode_len = 100;
    int eval_every = 5000;
    int eval_episodes = 100;
    int eval_horizon = 100;
};

struct ReturnPoint {
    long step = 0;
    double eval_return_mean = 0.0;
    double eval_return_std = 0.0;
};

std::vector<ReturnPoint> run_twin_critic_baseline(const TabularMdp& mdp,
                                                  const TwinCriticConfig& cfg,
                                                  long steps, std::uint64_t seed);

}  // namespace gio::baselines
