#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gio/mdp.hpp"
#include "gio/variational.hpp"

namespace gio {

struct Transition {
    int s = 0;
    int a = 0;
    int atom = 0;
    int next_s = 0;
    double reward = 0.0;
};

/// Ring buffer with uniform sampling over current contents.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(const Transition& tr);
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const { return data_[i]; }
    std::vector<Transition> sample(std::size_t n, SeededRng& rng) const;

private:
    std::size_t capacity_;
    std::size_t cursor_ = 0;
    std::vector<Transition> data_;
};

struct AgentConfig {
    double eta = 0.1;
    double gamma = 0.95;
    double tau = 0.01;            // Polyak coefficient, in (0, 1]
    double lr_critic = 1.0;       // per-(s,a) step toward the batch target
    double lr_actor = 0.5;
    double lr_model = 0.5;
    int batch_size = 64;
    int model_samples = 1;        // M draws per sampled-delta evaluation
    bool exact_delta = false;     // exact expectation instead of sampling
    int critic_every = 1;
    int actor_every = 1;
    int plan_every = 10;          // env steps between planning updates; 0 disables
    int plan_batch = 32;
    int target_every = 1;
    double fallback_temp = 0.05;  // actor softmax temperature when eta == 0
    int warmup = 200;
    int episode_len = 100;        // behaviour reset period
    int eval_every = 5000;
    int eval_episodes = 100;
    int eval_horizon = 100;
    std::size_t buffer_capacity = 50000;

    void check() const;
    double actor_temperature() const { return eta > 0.0 ? eta : fallback_temp; }
};

struct AgentParams {
    Table2 theta;      // policy logits
    Table2 w1, w2;     // critics
    Table2 tw1, tw2;   // Polyak targets
};

struct GioAgent {
    AgentConfig cfg;
    AgentParams params;
    ReplayBuffer buffer;
    SeededRng rng;
    long model_train_steps = 0;

    GioAgent(int n_states, int n_actions, const AgentConfig& cfg, std::uint64_t seed);

    int n_states() const { return static_cast<int>(params.theta.size()); }
    int n_actions() const {
        return params.theta.empty() ? 0 : static_cast<int>(params.theta[0].size());
    }
    std::vector<double> policy_row(int s) const;
    PolicyTable policy() const;
};

/// Intrinsic log-ratio at a successor state: log q(a'|s', s'', r') - log
/// pi(a'|s') with a' from the policy and (s'', r') from the generative
/// model; averaged over cfg.model_samples draws, or the exact nested
/// expectation in exact mode.
double delta(GioAgent& agent, const VariationalModel& model, int next_s);

/// Fitted-Q step on both critics toward the shared pessimistic target
/// y = r + gamma (min_i target_Q_i(s', a') + eta * delta). Targets are
/// computed from the frozen target tables only. Returns the pre-step loss.
double critic_update(GioAgent& agent, const VariationalModel& model,
                     const std::vector<Transition>& batch);

/// KL step of the policy toward the softmax target built from the
/// pessimistic live critic and the learned posterior. Returns mean KL.
double actor_update(GioAgent& agent, const VariationalModel& model,
                    const std::vector<Transition>& batch);

/// Dyna-style planning: one simulated model step from buffered states, then
/// an actor update on the simulated batch. Skipped (nullopt) while the
/// generative model is untrained.
std::optional<double> plan_update(GioAgent& agent, const VariationalModel& model,
                                  const std::vector<Transition>& batch);

void polyak(GioAgent& agent);

struct RunPoint {
    long step = 0;
    double eval_return_mean = 0.0;
    double eval_return_std = 0.0;
    double greedy_return_mean = 0.0;
    double elbo = 0.0;
    double delta_mean = 0.0;
    double critic_loss = 0.0;
    double actor_kl = 0.0;
};

struct RunResult {
    std::vector<RunPoint> series;
    VariationalModel model;
};

/// The full off-policy loop: act, store, one model gradient step, delta
/// evaluation, critic and actor updates, optional planning, Polyak.
RunResult run_agent(GioAgent& agent, const TabularMdp& env, VariationalModel model,
                    long steps);

}  // namespace gio
