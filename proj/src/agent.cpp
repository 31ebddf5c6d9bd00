#include "gio/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace gio {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
    data_.reserve(capacity);
}

void ReplayBuffer::push(const Transition& tr) {
    if (data_.size() < capacity_) {
        data_.push_back(tr);
    } else {
        data_[cursor_] = tr;
        cursor_ = (cursor_ + 1) % capacity_;
    }
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, SeededRng& rng) const {
    if (data_.empty()) throw std::invalid_argument("ReplayBuffer: empty");
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(data_[rng.below(data_.size())]);
    return out;
}

void AgentConfig::check() const {
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("AgentConfig: tau");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("AgentConfig: gamma");
    if (eta < 0.0) throw std::invalid_argument("AgentConfig: eta");
    if (batch_size <= 0) throw std::invalid_argument("AgentConfig: batch_size");
    if (eta == 0.0 && !(fallback_temp > 0.0))
        throw std::invalid_argument("AgentConfig: fallback_temp");
}

GioAgent::GioAgent(int n_states, int n_actions, const AgentConfig& config,
                   std::uint64_t seed)
    : cfg(config), buffer(config.buffer_capacity), rng(seed) {
    cfg.check();
    params.theta = make_table2(n_states, n_actions);
    params.w1 = make_table2(n_states, n_actions);
    params.w2 = make_table2(n_states, n_actions);
    params.tw1 = make_table2(n_states, n_actions);
    params.tw2 = make_table2(n_states, n_actions);
}

std::vector<double> GioAgent::policy_row(int s) const {
    const auto& row = params.theta[s];
    double hi = row[0];
    for (double x : row) hi = std::max(hi, x);
    std::vector<double> p(row.size());
    double z = 0.0;
    for (std::size_t a = 0; a < row.size(); ++a) {
        p[a] = std::exp(row[a] - hi);
        z += p[a];
    }
    for (double& x : p) x /= z;
    return p;
}

PolicyTable GioAgent::policy() const {
    PolicyTable pi;
    pi.probs.resize(n_states());
    for (int s = 0; s < n_states(); ++s) pi.probs[s] = policy_row(s);
    return pi;
}

namespace {

double log_policy_prob(const GioAgent& agent, int s, int a) {
    const auto p = agent.policy_row(s);
    return safe_log(p[a]);
}

// E over (s'', r') ~ p_psi(.|s', a') of log q(a' | s', s'', r'), the exact
// inner expectation of the log-ratio.
double expected_log_q(const VariationalModel& model, int next_s, int a2) {
    const auto p_state = model.state_row(next_s, a2);
    const auto p_reward = model.reward_row(next_s, a2);
    double acc = 0.0;
    for (int s2 = 0; s2 < model.n_states; ++s2) {
        if (p_state[s2] == 0.0) continue;
        for (int k = 0; k < model.n_atoms; ++k) {
            if (p_reward[k] == 0.0) continue;
            const auto q = model.posterior_row(next_s, model.outcome_index(s2, k));
            acc += p_state[s2] * p_reward[k] * safe_log(q[a2]);
        }
    }
    return acc;
}

double sample_log_q(GioAgent& agent, const VariationalModel& model, int next_s,
                    int a2) {
    const int s2 = agent.rng.categorical(model.state_row(next_s, a2));
    const int k = agent.rng.categorical(model.reward_row(next_s, a2));
    const auto q = model.posterior_row(next_s, model.outcome_index(s2, k));
    return safe_log(q[a2]);
}

// min_i targetQ_i(s', a') + eta * delta, the bracket inside Eq.-11-style
// targets. Exact mode takes the full expectation over a' and the model.
double continuation_value(GioAgent& agent, const VariationalModel& model, int next_s) {
    const auto& cfg = agent.cfg;
    const auto& tw1 = agent.params.tw1;
    const auto& tw2 = agent.params.tw2;
    if (cfg.exact_delta) {
        const auto pi = agent.policy_row(next_s);
        double acc = 0.0;
        for (int a2 = 0; a2 < agent.n_actions(); ++a2) {
            if (pi[a2] == 0.0) continue;
            const double min_q = std::min(tw1[next_s][a2], tw2[next_s][a2]);
            const double ratio =
                cfg.eta == 0.0
                    ? 0.0
                    : cfg.eta * (expected_log_q(model, next_s, a2) - safe_log(pi[a2]));
            acc += pi[a2] * (min_q + ratio);
        }
        return acc;
    }
    double acc = 0.0;
    const auto pi = agent.policy_row(next_s);
    for (int m = 0; m < cfg.model_samples; ++m) {
        const int a2 = agent.rng.categorical(pi);
        const double min_q = std::min(tw1[next_s][a2], tw2[next_s][a2]);
        const double ratio =
            cfg.eta == 0.0
                ? 0.0
                : cfg.eta * (sample_log_q(agent, model, next_s, a2) - safe_log(pi[a2]));
        acc += min_q + ratio;
    }
    return acc / cfg.model_samples;
}

// Softmax target G over actions at state s from the pessimistic live critic
// and the learned posterior; returns log-probabilities.
std::vector<double> actor_target_log(const GioAgent& agent, const VariationalModel& model,
                                     int s) {
    const auto& cfg = agent.cfg;
    const int A = agent.n_actions();
    const double temp = cfg.actor_temperature();
    std::vector<double> x(A);
    double hi = -1e300;
    for (int a = 0; a < A; ++a) {
        const double min_q = std::min(agent.params.w1[s][a], agent.params.w2[s][a]);
        const double bonus = cfg.eta == 0.0 ? 0.0 : cfg.eta * expected_log_q(model, s, a);
        x[a] = (min_q + bonus) / temp;
        hi = std::max(hi, x[a]);
    }
    double z = 0.0;
    for (int a = 0; a < A; ++a) z += std::exp(x[a] - hi);
    const double log_z = hi + std::log(z);
    for (int a = 0; a < A; ++a) x[a] -= log_z;
    return x;
}

}  // namespace

double delta(GioAgent& agent, const VariationalModel& model, int next_s) {
    const auto pi = agent.policy_row(next_s);
    if (agent.cfg.exact_delta) {
        double acc = 0.0;
        for (int a2 = 0; a2 < agent.n_actions(); ++a2) {
            if (pi[a2] == 0.0) continue;
            acc += pi[a2] * (expected_log_q(model, next_s, a2) - safe_log(pi[a2]));
        }
        return acc;
    }
    double acc = 0.0;
    for (int m = 0; m < agent.cfg.model_samples; ++m) {
        const int a2 = agent.rng.categorical(pi);
        acc += sample_log_q(agent, model, next_s, a2) - safe_log(pi[a2]);
    }
    return acc / agent.cfg.model_samples;
}

double critic_update(GioAgent& agent, const VariationalModel& model,
                     const std::vector<Transition>& batch) {
    if (batch.empty()) throw std::invalid_argument("critic_update: empty batch");
    const auto& cfg = agent.cfg;

    // Targets are computed from the frozen target tables before any step.
    std::vector<double> targets(batch.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Transition& tr = batch[i];
        targets[i] = tr.reward + cfg.gamma * continuation_value(agent, model, tr.next_s);
        const double d1 = agent.params.w1[tr.s][tr.a] - targets[i];
        const double d2 = agent.params.w2[tr.s][tr.a] - targets[i];
        loss += 0.5 * (d1 * d1 + d2 * d2);
    }
    loss /= static_cast<double>(batch.size());

    // Per-(s, a) mean step toward the batch target: lr = 1 is assignment.
    struct Acc {
        double sum1 = 0.0, sum2 = 0.0;
        int count = 0;
    };
    std::map<std::pair<int, int>, Acc> grouped;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        auto& acc = grouped[{batch[i].s, batch[i].a}];
        acc.sum1 += targets[i] - agent.params.w1[batch[i].s][batch[i].a];
        acc.sum2 += targets[i] - agent.params.w2[batch[i].s][batch[i].a];
        acc.count += 1;
    }
    for (const auto& [key, acc] : grouped) {
        const auto [s, a] = key;
        agent.params.w1[s][a] += cfg.lr_critic * acc.sum1 / acc.count;
        agent.params.w2[s][a] += cfg.lr_critic * acc.sum2 / acc.count;
    }
    return loss;
}

double actor_update(GioAgent& agent, const VariationalModel& model,
                    const std::vector<Transition>& batch) {
    if (batch.empty()) throw std::invalid_argument("actor_update: empty batch");
    const int A = agent.n_actions();

    double mean_kl = 0.0;
    Table2 grad = make_table2(agent.n_states(), A);
    std::vector<int> count(agent.n_states(), 0);
    for (const Transition& tr : batch) {
        const auto log_g = actor_target_log(agent, model, tr.s);
        const auto pi = agent.policy_row(tr.s);
        double kl = 0.0;
        for (int a = 0; a < A; ++a)
            if (pi[a] > 0.0) kl += pi[a] * (std::log(pi[a]) - log_g[a]);
        mean_kl += kl;
        for (int a = 0; a < A; ++a) {
            const double centered = (pi[a] > 0.0 ? std::log(pi[a]) : 0.0) - log_g[a];
            grad[tr.s][a] += pi[a] * (centered - kl);
        }
        count[tr.s] += 1;
    }
    mean_kl /= static_cast<double>(batch.size());
    for (int s = 0; s < agent.n_states(); ++s) {
        if (count[s] == 0) continue;
        for (int a = 0; a < A; ++a)
            agent.params.theta[s][a] -= agent.cfg.lr_actor * grad[s][a] / count[s];
    }
    return mean_kl;
}

std::optional<double> plan_update(GioAgent& agent, const VariationalModel& model,
                                  const std::vector<Transition>& batch) {
    if (agent.model_train_steps == 0) {
        static bool warned = false;
        if (!warned) {
            std::fprintf(stderr, "plan_update: generative model untrained, skipping\n");
            warned = true;
        }
        return std::nullopt;
    }
    // one simulated step from buffered states under the current policy
    std::vector<Transition> simulated;
    simulated.reserve(batch.size());
    for (const Transition& tr : batch) {
        const int a = agent.rng.categorical(agent.policy_row(tr.s));
        const int s2 = agent.rng.categorical(model.state_row(tr.s, a));
        const int k = agent.rng.categorical(model.reward_row(tr.s, a));
        simulated.push_back({tr.s, a, k, s2, 0.0});
    }
    return actor_update(agent, model, simulated);
}

void polyak(GioAgent& agent) {
    const double tau = agent.cfg.tau;
    for (int s = 0; s < agent.n_states(); ++s)
        for (int a = 0; a < agent.n_actions(); ++a) {
            agent.params.tw1[s][a] =
                (1.0 - tau) * agent.params.tw1[s][a] + tau * agent.params.w1[s][a];
            agent.params.tw2[s][a] =
                (1.0 - tau) * agent.params.tw2[s][a] + tau * agent.params.w2[s][a];
        }
}

namespace {

struct EvalStats {
    double mean = 0.0, stdev = 0.0, greedy_mean = 0.0;
};

EvalStats evaluate_agent(const GioAgent& agent, const TabularMdp& env,
                         SeededRng& eval_rng) {
    const auto& cfg = agent.cfg;
    double sum = 0.0, sum_sq = 0.0, greedy_sum = 0.0;
    for (int ep = 0; ep < cfg.eval_episodes; ++ep) {
        int s = eval_rng.categorical(env.initial_dist);
        double ret = 0.0;
        for (int t = 0; t < cfg.eval_horizon; ++t) {
            const int a = eval_rng.categorical(agent.policy_row(s));
            const StepResult sr = step(env, s, a, eval_rng);
            ret += sr.reward;
            s = sr.next_state;
        }
        sum += ret;
        sum_sq += ret * ret;

        s = eval_rng.categorical(env.initial_dist);
        double greedy_ret = 0.0;
        for (int t = 0; t < cfg.eval_horizon; ++t) {
            const auto p = agent.policy_row(s);
            const int a = static_cast<int>(
                std::max_element(p.begin(), p.end()) - p.begin());
            const StepResult sr = step(env, s, a, eval_rng);
            greedy_ret += sr.reward;
            s = sr.next_state;
        }
        greedy_sum += greedy_ret;
    }
    EvalStats stats;
    stats.mean = sum / cfg.eval_episodes;
    const double var = std::max(0.0, sum_sq / cfg.eval_episodes - stats.mean * stats.mean);
    stats.stdev = std::sqrt(var);
    stats.greedy_mean = greedy_sum / cfg.eval_episodes;
    return stats;
}

}  // namespace

RunResult run_agent(GioAgent& agent, const TabularMdp& env, VariationalModel model,
                    long steps) {
    const auto& cfg = agent.cfg;
    SeededRng eval_rng = agent.rng.derive(0xE7A1);
    RunResult out;

    int s = agent.rng.categorical(env.initial_dist);
    int steps_in_episode = 0;
    double last_elbo = 0.0, last_delta = 0.0, last_critic_loss = 0.0, last_kl = 0.0;

    for (long t = 0; t < steps; ++t) {
        const int a = agent.rng.categorical(agent.policy_row(s));
        const StepResult sr = step(env, s, a, agent.rng);
        agent.buffer.push({s, a, sr.atom, sr.next_state, sr.reward});
        s = sr.next_state;
        if (++steps_in_episode >= cfg.episode_len) {
            s = agent.rng.categorical(env.initial_dist);
            steps_in_episode = 0;
        }

        if (static_cast<int>(agent.buffer.size()) >= cfg.warmup) {
            const auto batch = agent.buffer.sample(cfg.batch_size, agent.rng);

            // one ascent step on the mean one-step bound, prior = current policy
            const PolicyTable pi = agent.policy();
            GradientBlock grad = GradientBlock::zeros_like(model);
            double elbo_sum = 0.0;
            for (const Transition& tr : batch) {
                const ElboResult e =
                    one_step_elbo(model, pi, {tr.s, tr.a, tr.next_s, tr.atom});
                elbo_sum += e.value;
                grad.accumulate(e.grad);
            }
            grad.scale(cfg.lr_model / static_cast<double>(batch.size()));
            for (int ss = 0; ss < model.n_states; ++ss) {
                for (int f = 0; f < model.n_outcomes(); ++f)
                    for (int aa = 0; aa < model.n_actions; ++aa)
                        model.phi[ss][f][aa] += grad.phi[ss][f][aa];
                for (int aa = 0; aa < model.n_actions; ++aa) {
                    for (int s2 = 0; s2 < model.n_states; ++s2)
                        model.psi_state[ss][aa][s2] += grad.psi_state[ss][aa][s2];
                    for (int k = 0; k < model.n_atoms; ++k)
                        model.psi_reward[ss][aa][k] += grad.psi_reward[ss][aa][k];
                }
            }
            agent.model_train_steps += 1;
            last_elbo = elbo_sum / batch.size();

            double delta_sum = 0.0;
            for (const Transition& tr : batch) delta_sum += delta(agent, model, tr.next_s);
            last_delta = delta_sum / batch.size();

            if (t % cfg.critic_every == 0)
                last_critic_loss = critic_update(agent, model, batch);
            if (t % cfg.actor_every == 0) last_kl = actor_update(agent, model, batch);
            if (cfg.plan_every > 0 && t % cfg.plan_every == 0) {
                const auto plan_batch = agent.buffer.sample(cfg.plan_batch, agent.rng);
                plan_update(agent, model, plan_batch);
            }
            if (t % cfg.target_every == 0) polyak(agent);
        }

        if ((t + 1) % cfg.eval_every == 0 || t + 1 == steps) {
            const EvalStats stats = evaluate_agent(agent, env, eval_rng);
            out.series.push_back({t + 1, stats.mean, stats.stdev, stats.greedy_mean,
                                  last_elbo, last_delta, last_critic_loss, last_kl});
        }
    }
    out.model = std::move(model);
    return out;
}

}  // namespace gio
