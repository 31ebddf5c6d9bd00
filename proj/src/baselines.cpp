#include "gio/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gio::baselines {

namespace {

Table2 q_from_v(const TabularMdp& mdp, const std::vector<double>& v) {
    Table2 q = make_table2(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            double next = 0.0;
            for (int s2 = 0; s2 < mdp.n_states; ++s2)
                next += mdp.transition[s][a][s2] * v[s2];
            q[s][a] = mdp.expected_reward(s, a) + mdp.gamma * next;
        }
    return q;
}

}  // namespace

std::vector<double> value_iteration(const TabularMdp& mdp, double tol, int max_iters) {
    std::vector<double> v(mdp.n_states, 0.0);
    for (int iter = 0; iter < max_iters; ++iter) {
        const Table2 q = q_from_v(mdp, v);
        double residual = 0.0;
        for (int s = 0; s < mdp.n_states; ++s) {
            const double best = *std::max_element(q[s].begin(), q[s].end());
            residual = std::max(residual, std::abs(best - v[s]));
            v[s] = best;
        }
        if (residual < tol) return v;
    }
    throw std::runtime_error("value_iteration: no convergence");
}

PiResult standard_policy_iteration(const TabularMdp& mdp, const PolicyTable& pi0,
                                   double eval_tol, int max_sweeps) {
    const int S = mdp.n_states, A = mdp.n_actions;
    PiResult out;
    out.policy = pi0;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        // exact evaluation of the current policy
        std::vector<double> v(S, 0.0);
        Table2 q;
        for (;;) {
            q = q_from_v(mdp, v);
            double residual = 0.0;
            for (int s = 0; s < S; ++s) {
                double ev = 0.0;
                for (int a = 0; a < A; ++a) ev += out.policy.probs[s][a] * q[s][a];
                residual = std::max(residual, std::abs(ev - v[s]));
                v[s] = ev;
            }
            if (residual < eval_tol) break;
        }
        out.q_per_sweep.push_back(q);
        // greedy improvement (lowest index wins exact ties)
        PolicyTable next;
        next.probs = make_table2(S, A);
        bool changed = false;
        for (int s = 0; s < S; ++s) {
            int best = 0;
            for (int a = 1; a < A; ++a)
                if (q[s][a] > q[s][best]) best = a;
            next.probs[s][best] = 1.0;
            if (std::abs(next.probs[s][best] - out.policy.probs[s][best]) > 1e-15 ||
                out.policy.probs[s][best] < 1.0)
                changed = true;
        }
        out.q = q;
        if (!changed) {
            out.converged = true;
            break;
        }
        out.policy = next;
    }
    return out;
}

PiResult soft_policy_iteration(const TabularMdp& mdp, const PolicyTable& pi0, double eta,
                               double eval_tol, int max_sweeps, double outer_tol) {
    if (!(eta > 0.0)) throw std::invalid_argument("soft_policy_iteration: eta <= 0");
    const int S = mdp.n_states, A = mdp.n_actions;
    PiResult out;
    out.policy = pi0;
    Table2 q_prev;
    Table2 q = make_table2(S, A);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        // entropy-augmented evaluation: V = E_pi[Q - eta log pi]
        for (;;) {
            std::vector<double> v(S, 0.0);
            for (int s = 0; s < S; ++s) {
                double acc = 0.0;
                for (int a = 0; a < A; ++a) {
                    const double pa = out.policy.probs[s][a];
                    if (pa <= 0.0) continue;
                    acc += pa * (q[s][a] - eta * std::log(pa));
                }
                v[s] = acc;
            }
            const Table2 next_q = q_from_v(mdp, v);
            double residual = 0.0;
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a)
                    residual = std::max(residual, std::abs(next_q[s][a] - q[s][a]));
            q = next_q;
            if (residual < eval_tol) break;
        }
        out.q_per_sweep.push_back(q);
        // softmax improvement at temperature eta
        for (int s = 0; s < S; ++s) {
            double hi = q[s][0];
            for (int a = 1; a < A; ++a) hi = std::max(hi, q[s][a]);
            double z = 0.0;
            for (int a = 0; a < A; ++a) z += std::exp((q[s][a] - hi) / eta);
            for (int a = 0; a < A; ++a)
                out.policy.probs[s][a] = std::exp((q[s][a] - hi) / eta) / z;
        }
        if (!q_prev.empty()) {
            double moved = 0.0;
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a)
                    moved = std::max(moved, std::abs(q[s][a] - q_prev[s][a]));
            if (moved < outer_tol) {
                out.converged = true;
                out.q = q;
                break;
            }
        }
        q_prev = q;
        out.q = q;
    }
    return out;
}

std::vector<ReturnPoint> run_twin_critic_baseline(const TabularMdp& mdp,
                                                  const TwinCriticConfig& cfg,
                                                  long steps, std::uint64_t seed) {
    const int S = mdp.n_states, A = mdp.n_actions;
    SeededRng rng(seed);
    SeededRng eval_rng = rng.derive(0x9E1L);

    Table2 w1 = make_table2(S, A), w2 = make_table2(S, A);
    Table2 t1 = make_table2(S, A), t2 = make_table2(S, A);

    struct Tr {
        int s, a, next_s;
        double r;
    };
    std::vector<Tr> buffer;
    buffer.reserve(cfg.buffer_capacity);
    std::size_t cursor = 0;

    auto policy_row = [&](int s) {
        std::vector<double> p(A);
        double hi = -1e300;
        for (int a = 0; a < A; ++a) {
            p[a] = std::min(w1[s][a], w2[s][a]) / cfg.temperature;
            hi = std::max(hi, p[a]);
        }
        double z = 0.0;
        for (int a = 0; a < A; ++a) {
            p[a] = std::exp(p[a] - hi);
            z += p[a];
        }
        for (int a = 0; a < A; ++a) p[a] /= z;
        return p;
    };

    auto evaluate = [&](long step, std::vector<ReturnPoint>& out) {
        double sum = 0.0, sum_sq = 0.0;
        for (int ep = 0; ep < cfg.eval_episodes; ++ep) {
            int s = eval_rng.categorical(mdp.initial_dist);
            double ret = 0.0;
            for (int t = 0; t < cfg.eval_horizon; ++t) {
                const int a = eval_rng.categorical(policy_row(s));
                const StepResult sr = gio::step(mdp, s, a, eval_rng);
                ret += sr.reward;
                s = sr.next_state;
            }
            sum += ret;
            sum_sq += ret * ret;
        }
        const double mean = sum / cfg.eval_episodes;
        const double var = std::max(0.0, sum_sq / cfg.eval_episodes - mean * mean);
        out.push_back({step, mean, std::sqrt(var)});
    };

    std::vector<ReturnPoint> series;
    int s = rng.categorical(mdp.initial_dist);
    int steps_in_episode = 0;
    for (long t = 0; t < steps; ++t) {
        const int a = rng.categorical(policy_row(s));
        const StepResult sr = gio::step(mdp, s, a, rng);
        if (static_cast<int>(buffer.size()) < cfg.buffer_capacity) {
            buffer.push_back({s, a, sr.next_state, sr.reward});
        } else {
            buffer[cursor] = {s, a, sr.next_state, sr.reward};
            cursor = (cursor + 1) % buffer.size();
        }
        s = sr.next_state;
        if (++steps_in_episode >= cfg.episode_len) {
            s = rng.categorical(mdp.initial_dist);
            steps_in_episode = 0;
        }

        if (static_cast<long>(buffer.size()) >= cfg.warmup) {
            for (int i = 0; i < cfg.batch_size; ++i) {
                const Tr& tr = buffer[rng.below(buffer.size())];
                const auto p = policy_row(tr.next_s);
                const int a2 = rng.categorical(p);
                const double target =
                    tr.r + cfg.gamma * std::min(t1[tr.next_s][a2], t2[tr.next_s][a2]);
                const double lr = cfg.lr / cfg.batch_size;
                w1[tr.s][tr.a] += lr * (target - w1[tr.s][tr.a]);
                w2[tr.s][tr.a] += lr * (target - w2[tr.s][tr.a]);
            }
            for (int ss = 0; ss < S; ++ss)
                for (int aa = 0; aa < A; ++aa) {
                    t1[ss][aa] = (1.0 - cfg.tau) * t1[ss][aa] + cfg.tau * w1[ss][aa];
                    t2[ss][aa] = (1.0 - cfg.tau) * t2[ss][aa] + cfg.tau * w2[ss][aa];
                }
        }
        if ((t + 1) % cfg.eval_every == 0 || t + 1 == steps) evaluate(t + 1, series);
    }
    return series;
}

}  // namespace gio::baselines
