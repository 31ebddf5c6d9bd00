#include "gio/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gio {

void SolverConfig::check() const {
    if (!(eta > 0.0)) throw std::invalid_argument("SolverConfig: eta must be > 0");
    if (!(eval_tol > 0.0) || !(outer_tol > 0.0))
        throw std::invalid_argument("SolverConfig: tolerances must be > 0");
    if (eval_max_iters <= 0 || outer_max_sweeps <= 0)
        throw std::invalid_argument("SolverConfig: iteration budgets must be > 0");
}

namespace {

Table2 mean_rewards(const TabularMdp& mdp) {
    Table2 r = make_table2(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) r[s][a] = mdp.expected_reward(s, a);
    return r;
}

// Per-state constant part of Eq. 4: the eta-weighted expected log-ratio
// under the policy. Only Q varies across operator applications.
std::vector<double> value_offsets(const PolicyTable& pi, const Table2& bonus,
                                  double eta) {
    const int S = pi.n_states(), A = pi.n_actions();
    std::vector<double> offset(S, 0.0);
    for (int s = 0; s < S; ++s) {
        double acc = 0.0;
        for (int a = 0; a < A; ++a) {
            const double pa = pi.probs[s][a];
            if (pa == 0.0) continue;
            acc += pa * (bonus[s][a] - std::log(pa));
        }
        offset[s] = eta * acc;
    }
    return offset;
}

std::vector<double> value_from_q(const PolicyTable& pi, const Table2& q,
                                 const std::vector<double>& offset) {
    const int S = pi.n_states(), A = pi.n_actions();
    std::vector<double> v(S, 0.0);
    for (int s = 0; s < S; ++s) {
        double acc = 0.0;
        for (int a = 0; a < A; ++a) acc += pi.probs[s][a] * q[s][a];
        v[s] = acc + offset[s];
    }
    return v;
}

}  // namespace

QTable apply_bellman(const TabularMdp& mdp, const QTable& q, const PolicyTable& pi,
                     const InferenceBundle& inf, const SolverConfig& cfg) {
    const int S = mdp.n_states, A = mdp.n_actions;
    if (static_cast<int>(q.q.size()) != S || pi.n_states() != S)
        throw std::invalid_argument("apply_bellman: dimension mismatch");

    const Table2 bonus = expected_log_posterior(inf.future, inf.posterior);
    const auto offset = value_offsets(pi, bonus, cfg.eta);
    const auto v = value_from_q(pi, q.q, offset);

    QTable out = QTable::zeros(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            double next = 0.0;
            for (int s2 = 0; s2 < S; ++s2) next += mdp.transition[s][a][s2] * v[s2];
            out.q[s][a] = mdp.expected_reward(s, a) + mdp.gamma * next;
        }
    return out;
}

EvalResult evaluate_policy_frozen(const TabularMdp& mdp, const PolicyTable& pi,
                                  const InferenceBundle& inf, const SolverConfig& cfg,
                                  const QTable* warm_start) {
    const int S = mdp.n_states, A = mdp.n_actions;
    const Table2 rbar = mean_rewards(mdp);
    const Table2 bonus = expected_log_posterior(inf.future, inf.posterior);
    const auto offset = value_offsets(pi, bonus, cfg.eta);

    EvalResult result;
    result.q = warm_start ? *warm_start : QTable::zeros(S, A);
    Table2 next_q = make_table2(S, A);

    for (int iter = 0; iter < cfg.eval_max_iters; ++iter) {
        const auto v = value_from_q(pi, result.q.q, offset);
        double residual = 0.0;
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                double next = 0.0;
                for (int s2 = 0; s2 < S; ++s2) next += mdp.transition[s][a][s2] * v[s2];
                next_q[s][a] = rbar[s][a] + mdp.gamma * next;
                residual = std::max(residual, std::abs(next_q[s][a] - result.q.q[s][a]));
            }
        std::swap(result.q.q, next_q);
        result.residuals.push_back(residual);
        if (residual < cfg.eval_tol) {
            result.converged = true;
            break;
        }
    }
    if (!result.converged)
        throw std::runtime_error(
            "evaluate_policy: no convergence within eval_max_iters (gamma < 1 should "
            "make this impossible)");
    result.v.v = value_from_q(pi, result.q.q, offset);
    return result;
}

EvalResult evaluate_policy(const TabularMdp& mdp, const PolicyTable& pi,
                           const SolverConfig& cfg, const QTable* warm_start) {
    if (!pi.strictly_positive())
        throw std::invalid_argument("evaluate_policy: policy must be strictly positive");
    const FutureSpace space = make_future_space(mdp, cfg.future.kind, cfg.future.k);
    const InferenceBundle inf = exact_posterior(mdp, pi, space);
    return evaluate_policy_frozen(mdp, pi, inf, cfg, warm_start);
}

ImprovedPolicy softmax_improve(const QTable& q, const InferenceBundle& inf,
                               const PolicyTable& pi_prev, const TabularMdp& mdp,
                               const SolverConfig& cfg) {
    cfg.check();
    const int S = mdp.n_states, A = mdp.n_actions;
    if (pi_prev.n_states() != S || static_cast<int>(q.q.size()) != S)
        throw std::invalid_argument("softmax_improve: dimension mismatch");

    const Table2 bonus = expected_log_posterior(inf.future, inf.posterior);

    ImprovedPolicy out;
    out.policy.probs = make_table2(S, A);
    out.log_z.assign(S, 0.0);
    for (int s = 0; s < S; ++s) {
        std::vector<double> x(A);
        double hi = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) {
            x[a] = (q.q[s][a] + cfg.eta * bonus[s][a]) / cfg.eta;
            hi = std::max(hi, x[a]);
        }
        if (!std::isfinite(hi))
            throw std::runtime_error("softmax_improve: degenerate exponent row");
        double sum = 0.0;
        for (int a = 0; a < A; ++a) sum += std::exp(x[a] - hi);
        const double log_z = hi + std::log(sum);
        for (int a = 0; a < A; ++a) out.policy.probs[s][a] = std::exp(x[a] - log_z);
        out.log_z[s] = log_z;
    }
    return out;
}

double softmax_identity_gap(const QTable& q, const InferenceBundle& inf,
                            const ImprovedPolicy& improved, const SolverConfig& cfg) {
    const Table2 bonus = expected_log_posterior(inf.future, inf.posterior);
    double worst = 0.0;
    for (std::size_t s = 0; s < q.q.size(); ++s)
        for (std::size_t a = 0; a < q.q[s].size(); ++a) {
            const double p = improved.policy.probs[s][a];
            if (p <= 1e-12) continue;
            const double lhs = q.q[s][a] + cfg.eta * bonus[s][a];
            const double rhs = cfg.eta * (std::log(p) + improved.log_z[s]);
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    return worst;
}

ProjectionResult project_policy(const PolicyClass& cls, const PolicyTable& target) {
    const int S = target.n_states(), A = target.n_actions();
    if (S == 0 || A == 0) throw std::invalid_argument("project_policy: empty target");

    ProjectionResult out;
    out.kl_per_state.assign(S, 0.0);

    switch (cls.kind) {
        case PolicyClass::Kind::FullTabular:
            out.policy = target;  // unconstrained KL minimum
            break;
        case PolicyClass::Kind::Uniform: {
            out.policy = PolicyTable::uniform(S, A);
            for (int s = 0; s < S; ++s)
                out.kl_per_state[s] = kl(out.policy.probs[s], target.probs[s]);
            break;
        }
        case PolicyClass::Kind::FlooredTabular: {
            const double eps = cls.floor;
            if (!(eps >= 0.0) || eps * A > 1.0 + 1e-12)
                throw std::invalid_argument("project_policy: infeasible floor");
            out.policy.probs = make_table2(S, A);
            for (int s = 0; s < S; ++s) {
                const auto& g = target.probs[s];
                // Entries clipped to the floor take mass eps; the rest stay
                // proportional to the target. Activate until stable.
                std::vector<char> active(A, 0);
                int n_active = 0;
                double scale = 1.0;
                for (;;) {
                    double denom = 0.0;
                    for (int a = 0; a < A; ++a)
                        if (!active[a]) denom += g[a];
                    scale = denom > 0.0 ? (1.0 - eps * n_active) / denom : 0.0;
                    bool changed = false;
                    for (int a = 0; a < A; ++a) {
                        if (active[a]) continue;
                        if (scale * g[a] < eps) {
                            active[a] = 1;
                            ++n_active;
                            changed = true;
                        }
                    }
                    if (!changed) break;
                }
                for (int a = 0; a < A; ++a)
                    out.policy.probs[s][a] = active[a] ? eps : scale * g[a];
                out.kl_per_state[s] = kl(out.policy.probs[s], g);
            }
            break;
        }
    }
    double total = 0.0;
    for (double d : out.kl_per_state) total += d;
    out.mean_kl = total / S;
    return out;
}

namespace {

double max_state_kl(const PolicyTable& p, const PolicyTable& q) {
    double worst = 0.0;
    for (int s = 0; s < p.n_states(); ++s)
        worst = std::max(worst, kl(p.probs[s], q.probs[s]));
    return worst;
}

// Series terms the convergence argument assumes to have a limit: for each
// sweep k, the expectation gap between the stand-in optimal joint and the
// sweep's joint of eta*(log post* - log pi*) + Q^{pi_k}, maximized over
// (s, a). Filled into the trace after the run, with the converged policy
// standing in for the optimum.
void fill_convergence_series(const TabularMdp& mdp, const FutureSpace& space,
                             const PolicyTable& pi_star, const SolverConfig& cfg,
                             IterationTrace& trace) {
    const int S = mdp.n_states, A = mdp.n_actions, F = space.size();
    const InferenceBundle inf_star = exact_posterior(mdp, pi_star, space);

    // g[s'][a'] = Q^{pi_k}(s',a') is added per sweep; the log-ratio part is fixed.
    Table2 log_ratio = make_table2(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            double acc = 0.0;
            for (int f = 0; f < F; ++f) {
                const double like = inf_star.future.likelihood[s][a][f];
                if (like == 0.0) continue;
                acc += like * safe_log(inf_star.posterior.post[s][f][a]);
            }
            log_ratio[s][a] = cfg.eta * (acc - safe_log(pi_star.probs[s][a]));
        }

    const bool policy_dependent_likelihood = space.kind == FutureKind::KStep;
    Table2 partial = make_table2(S, A);
    for (std::size_t k = 0; k < trace.sweeps.size(); ++k) {
        const PolicyTable& pi_k1 = trace.policies[k];
        const QTable& q_k = trace.q_tables[k];

        // Expected g under each policy's joint over (a', F'). Only the
        // action weights differ unless the likelihood itself is
        // policy-dependent (KStep): g's F-expectation must then be retaken
        // under the sweep policy's likelihood.
        std::vector<double> h_star(S, 0.0), h_k1(S, 0.0);
        const FutureModel* like_k1 = &inf_star.future;
        FutureModel rebuilt;
        if (policy_dependent_likelihood) {
            rebuilt = build_future_model(mdp, space, &pi_k1);
            like_k1 = &rebuilt;
        }
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                const double g_sa = log_ratio[s][a] + q_k.q[s][a];
                h_star[s] += pi_star.probs[s][a] * g_sa;
                if (!policy_dependent_likelihood) {
                    h_k1[s] += pi_k1.probs[s][a] * g_sa;
                } else {
                    // retake E_F of the log-posterior under the sweep likelihood
                    double acc = 0.0;
                    for (int f = 0; f < F; ++f) {
                        const double like = like_k1->likelihood[s][a][f];
                        if (like == 0.0) continue;
                        acc += like * safe_log(inf_star.posterior.post[s][f][a]);
                    }
                    const double g_k = cfg.eta * (acc - safe_log(pi_star.probs[s][a])) +
                                       q_k.q[s][a];
                    h_k1[s] += pi_k1.probs[s][a] * g_k;
                }
            }
        }

        double worst_term = 0.0, worst_partial = 0.0;
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                double term = 0.0;
                for (int s2 = 0; s2 < S; ++s2)
                    term += mdp.transition[s][a][s2] * (h_star[s2] - h_k1[s2]);
                partial[s][a] += term;
                worst_term = std::max(worst_term, std::abs(term));
                worst_partial = std::max(worst_partial, std::abs(partial[s][a]));
            }
        trace.sweeps[k].assumption3_term = worst_term;
        trace.sweeps[k].assumption3_partial_sum = worst_partial;
    }
}

}  // namespace

SolveResult policy_iteration(const TabularMdp& mdp, const PolicyTable& pi0,
                             const SolverConfig& cfg) {
    cfg.check();
    if (!pi0.strictly_positive())
        throw std::invalid_argument("policy_iteration: pi0 must be strictly positive");

    const FutureSpace space = make_future_space(mdp, cfg.future.kind, cfg.future.k);
    const PolicyClass full_class{PolicyClass::Kind::FullTabular, 0.0};

    PolicyTable pi = pi0;
    InferenceBundle inf = exact_posterior(mdp, pi, space);
    EvalResult eval = evaluate_policy_frozen(mdp, pi, inf, cfg);
    ImprovedPolicy improved = softmax_improve(eval.q, inf, pi, mdp, cfg);

    SolveResult result;
    for (int sweep = 0; sweep < cfg.outer_max_sweeps; ++sweep) {
        const double identity_gap = softmax_identity_gap(eval.q, inf, improved, cfg);
        PolicyTable pi_next = project_policy(full_class, improved.policy).policy;

        InferenceBundle inf_next = exact_posterior(mdp, pi_next, space);
        EvalResult eval_next = evaluate_policy_frozen(mdp, pi_next, inf_next, cfg, &eval.q);

        SweepRecord rec;
        rec.sweep = sweep;
        rec.bellman_residual = sup_norm_diff(eval_next.q.q, eval.q.q);
        rec.min_q_delta = min_elementwise_diff(eval_next.q.q, eval.q.q);
        const auto mi = mutual_information(inf_next, pi_next);
        for (double m : mi) rec.mi_mean += m;
        rec.mi_mean /= mdp.n_states;
        rec.objective = objective_from_v(mdp, eval_next.v);
        rec.eq_identity_gap = identity_gap;
        rec.log_z = improved.log_z;

        // The next sweep's improvement doubles as this sweep's fixed-point
        // certificate: pi_next against its own softmax image.
        ImprovedPolicy improved_next = softmax_improve(eval_next.q, inf_next, pi_next, mdp, cfg);
        rec.fixed_point_kl = max_state_kl(pi_next, improved_next.policy);

        result.trace.sweeps.push_back(std::move(rec));
        result.trace.policies.push_back(pi_next);
        result.trace.q_tables.push_back(eval.q);

        const double residual = result.trace.sweeps.back().bellman_residual;
        pi = std::move(pi_next);
        inf = std::move(inf_next);
        eval = std::move(eval_next);
        improved = std::move(improved_next);
        if (residual < cfg.outer_tol) {
            result.converged = true;
            break;
        }
    }

    fill_convergence_series(mdp, space, pi, cfg, result.trace);
    result.policy = std::move(pi);
    result.q = std::move(eval.q);
    result.v = std::move(eval.v);
    return result;
}

MonotonicityReport verify_monotonicity(const TabularMdp& mdp, const PolicyTable& pi,
                                       const SolverConfig& cfg) {
    cfg.check();
    if (!pi.strictly_positive())
        throw std::invalid_argument("verify_monotonicity: policy must be strictly positive");

    const FutureSpace space = make_future_space(mdp, cfg.future.kind, cfg.future.k);
    const InferenceBundle inf_pi = exact_posterior(mdp, pi, space);
    const EvalResult eval_pi = evaluate_policy_frozen(mdp, pi, inf_pi, cfg);

    const ImprovedPolicy improved = softmax_improve(eval_pi.q, inf_pi, pi, mdp, cfg);

    // Improved policy under the previous policy's posterior and likelihood.
    const EvalResult eval_frozen =
        evaluate_policy_frozen(mdp, improved.policy, inf_pi, cfg, &eval_pi.q);

    const InferenceBundle inf_new = exact_posterior(mdp, improved.policy, space);
    const EvalResult eval_new =
        evaluate_policy_frozen(mdp, improved.policy, inf_new, cfg, &eval_frozen.q);

    MonotonicityReport report;
    report.q_before = eval_pi.q;
    report.q_frozen = eval_frozen.q;
    report.q_after = eval_new.q;
    report.min_gap_frozen_vs_before = min_elementwise_diff(eval_frozen.q.q, eval_pi.q.q);
    report.min_gap_after_vs_frozen = min_elementwise_diff(eval_new.q.q, eval_frozen.q.q);
    report.min_gap_after_vs_before = min_elementwise_diff(eval_new.q.q, eval_pi.q.q);
    return report;
}

double objective_from_v(const TabularMdp& mdp, const VTable& v) {
    double obj = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) obj += mdp.initial_dist[s] * v.v[s];
    return obj;
}

double objective_value(const TabularMdp& mdp, const PolicyTable& pi,
                       const SolverConfig& cfg) {
    const EvalResult eval = evaluate_policy(mdp, pi, cfg);
    return objective_from_v(mdp, eval.v);
}

}  // namespace gio
