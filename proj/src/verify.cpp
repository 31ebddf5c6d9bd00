#include "gio/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "gio/agent.hpp"
#include "gio/baselines.hpp"
#include "gio/envs.hpp"
#include "gio/experiment.hpp"
#include "gio/inference.hpp"
#include "gio/solver.hpp"
#include "gio/variational.hpp"

namespace gio::verify {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(const char* pattern, double a, double b = 0.0) {
    char buf[200];
    std::snprintf(buf, sizeof(buf), pattern, a, b);
    return buf;
}

PolicyTable random_positive_policy(int n_states, int n_actions, SeededRng& rng) {
    PolicyTable pi;
    pi.probs = make_table2(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
        double sum = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            const double u = rng.uniform();
            pi.probs[s][a] = -std::log(u < 1e-300 ? 1e-300 : u);
            sum += pi.probs[s][a];
        }
        for (int a = 0; a < n_actions; ++a)
            pi.probs[s][a] = 0.7 * pi.probs[s][a] / sum + 0.3 / n_actions;
    }
    return pi;
}

QTable random_q(int n_states, int n_actions, double scale, SeededRng& rng) {
    QTable q = QTable::zeros(n_states, n_actions);
    for (auto& row : q.q)
        for (double& x : row) x = scale * (2.0 * rng.uniform() - 1.0);
    return q;
}

std::vector<double> dirichlet(int n, SeededRng& rng) {
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

// ------------------------------------------------------------------
// contraction: sup-norm ratio of the intrinsic operator is at most gamma
// ------------------------------------------------------------------
CheckResult check_contraction(const VerifyOptions& opt) {
    CheckResult res{"contraction", true, kInf, ""};
    SeededRng root(opt.seed);
    const int instances = opt.quick ? 20 : 100;
    double worst_ratio = 0.0;
    for (int i = 0; i < instances; ++i) {
        SeededRng rng = root.derive(i);
        const int S = 2 + static_cast<int>(rng.below(9));
        const int A = 2 + static_cast<int>(rng.below(4));
        const int K = 1 + static_cast<int>(rng.below(3));
        const double gamma = 0.1 + 0.88 * rng.uniform();
        TabularMdp mdp = envs::random_mdp(S, A, K, rng(), gamma);
        const PolicyTable pi = random_positive_policy(S, A, rng);

        SolverConfig cfg;
        cfg.eta = 0.1 + 2.0 * rng.uniform();
        cfg.future.kind = i % 3 == 0   ? FutureKind::OneStep
                          : i % 3 == 1 ? FutureKind::NextStateOnly
                                       : FutureKind::KStep;
        cfg.future.k = cfg.future.kind == FutureKind::KStep ? 2 : 1;
        const FutureSpace space = make_future_space(mdp, cfg.future.kind, cfg.future.k);
        const InferenceBundle inf = exact_posterior(mdp, pi, space);

        for (int pair = 0; pair < 10; ++pair) {
            const QTable q1 = random_q(S, A, 5.0, rng);
            const QTable q2 = random_q(S, A, 5.0, rng);
            const QTable t1 = apply_bellman(mdp, q1, pi, inf, cfg);
            const QTable t2 = apply_bellman(mdp, q2, pi, inf, cfg);
            const double in_dist = sup_norm_diff(q1.q, q2.q);
            const double out_dist = sup_norm_diff(t1.q, t2.q);
            const double slack = gamma * in_dist + 1e-12 - out_dist;
            res.worst_margin = std::min(res.worst_margin, slack);
            if (in_dist > 0.0) worst_ratio = std::max(worst_ratio, out_dist / in_dist);
            if (slack < 0.0) res.pass = false;
        }
    }
    res.detail = fmt("worst ratio %.6f over %g instances", worst_ratio,
                     static_cast<double>(instances));
    return res;
}

// ------------------------------------------------------------------
// fixed-point: evaluation residual below tolerance, unique fixed point
// ------------------------------------------------------------------
CheckResult check_fixed_point(const VerifyOptions& opt) {
    CheckResult res{"fixed-point", true, kInf, ""};
    SeededRng root(opt.seed ^ 0xF1);
    const int instances = opt.quick ? 5 : 20;
    for (int i = 0; i < instances; ++i) {
        SeededRng rng = root.derive(i);
        const int S = 2 + static_cast<int>(rng.below(7));
        const int A = 2 + static_cast<int>(rng.below(4));
        TabularMdp mdp = envs::random_mdp(S, A, 2, rng(), 0.3 + 0.6 * rng.uniform());
        const PolicyTable pi = random_positive_policy(S, A, rng);
        SolverConfig cfg;
        cfg.eta = 0.5 + rng.uniform();
        const QTable q0 = random_q(S, A, 10.0, rng);
        const EvalResult a = evaluate_policy(mdp, pi, cfg);
        const EvalResult b = evaluate_policy(mdp, pi, cfg, &q0);
        const double resid = a.residuals.back();
        const double diff = sup_norm_diff(a.q.q, b.q.q);
        res.worst_margin = std::min({res.worst_margin, cfg.eval_tol - resid, 1e-9 - diff});
        if (resid >= cfg.eval_tol || diff > 1e-9) res.pass = false;
    }
    res.detail = fmt("%g instances, two warm starts each", static_cast<double>(instances));
    return res;
}

// ------------------------------------------------------------------
// softmax-optimality: the closed-form policy beats a dense simplex grid
// on the one-step objective
// ------------------------------------------------------------------
double one_step_objective(const std::vector<double>& cand, const std::vector<double>& gain,
                          double eta) {
    // sum_a c_a * gain_a + eta * H(c)
    double value = 0.0;
    for (std::size_t a = 0; a < cand.size(); ++a) {
        value += cand[a] * gain[a];
        if (cand[a] > 0.0) value -= eta * cand[a] * std::log(cand[a]);
    }
    return value;
}

void simplex_grid(int n, int parts, std::vector<double>& scratch,
                  const std::function<void(const std::vector<double>&)>& visit,
                  int depth = 0, int used = 0) {
    if (depth == parts - 1) {
        scratch[depth] = static_cast<double>(n - used) / n;
        visit(scratch);
        return;
    }
    for (int take = 0; take + used <= n; ++take) {
        scratch[depth] = static_cast<double>(take) / n;
        simplex_grid(n, parts, scratch, visit, depth + 1, used + take);
    }
}

int grid_resolution(int actions) {
    switch (actions) {
        case 2: return 9999;
        case 3: return 140;
        case 4: return 38;
        default: return 20;  // 5 actions
    }
}

CheckResult check_softmax_optimality(const VerifyOptions& opt) {
    CheckResult res{"softmax-optimality", true, kInf, ""};
    SeededRng root(opt.seed ^ 0x50F7);
    const int instances = opt.quick ? 10 : 50;
    long candidates = 0;
    for (int i = 0; i < instances; ++i) {
        SeededRng rng = root.derive(i);
        const int S = 2 + static_cast<int>(rng.below(5));
        const int A = 2 + static_cast<int>(rng.below(4));
        const int K = 1 + static_cast<int>(rng.below(2));
        TabularMdp mdp = envs::random_mdp(S, A, K, rng(), 0.9);
        const PolicyTable pi = random_positive_policy(S, A, rng);
        SolverConfig cfg;
        cfg.eta = (i % 3 == 0) ? 0.2 : (i % 3 == 1 ? 1.0 : 3.0);
        const FutureSpace space = make_future_space(mdp, FutureKind::OneStep);
        const InferenceBundle inf = exact_posterior(mdp, pi, space);
        const QTable q = random_q(S, A, 3.0, rng);
        const ImprovedPolicy improved = softmax_improve(q, inf, pi, mdp, cfg);
        const Table2 bonus = expected_log_posterior(inf.future, inf.posterior);

        for (int s = 0; s < S; ++s) {
            std::vector<double> gain(A);
            for (int a = 0; a < A; ++a) gain[a] = q.q[s][a] + cfg.eta * bonus[s][a];
            const double best = one_step_objective(improved.policy.probs[s], gain, cfg.eta);
            auto consider = [&](const std::vector<double>& cand) {
                const double value = one_step_objective(cand, gain, cfg.eta);
                res.worst_margin = std::min(res.worst_margin, best - value);
                ++candidates;
            };
            std::vector<double> scratch(A);
            simplex_grid(grid_resolution(A), A, scratch, consider);
            for (int r = 0; r < 1000; ++r) consider(dirichlet(A, rng));
        }
    }
    if (res.worst_margin < -1e-9) res.pass = false;
    res.detail = fmt("%g candidate policies tested", static_cast<double>(candidates));
    return res;
}

// ------------------------------------------------------------------
// softmax-identity: the improvement identity holds after every sweep of
// every benchmark run
// ------------------------------------------------------------------
CheckResult check_softmax_identity(const VerifyOptions& opt) {
    CheckResult res{"softmax-identity", true, kInf, ""};
    double worst_gap = 0.0;
    for (const envs::Benchmark& bench : envs::benchmark_suite()) {
        const TabularMdp mdp = envs::make(bench.spec);
        SolverConfig cfg;
        cfg.eta = bench.eta;
        cfg.future = bench.future;
        cfg.outer_max_sweeps = opt.quick ? 60 : 400;
        const PolicyTable pi0 = seeded_initial_policy(mdp.n_states, mdp.n_actions, 1);
        const SolveResult solved = policy_iteration(mdp, pi0, cfg);
        for (const SweepRecord& rec : solved.trace.sweeps)
            worst_gap = std::max(worst_gap, rec.eq_identity_gap);
    }
    res.worst_margin = 1e-9 - worst_gap;
    res.pass = worst_gap < 1e-9;
    res.detail = fmt("worst identity gap %.3e across benchmark sweeps", worst_gap);
    return res;
}

// ------------------------------------------------------------------
// theorem2: elementwise Q never decreases across sweeps
// ------------------------------------------------------------------
CheckResult check_theorem2(const VerifyOptions& opt) {
    CheckResult res{"theorem2", true, kInf, ""};
    const int seeds = opt.quick ? 8 : 50;
    const FutureSpec kinds[] = {{FutureKind::OneStep, 1},
                                {FutureKind::NextStateOnly, 1},
                                {FutureKind::KStep, 2}};

    if (opt.inject == InjectedBug::NegateEta) {
        // Sensitivity fixture: flip the sign of the improvement temperature
        // (softmin instead of softmax) and watch monotonicity break.
        SeededRng rng(opt.seed ^ 0x7E2);
        TabularMdp mdp = envs::random_mdp(5, 3, 2, rng(), 0.9);
        SolverConfig cfg;
        cfg.eta = 1.0;
        const FutureSpace space = make_future_space(mdp, FutureKind::OneStep);
        PolicyTable pi = random_positive_policy(5, 3, rng);
        for (int sweep = 0; sweep < 5; ++sweep) {
            const InferenceBundle inf = exact_posterior(mdp, pi, space);
            const EvalResult before = evaluate_policy_frozen(mdp, pi, inf, cfg);
            const Table2 bonus = expected_log_posterior(inf.future, inf.posterior);
            PolicyTable bugged;
            bugged.probs = make_table2(5, 3);
            for (int s = 0; s < 5; ++s) {
                double z = 0.0;
                std::vector<double> x(3);
                for (int a = 0; a < 3; ++a)
                    x[a] = -(before.q.q[s][a] + cfg.eta * bonus[s][a]) / cfg.eta;
                const double hi = *std::max_element(x.begin(), x.end());
                for (int a = 0; a < 3; ++a) z += std::exp(x[a] - hi);
                for (int a = 0; a < 3; ++a)
                    bugged.probs[s][a] = std::exp(x[a] - hi) / z;
            }
            const EvalResult after = evaluate_policy(mdp, bugged, cfg);
            res.worst_margin =
                std::min(res.worst_margin,
                         min_elementwise_diff(after.q.q, before.q.q) + 1e-8);
            pi = bugged;
        }
        res.pass = res.worst_margin >= 0.0;
        res.detail = "injected negate-eta fixture";
        return res;
    }

    double worst_delta = kInf;
    for (int seed = 0; seed < seeds; ++seed) {
        for (const FutureSpec& future : kinds) {
            SeededRng rng(opt.seed + 1000 * seed);
            TabularMdp mdp = envs::random_mdp(5, 3, 2, rng(), 0.9);
            SolverConfig cfg;
            cfg.eta = 1.0;
            cfg.future = future;
            cfg.outer_max_sweeps = opt.quick ? 80 : 300;
            const PolicyTable pi0 =
                seeded_initial_policy(mdp.n_states, mdp.n_actions, seed + 17);
            const SolveResult solved = policy_iteration(mdp, pi0, cfg);
            for (const SweepRecord& rec : solved.trace.sweeps)
                worst_delta = std::min(worst_delta, rec.min_q_delta);
        }
    }
    res.worst_margin = worst_delta + 1e-8;
    res.pass = res.worst_margin >= 0.0;
    res.detail = fmt("min Q-delta %.3e over %g seeds x 3 future kinds", worst_delta,
                     static_cast<double>(seeds));
    return res;
}

// ------------------------------------------------------------------
// monotone-chain: the two intermediate bounds of the improvement proof
// ------------------------------------------------------------------
CheckResult check_monotone_chain(const VerifyOptions& opt) {
    CheckResult res{"monotone-chain", true, kInf, ""};
    SeededRng root(opt.seed ^ 0xC4A1);
    const int instances = opt.quick ? 6 : 25;
    for (int i = 0; i < instances; ++i) {
        SeededRng rng = root.derive(i);
        const int S = 2 + static_cast<int>(rng.below(5));
        const int A = 2 + static_cast<int>(rng.below(3));
        TabularMdp mdp = envs::random_mdp(S, A, 2, rng(), 0.9);
        SolverConfig cfg;
        cfg.eta = 0.3 + 1.5 * rng.uniform();
        cfg.future.kind = i % 2 == 0 ? FutureKind::OneStep : FutureKind::NextStateOnly;
        const PolicyTable pi = random_positive_policy(S, A, rng);
        const MonotonicityReport report = verify_monotonicity(mdp, pi, cfg);
        res.worst_margin = std::min({res.worst_margin,
                                     report.min_gap_frozen_vs_before + 1e-9,
                                     report.min_gap_after_vs_frozen + 1e-9,
                                     report.min_gap_after_vs_before + 1e-9});
    }
    res.pass = res.worst_margin >= 0.0;
    res.detail = fmt("%g random uniform-start instances", static_cast<double>(instances));
    return res;
}

// ------------------------------------------------------------------
// theorem1: fixed-point certificates at convergence; the assumed series
// increments are reported, not asserted
// ------------------------------------------------------------------
CheckResult check_theorem1(const VerifyOptions& opt) {
    CheckResult res{"theorem1", true, kInf, ""};
    double worst_kl = 0.0, worst_increment = 0.0;
    bool series_ok = true;
    for (const envs::Benchmark& bench : envs::benchmark_suite()) {
        const TabularMdp mdp = envs::make(bench.spec);
        SolverConfig cfg;
        cfg.eta = bench.eta;
        cfg.future = bench.future;
        cfg.outer_max_sweeps = opt.quick ? 120 : 600;
        const PolicyTable pi0 = seeded_initial_policy(mdp.n_states, mdp.n_actions, 1);
        const SolveResult solved = policy_iteration(mdp, pi0, cfg);
        if (!solved.converged) {
            res.pass = false;
            res.detail += bench.label + ": no convergence; ";
            continue;
        }
        const SweepRecord& last = solved.trace.sweeps.back();
        worst_kl = std::max(worst_kl, last.fixed_point_kl);
        worst_increment = std::max(worst_increment, last.assumption3_term);
        if (last.assumption3_term >= 1e-6) series_ok = false;
    }
    res.worst_margin = 1e-8 - worst_kl;
    if (worst_kl >= 1e-8) res.pass = false;
    res.detail += fmt("worst certificate %.3e; ", worst_kl);
    res.detail += fmt("final series increment %.3e ", worst_increment);
    res.detail += series_ok ? "(below 1e-6)" : "(FLAG: above 1e-6, reported only)";
    return res;
}

// ------------------------------------------------------------------
// equivalences: soft policy iteration on invertible dynamics; frozen
// fixpoint on uninformative dynamics
// ------------------------------------------------------------------
CheckResult check_equivalences(const VerifyOptions& opt) {
    CheckResult res{"equivalences", true, kInf, ""};

    {  // invertible: GIO == soft PI sweep for sweep
        const TabularMdp mdp = envs::invertible(4, 0.9, 5);
        const PolicyTable pi0 = seeded_initial_policy(mdp.n_states, mdp.n_actions, 9);
        SolverConfig cfg;
        cfg.eta = 0.7;
        cfg.outer_max_sweeps = opt.quick ? 40 : 200;
        const SolveResult gio = policy_iteration(mdp, pi0, cfg);
        const baselines::PiResult soft = baselines::soft_policy_iteration(
            mdp, pi0, cfg.eta, cfg.eval_tol, cfg.outer_max_sweeps, cfg.outer_tol);
        const std::size_t sweeps =
            std::min(gio.trace.q_tables.size(), soft.q_per_sweep.size());
        double worst = 0.0;
        for (std::size_t k = 0; k < sweeps; ++k)
            worst = std::max(worst,
                             sup_norm_diff(gio.trace.q_tables[k], soft.q_per_sweep[k]));
        res.worst_margin = std::min(res.worst_margin, 1e-8 - worst);
        if (worst > 1e-8) res.pass = false;
        res.detail += fmt("invertible worst per-sweep Q gap %.3e; ", worst);
    }

    {  // uninformative: MI identically zero, policy pinned to pi0
        const TabularMdp mdp = envs::uninformative(3, 2, 3);
        const PolicyTable pi0 = seeded_initial_policy(mdp.n_states, mdp.n_actions, 4);
        SolverConfig cfg;
        cfg.eta = 1.0;
        const SolveResult solved = policy_iteration(mdp, pi0, cfg);
        double worst_mi = 0.0;
        for (const SweepRecord& rec : solved.trace.sweeps)
            worst_mi = std::max(worst_mi, std::abs(rec.mi_mean));
        double policy_gap = 0.0;
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 0; a < mdp.n_actions; ++a)
                policy_gap = std::max(policy_gap, std::abs(solved.policy.probs[s][a] -
                                                           pi0.probs[s][a]));
        res.worst_margin =
            std::min({res.worst_margin, 1e-12 - worst_mi, 1e-9 - policy_gap});
        if (worst_mi > 1e-12 || policy_gap > 1e-9 || !solved.converged) res.pass = false;
        res.detail += fmt("uninformative MI %.2e, policy drift %.2e", worst_mi, policy_gap);
    }
    return res;
}

// ------------------------------------------------------------------
// lemma-corollary: the two KL gap identities on random instances
// ------------------------------------------------------------------
CheckResult check_lemma_corollary(const VerifyOptions& opt) {
    CheckResult res{"lemma-corollary", true, kInf, ""};
    SeededRng root(opt.seed ^ 0x1E44);
    const int instances = opt.quick ? 200 : 1000;
    for (int i = 0; i < instances; ++i) {
        SeededRng rng = root.derive(i);
        const int nx = 2 + static_cast<int>(rng.below(5));
        const int ny = 2 + static_cast<int>(rng.below(5));
        const auto flat = dirichlet(nx * ny, rng);
        Table2 joint = make_table2(nx, ny);
        std::vector<double> p_y(ny, 0.0), p_x(nx, 0.0);
        for (int x = 0; x < nx; ++x)
            for (int y = 0; y < ny; ++y) {
                joint[x][y] = flat[x * ny + y];
                p_y[y] += joint[x][y];
                p_x[x] += joint[x][y];
            }

        const auto q_y = dirichlet(ny, rng);
        const double gap1 = lemma1_gap(joint, q_y);
        const double closed1 = kl(p_y, q_y);
        res.worst_margin = std::min({res.worst_margin, 1e-10 - std::abs(gap1 - closed1),
                                     gap1 + 1e-12});

        Table2 q_xy = make_table2(ny, nx);
        for (int y = 0; y < ny; ++y) q_xy[y] = dirichlet(nx, rng);
        const double gap2 = corollary1_gap(joint, q_xy);
        double closed2 = 0.0;
        for (int y = 0; y < ny; ++y) {
            std::vector<double> cond(nx);
            for (int x = 0; x < nx; ++x) cond[x] = joint[x][y] / p_y[y];
            closed2 += p_y[y] * kl(cond, q_xy[y]);
        }
        res.worst_margin = std::min({res.worst_margin, 1e-10 - std::abs(gap2 - closed2),
                                     gap2 + 1e-12});

        // conditional that ignores y: the gap is the mutual information
        Table2 q_marginal = make_table2(ny, nx);
        for (int y = 0; y < ny; ++y) q_marginal[y] = p_x;
        const double gap_mi = corollary1_gap(joint, q_marginal);
        double mi = 0.0;
        for (int x = 0; x < nx; ++x)
            for (int y = 0; y < ny; ++y)
                if (joint[x][y] > 0.0)
                    mi += joint[x][y] * std::log(joint[x][y] / (p_x[x] * p_y[y]));
        res.worst_margin = std::min(res.worst_margin, 1e-10 - std::abs(gap_mi - mi));
    }
    if (res.worst_margin < 0.0) res.pass = false;
    res.detail = fmt("%g random joints", static_cast<double>(instances));
    return res;
}

// ------------------------------------------------------------------
// elbo: bound, gap identity, tightness at the true posterior
// ------------------------------------------------------------------
CheckResult check_elbo(const VerifyOptions& opt) {
    CheckResult res{"elbo", true, kInf, ""};
    SeededRng root(opt.seed ^ 0xE1B0);
    const int instances = opt.quick ? 8 : 30;
    for (int i = 0; i < instances; ++i) {
        SeededRng rng = root.derive(i);
        const int S = 2 + static_cast<int>(rng.below(4));
        const int A = 2 + static_cast<int>(rng.below(3));
        const int K = 1 + static_cast<int>(rng.below(2));
        TabularMdp mdp = envs::random_mdp(S, A, K, rng(), 0.9);
        const PolicyTable pi = random_positive_policy(S, A, rng);
        const FutureSpace space = make_future_space(mdp, FutureKind::OneStep);
        const InferenceBundle inf = exact_posterior(mdp, pi, space);

        VariationalModel model = VariationalModel::uniform_init(S, A, K);
        set_true_model_logits(model, mdp);
        for (auto& plane : model.phi)
            for (auto& row : plane)
                for (double& x : row) x = 2.0 * (2.0 * rng.uniform() - 1.0);

        for (int s = 0; s < S; ++s)
            for (int f = 0; f < space.size(); ++f) {
                if (!inf.posterior.defined[s][f]) continue;
                const auto [ns, atom] = space.support[f].steps[0];
                const double log_marginal = std::log(inf.marginal.marg[s][f]);
                const TransitionSample sample{s, -1, ns, atom};
                const double bound = one_step_elbo_value(model, pi, sample);
                const double gap = log_marginal - bound;
                const auto q_row = model.posterior_row(s, model.outcome_index(ns, atom));
                const double expected_kl = kl(q_row, inf.posterior.post[s][f]);
                res.worst_margin = std::min({res.worst_margin, gap + 1e-10,
                                             1e-9 - std::abs(gap - expected_kl)});
            }

        // tightness: load the exact posterior into the inference head
        set_posterior_logits(model, space, inf.posterior);
        for (int s = 0; s < S; ++s)
            for (int f = 0; f < space.size(); ++f) {
                if (!inf.posterior.defined[s][f]) continue;
                const auto [ns, atom] = space.support[f].steps[0];
                const double bound =
                    one_step_elbo_value(model, pi, TransitionSample{s, -1, ns, atom});
                const double log_marginal = std::log(inf.marginal.marg[s][f]);
                res.worst_margin =
                    std::min(res.worst_margin, 1e-10 - std::abs(bound - log_marginal));
            }
    }
    if (res.worst_margin < 0.0) res.pass = false;
    res.detail = fmt("%g random models, every defined (s, outcome) row",
                     static_cast<double>(instances));
    return res;
}

// ------------------------------------------------------------------
// gradcheck: analytic gradients against central finite differences
// ------------------------------------------------------------------
CheckResult check_gradcheck(const VerifyOptions& opt) {
    CheckResult res{"gradcheck", true, kInf, ""};
    SeededRng root(opt.seed ^ 0x94AD);
    const int points = opt.quick ? 20 : 100;
    const double h = 1e-5;
    double worst_rel = 0.0;
    for (int i = 0; i < points; ++i) {
        SeededRng rng = root.derive(i);
        const int S = 3, A = 3, K = 2;
        VariationalModel model = VariationalModel::uniform_init(S, A, K);
        auto randomize = [&](Table3& t) {
            for (auto& plane : t)
                for (auto& row : plane)
                    for (double& x : row) x = 2.0 * (2.0 * rng.uniform() - 1.0);
        };
        randomize(model.phi);
        randomize(model.psi_state);
        randomize(model.psi_reward);
        const PolicyTable pi = random_positive_policy(S, A, rng);
        const TransitionSample sample{static_cast<int>(rng.below(S)), -1,
                                      static_cast<int>(rng.below(S)),
                                      static_cast<int>(rng.below(K))};

        const ElboResult analytic = one_step_elbo(model, pi, sample);
        double max_abs_grad = 0.0, max_abs_err = 0.0;
        auto probe = [&](Table3& param, const Table3& grad) {
            for (std::size_t x = 0; x < param.size(); ++x)
                for (std::size_t y = 0; y < param[x].size(); ++y)
                    for (std::size_t z = 0; z < param[x][y].size(); ++z) {
                        const double keep = param[x][y][z];
                        param[x][y][z] = keep + h;
                        const double up = one_step_elbo_value(model, pi, sample);
                        param[x][y][z] = keep - h;
                        const double down = one_step_elbo_value(model, pi, sample);
                        param[x][y][z] = keep;
                        const double fd = (up - down) / (2.0 * h);
                        max_abs_grad = std::max(max_abs_grad, std::abs(grad[x][y][z]));
                        max_abs_err =
                            std::max(max_abs_err, std::abs(fd - grad[x][y][z]));
                    }
        };
        probe(model.phi, analytic.grad.phi);
        probe(model.psi_state, analytic.grad.psi_state);
        probe(model.psi_reward, analytic.grad.psi_reward);
        worst_rel = std::max(worst_rel, max_abs_err / std::max(1.0, max_abs_grad));
    }
    res.worst_margin = 1e-5 - worst_rel;
    res.pass = worst_rel < 1e-5;
    res.detail = fmt("worst relative error %.3e over %g points", worst_rel,
                     static_cast<double>(points));
    return res;
}

// ------------------------------------------------------------------
// trajectory-bound: the window-1 reduction and the exhaustive T = 2 oracle
// ------------------------------------------------------------------
CheckResult check_trajectory_bound(const VerifyOptions& opt) {
    CheckResult res{"trajectory-bound", true, kInf, ""};
    SeededRng rng(opt.seed ^ 0x7B);

    {  // window-1 reduction equals the sum of one-step bounds
        const int S = 3, A = 2, K = 2;
        TabularMdp mdp = envs::random_mdp(S, A, K, rng(), 0.9);
        const PolicyTable pi = random_positive_policy(S, A, rng);
        VariationalModel model = VariationalModel::uniform_init(S, A, K);
        for (auto& plane : model.phi)
            for (auto& row : plane)
                for (double& x : row) x = 2.0 * rng.uniform() - 1.0;
        set_true_model_logits(model, mdp);

        TrajectoryBatch batch;
        SeededRng walker = rng.derive(2);
        for (int seq = 0; seq < (opt.quick ? 5 : 20); ++seq) {
            Trajectory traj;
            int s = walker.categorical(mdp.initial_dist);
            for (int t = 0; t < 5; ++t) {
                const int a = walker.categorical(pi.probs[s]);
                const StepResult sr = step(mdp, s, a, walker);
                traj.push_back({s, a, sr.next_state, sr.atom});
                s = sr.next_state;
            }
            batch.sequences.push_back(traj);
        }
        const TrajectoryElboResult whole = trajectory_elbo(model, pi, batch, 1);
        double sum = 0.0;
        for (const Trajectory& traj : batch.sequences)
            for (const TrajectoryStep& st : traj)
                sum += one_step_elbo_value(model, pi, {st.s, st.a, st.next_s, st.atom});
        res.worst_margin = std::min(res.worst_margin, 1e-10 - std::abs(whole.value - sum));
        if (std::abs(whole.value - sum) > 1e-10) res.pass = false;
        res.detail += fmt("window-1 gap %.2e; ", std::abs(whole.value - sum));
    }

    {  // T = 2 exhaustive oracle on a 2-state MDP
        const int S = 2, A = 2, K = 1;
        TabularMdp mdp = envs::random_mdp(S, A, K, rng(), 0.9);
        const PolicyTable pi = random_positive_policy(S, A, rng);
        VariationalModel model = VariationalModel::uniform_init(S, A, K);
        set_true_model_logits(model, mdp);

        SeededRng walker = rng.derive(5);
        double worst = 0.0, worst_bound = kInf;
        for (int rep = 0; rep < (opt.quick ? 4 : 16); ++rep) {
            Trajectory traj;
            int s = walker.categorical(mdp.initial_dist);
            for (int t = 0; t < 2; ++t) {
                const int a = walker.categorical(pi.probs[s]);
                const StepResult sr = step(mdp, s, a, walker);
                traj.push_back({s, a, sr.next_state, sr.atom});
                s = sr.next_state;
            }
            TrajectoryBatch batch;
            batch.sequences.push_back(traj);
            HistoryPosterior hist;
            hist.n_actions = A;
            // non-uniform heads so the oracle is not a symmetric special case
            for (int t = 0; t < 2; ++t) {
                std::vector<int> key;
                for (int j = std::max(0, t - 1); j <= t; ++j) {
                    key.push_back(traj[j].s);
                    key.push_back(traj[j].atom);
                }
                key.push_back(traj[t].next_s);
                auto& row = hist.row(key);
                for (double& x : row) x = 2.0 * walker.uniform() - 1.0;
            }
            const TrajectoryElboResult ours = trajectory_elbo(model, pi, batch, 2, &hist);

            // oracle: enumerate both latent actions
            std::vector<std::vector<double>> q_rows(2);
            for (int t = 0; t < 2; ++t) {
                std::vector<int> key;
                for (int j = std::max(0, t - 1); j <= t; ++j) {
                    key.push_back(traj[j].s);
                    key.push_back(traj[j].atom);
                }
                key.push_back(traj[t].next_s);
                const auto logits = hist.row_or_uniform(key);
                double hi = logits[0];
                for (double x : logits) hi = std::max(hi, x);
                double z = 0.0;
                q_rows[t].resize(A);
                for (int a = 0; a < A; ++a) {
                    q_rows[t][a] = std::exp(logits[a] - hi);
                    z += q_rows[t][a];
                }
                for (double& x : q_rows[t]) x /= z;
            }
            double oracle = 0.0;
            for (int a1 = 0; a1 < A; ++a1)
                for (int a2 = 0; a2 < A; ++a2) {
                    const double qz = q_rows[0][a1] * q_rows[1][a2];
                    if (qz <= 0.0) continue;
                    const double log_p =
                        model.log_joint_prob(traj[0].s, a1, traj[0].next_s, traj[0].atom) +
                        safe_log(pi.probs[traj[0].s][a1]) +
                        model.log_joint_prob(traj[1].s, a2, traj[1].next_s, traj[1].atom) +
                        safe_log(pi.probs[traj[1].s][a2]);
                    oracle += qz * (log_p - std::log(qz));
                }
            worst = std::max(worst, std::abs(ours.value - oracle));

            // with the true generative model the bound sits below the exact
            // trajectory log-marginal
            double marginal = 0.0;
            for (int a1 = 0; a1 < A; ++a1)
                for (int a2 = 0; a2 < A; ++a2)
                    marginal += mdp.transition[traj[0].s][a1][traj[0].next_s] *
                                mdp.reward_dist[traj[0].s][a1][traj[0].atom] *
                                pi.probs[traj[0].s][a1] *
                                mdp.transition[traj[1].s][a2][traj[1].next_s] *
                                mdp.reward_dist[traj[1].s][a2][traj[1].atom] *
                                pi.probs[traj[1].s][a2];
            worst_bound = std::min(worst_bound, std::log(marginal) - ours.value);
        }
        res.worst_margin = std::min({res.worst_margin, 1e-9 - worst, worst_bound + 1e-9});
        if (worst > 1e-9 || worst_bound < -1e-9) res.pass = false;
        res.detail += fmt("T=2 oracle gap %.2e, slack to true marginal %.2e", worst,
                          worst_bound);
    }
    return res;
}

// ------------------------------------------------------------------
// agent-bridge: exact components make one agent cycle reproduce one
// solver sweep
// ------------------------------------------------------------------
CheckResult check_agent_bridge(const VerifyOptions& opt) {
    CheckResult res{"agent-bridge", true, kInf, ""};
    SeededRng rng(opt.seed ^ 0xB21D);

    // Deterministic transitions (with collisions) and stochastic rewards:
    // a single (s, a) batch element then covers the successor expectation
    // exactly, while the posterior stays generic.
    const int S = 5, A = 3, K = 2;
    TabularMdp mdp = TabularMdp::zeros(S, A, K);
    mdp.gamma = 0.9;
    mdp.reward_atoms = {-0.4, 1.1};
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            mdp.transition[s][a][rng.below(S)] = 1.0;
            const auto row = dirichlet(K, rng);
            mdp.reward_dist[s][a] = row;
        }
    mdp.initial_dist.assign(S, 1.0 / S);
    require_valid(mdp);

    const PolicyTable pi_ref = random_positive_policy(S, A, rng);
    SolverConfig scfg;
    scfg.eta = 0.8;
    const FutureSpace space = make_future_space(mdp, FutureKind::OneStep);
    const InferenceBundle inf = exact_posterior(mdp, pi_ref, space);
    const EvalResult solver_eval = evaluate_policy_frozen(mdp, pi_ref, inf, scfg);
    const ImprovedPolicy solver_improved =
        softmax_improve(solver_eval.q, inf, pi_ref, mdp, scfg);

    AgentConfig acfg;
    acfg.eta = scfg.eta;
    acfg.gamma = mdp.gamma;
    acfg.tau = 1.0;
    acfg.lr_critic = 1.0;
    acfg.lr_actor = 1.0;
    acfg.exact_delta = true;
    acfg.batch_size = S * A;
    GioAgent agent(S, A, acfg, 7);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            agent.params.theta[s][a] = std::log(pi_ref.probs[s][a]);

    VariationalModel model = VariationalModel::uniform_init(S, A, K);
    set_true_model_logits(model, mdp);
    set_posterior_logits(model, space, inf.posterior);

    std::vector<Transition> batch;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            int next = 0;
            for (int s2 = 0; s2 < S; ++s2)
                if (mdp.transition[s][a][s2] > 0.5) next = s2;
            batch.push_back({s, a, 0, next, mdp.expected_reward(s, a)});
        }

    // critic phase: fitted Q-iteration with full assignment and tau = 1
    double critic_gap = kInf;
    for (int iter = 0; iter < 20000; ++iter) {
        const Table2 before = agent.params.w1;
        critic_update(agent, model, batch);
        polyak(agent);
        if (sup_norm_diff(agent.params.w1, before) < 1e-13) break;
    }
    critic_gap = sup_norm_diff(agent.params.w1, solver_eval.q.q);

    // actor phase: repeated KL steps toward the frozen softmax target
    for (int iter = 0; iter < 40000; ++iter) {
        if (actor_update(agent, model, batch) < 1e-15) break;
    }
    double policy_gap = 0.0;
    const PolicyTable pi_agent = agent.policy();
    for (int s = 0; s < S; ++s) {
        double tv = 0.0;
        for (int a = 0; a < A; ++a)
            tv += 0.5 * std::abs(pi_agent.probs[s][a] - solver_improved.policy.probs[s][a]);
        policy_gap = std::max(policy_gap, tv);
    }

    res.worst_margin = std::min(1e-6 - critic_gap, 1e-6 - policy_gap);
    res.pass = critic_gap < 1e-6 && policy_gap < 1e-6;
    res.detail = fmt("critic gap %.3e, policy TV gap %.3e", critic_gap, policy_gap);
    return res;
}

// ------------------------------------------------------------------
// noisy-tv: zero information in the noise region despite maximal surprise
// ------------------------------------------------------------------
CheckResult check_noisy_tv(const VerifyOptions& opt) {
    CheckResult res{"noisy-tv", true, kInf, ""};
    const TabularMdp mdp = envs::noisy_tv(6, 3, 17);
    const int noise = envs::noisy_tv_noise_states(6);
    const int quiet = 6 - noise;
    SolverConfig cfg;
    cfg.eta = 1.0;
    cfg.outer_max_sweeps = opt.quick ? 60 : 300;
    const PolicyTable pi0 = PolicyTable::uniform(6, 3);

    const auto mi = mutual_information(mdp, pi0, make_future_space(mdp, FutureKind::OneStep));
    double mi_noise = 0.0;
    for (int s = quiet; s < 6; ++s) mi_noise = std::max(mi_noise, std::abs(mi[s]));
    res.worst_margin = std::min(res.worst_margin, 1e-12 - mi_noise);

    // surprise (next-state entropy) is maximal exactly where information is zero
    double min_noise_entropy = kInf;
    for (int s = quiet; s < 6; ++s)
        min_noise_entropy = std::min(min_noise_entropy, entropy(mdp.transition[s][0]));
    res.worst_margin = std::min(res.worst_margin, min_noise_entropy - 1.0);

    const SolveResult solved = policy_iteration(mdp, pi0, cfg);
    double worst_tv_pref = -kInf;
    for (int s = 0; s < quiet; ++s) {
        const double tv_prob = solved.policy.probs[s][2];
        for (int a = 0; a < 2; ++a)
            worst_tv_pref = std::max(worst_tv_pref, tv_prob - solved.policy.probs[s][a]);
    }
    // the information seeker must not prefer the noise action anywhere quiet
    res.worst_margin = std::min(res.worst_margin, -worst_tv_pref);
    res.pass = res.worst_margin >= 0.0;
    res.detail = fmt("noise MI %.2e, worst TV-action preference %.2e", mi_noise,
                     worst_tv_pref);
    return res;
}

using CheckFn = CheckResult (*)(const VerifyOptions&);

const std::vector<std::pair<std::string, CheckFn>>& registry() {
    static const std::vector<std::pair<std::string, CheckFn>> checks = {
        {"contraction", check_contraction},
        {"fixed-point", check_fixed_point},
        {"softmax-optimality", check_softmax_optimality},
        {"softmax-identity", check_softmax_identity},
        {"theorem2", check_theorem2},
        {"monotone-chain", check_monotone_chain},
        {"theorem1", check_theorem1},
        {"equivalences", check_equivalences},
        {"lemma-corollary", check_lemma_corollary},
        {"elbo", check_elbo},
        {"gradcheck", check_gradcheck},
        {"trajectory-bound", check_trajectory_bound},
        {"agent-bridge", check_agent_bridge},
        {"noisy-tv", check_noisy_tv},
    };
    return checks;
}

}  // namespace

std::vector<std::string> check_names() {
    std::vector<std::string> names;
    for (const auto& [name, fn] : registry()) names.push_back(name);
    return names;
}

std::vector<CheckResult> run_checks(const VerifyOptions& options) {
    std::vector<CheckResult> results;
    for (const auto& [name, fn] : registry()) {
        if (!options.only.empty() &&
            std::find(options.only.begin(), options.only.end(), name) ==
                options.only.end())
            continue;
        results.push_back(fn(options));
    }
    if (results.empty()) throw std::invalid_argument("verify: no matching checks");
    return results;
}

std::string report_to_json(const std::vector<CheckResult>& results) {
    nlohmann::json j = nlohmann::json::array();
    for (const CheckResult& r : results) {
        nlohmann::json item;
        item["name"] = r.name;
        item["pass"] = r.pass;
        item["worst_margin"] = r.worst_margin;
        item["detail"] = r.detail;
        j.push_back(item);
    }
    return j.dump(2);
}

bool all_passed(const std::vector<CheckResult>& results) {
    for (const CheckResult& r : results)
        if (!r.pass) return false;
    return true;
}

}  // namespace gio::verify
