#pragma once

#include <vector>

#include "gio/inference.hpp"
#include "gio/mdp.hpp"

namespace gio {

struct SolverConfig {
    double eta = 1.0;            // temperature, nats; must be > 0
    double eval_tol = 1e-10;     // sup-norm residual for policy evaluation
    int eval_max_iters = 100000;
    int outer_max_sweeps = 1000;
    double outer_tol = 1e-10;    // sup-norm Q change between sweeps
    FutureSpec future;

    void check() const;
};

/// Intrinsic Bellman backup: reward plus discounted expectation of the
/// log-ratio-augmented value at successor states. All expectations are
/// exact enumerations over the bundle's likelihood.
QTable apply_bellman(const TabularMdp& mdp, const QTable& q, const PolicyTable& pi,
                     const InferenceBundle& inf, const SolverConfig& cfg);

struct EvalResult {
    QTable q;
    VTable v;
    std::vector<double> residuals;  // sup-norm change per application
    bool converged = false;
};

/// Fixed point of the intrinsic operator for a strictly positive policy;
/// the posterior is computed for that policy. Throws on non-convergence
/// (impossible for gamma < 1 unless something is broken).
EvalResult evaluate_policy(const TabularMdp& mdp, const PolicyTable& pi,
                           const SolverConfig& cfg, const QTable* warm_start = nullptr);

/// Same fixed-point iteration against a caller-supplied (frozen) bundle.
EvalResult evaluate_policy_frozen(const TabularMdp& mdp, const PolicyTable& pi,
                                  const InferenceBundle& inf, const SolverConfig& cfg,
                                  const QTable* warm_start = nullptr);

struct ImprovedPolicy {
    PolicyTable policy;
    std::vector<double> log_z;  // per-state partition, max-subtracted LSE
};

/// One-step optimal policy: softmax of (Q + eta * E_F[log post]) / eta,
/// normalized per state by log-sum-exp.
ImprovedPolicy softmax_improve(const QTable& q, const InferenceBundle& inf,
                               const PolicyTable& pi_prev, const TabularMdp& mdp,
                               const SolverConfig& cfg);

/// Worst deviation of the softmax identity
/// Q(s,a) + eta*E_F[log post(a|s,F)] = eta*(log pi~(a|s) + logZ(s))
/// over entries with pi~(a|s) > 1e-12.
double softmax_identity_gap(const QTable& q, const InferenceBundle& inf,
                            const ImprovedPolicy& improved, const SolverConfig& cfg);

/// Policy family to project onto.
struct PolicyClass {
    enum class Kind { FullTabular, Uniform, FlooredTabular };
    Kind kind = Kind::FullTabular;
    double floor = 0.0;  // for FlooredTabular
};

struct ProjectionResult {
    PolicyTable policy;
    std::vector<double> kl_per_state;  // KL(projected || target)
    double mean_kl = 0.0;
};

/// Per-state argmin of KL(pi' || target) over the class. The full tabular
/// class returns the target itself.
ProjectionResult project_policy(const PolicyClass& cls, const PolicyTable& target);

struct SweepRecord {
    int sweep = 0;
    double bellman_residual = 0.0;  // sup-norm Q change vs previous sweep
    double min_q_delta = 0.0;       // elementwise min of Q_{k+1} - Q_k
    double mi_mean = 0.0;
    double objective = 0.0;         // E_rho0[V]
    double fixed_point_kl = 0.0;    // max_s KL(pi_{k+1} || softmax image of itself)
    double eq_identity_gap = 0.0;   // softmax identity residual for this sweep
    double assumption3_term = 0.0;         // filled by the final re-pass
    double assumption3_partial_sum = 0.0;  // filled by the final re-pass
    std::vector<double> log_z;
};

struct IterationTrace {
    std::vector<SweepRecord> sweeps;
    // Snapshots used by the convergence-series re-pass.
    std::vector<PolicyTable> policies;  // pi_{k+1} per sweep
    std::vector<QTable> q_tables;       // Q^{pi_k} per sweep
};

struct SolveResult {
    PolicyTable policy;
    QTable q;
    VTable v;
    IterationTrace trace;
    bool converged = false;
};

/// Alternates exact posterior, policy evaluation and softmax improvement
/// from pi0 until the Q tables stop moving or the sweep budget runs out.
/// After termination the optimal-policy stand-in series (the summed
/// expectation-difference terms the convergence argument assumes) is
/// recomputed against the final policy and written into the trace.
SolveResult policy_iteration(const TabularMdp& mdp, const PolicyTable& pi0,
                             const SolverConfig& cfg);

struct MonotonicityReport {
    QTable q_before;   // Q^pi
    QTable q_frozen;   // improved policy evaluated under pi's posterior
    QTable q_after;    // Q^{pi~} with its own posterior
    double min_gap_frozen_vs_before = 0.0;
    double min_gap_after_vs_frozen = 0.0;
    double min_gap_after_vs_before = 0.0;
};

/// One improvement step followed by full re-evaluation; reports the chain
/// Q^pi <= Q^{pi~, frozen posterior} <= Q^{pi~} elementwise.
MonotonicityReport verify_monotonicity(const TabularMdp& mdp, const PolicyTable& pi,
                                       const SolverConfig& cfg);

/// E_rho0[V^pi], the discounted reward-plus-information objective.
double objective_value(const TabularMdp& mdp, const PolicyTable& pi,
                       const SolverConfig& cfg);
double objective_from_v(const TabularMdp& mdp, const VTable& v);

}  // namespace gio
