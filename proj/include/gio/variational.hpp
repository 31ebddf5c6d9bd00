#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gio/inference.hpp"
#include "gio/mdp.hpp"

namespace gio {

enum class Parameterization { TabularSoftmax };
// TabularSoftmax keeps every gradient closed-form; a feature-based
// linear-softmax head is the intended extension point.

/// One observed transition; the action may be absent (-1) since the bound
/// treats it as latent.
struct TransitionSample {
    int s = 0;
    int a = -1;
    int next_s = 0;
    int atom = 0;
};

/// Inference model q(a | s, s', r) and generative model p(s', r | s, a),
/// both tabular softmax logits. The generative model is structurally
/// factorized into separate next-state and reward heads.
struct VariationalModel {
    Parameterization parameterization = Parameterization::TabularSoftmax;
    int n_states = 0;
    int n_actions = 0;
    int n_atoms = 0;
    Table3 phi;         // phi[s][outcome][a], outcome = next_s * n_atoms + atom
    Table3 psi_state;   // psi_state[s][a][next_s]
    Table3 psi_reward;  // psi_reward[s][a][atom]

    int outcome_index(int next_s, int atom) const { return next_s * n_atoms + atom; }
    int n_outcomes() const { return n_states * n_atoms; }

    std::vector<double> posterior_row(int s, int outcome) const;
    std::vector<double> state_row(int s, int a) const;
    std::vector<double> reward_row(int s, int a) const;
    double log_state_prob(int s, int a, int next_s) const;
    double log_reward_prob(int s, int a, int atom) const;
    /// log p(s', r | s, a) = log p(s'|s,a) + log p(r|s,a) by construction.
    double log_joint_prob(int s, int a, int next_s, int atom) const;

    /// All logits zero: every conditional uniform, strictly positive.
    static VariationalModel uniform_init(int n_states, int n_actions, int n_atoms);
};

struct GradientBlock {
    Table3 phi, psi_state, psi_reward;
    static GradientBlock zeros_like(const VariationalModel& model);
    void accumulate(const GradientBlock& other, double scale = 1.0);
    void scale(double factor);
    double max_abs() const;
};

struct ElboResult {
    double value = 0.0;
    GradientBlock grad;
    bool floored_prior = false;  // policy had zero mass where q does not
};

/// One-step evidence lower bound on log p^pi(s', r | s):
/// -KL(q(a|s,s',r) || pi(a|s)) + E_q[log p(s', r | s, a)], with the action
/// expectation taken as an exact sum.
ElboResult one_step_elbo(const VariationalModel& model, const PolicyTable& pi,
                         const TransitionSample& sample);
double one_step_elbo_value(const VariationalModel& model, const PolicyTable& pi,
                           const TransitionSample& sample);

struct TrajectoryStep {
    int s = 0;
    int a = -1;
    int next_s = 0;
    int atom = 0;
};
using Trajectory = std::vector<TrajectoryStep>;

/// Fixed-horizon rollout sequences; each must be contiguous
/// (next_s of step t equals s of step t+1).
struct TrajectoryBatch {
    std::vector<Trajectory> sequences;
};

/// History-window inference heads for window > 1: logits per conditioning
/// tuple, created lazily and zero-initialized (uniform).
struct HistoryPosterior {
    int n_actions = 0;
    std::map<std::vector<int>, std::vector<double>> logits;

    std::vector<double>& row(const std::vector<int>& key);
    std::vector<double> row_or_uniform(const std::vector<int>& key) const;
};

struct TrajectoryElboResult {
    double value = 0.0;
    GradientBlock grad;  // phi gradients populated only for window == 1
    std::map<std::vector<int>, std::vector<double>> window_grad;
};

/// Trajectory-wise lower bound on log p^pi(x_{1:T}). With window == 1 the
/// inference heads are the model's own and the bound equals the sum of
/// one-step bounds exactly; larger windows condition each action on the
/// last `window` observed transitions (no recurrent state).
TrajectoryElboResult trajectory_elbo(const VariationalModel& model, const PolicyTable& pi,
                                     const TrajectoryBatch& batch, int window = 1,
                                     HistoryPosterior* history = nullptr);

struct TrainConfig {
    double learning_rate = 0.5;
    double momentum = 0.0;
    int batch_size = 0;  // 0 = full batch
    int max_epochs = 200;
    int grad_check_interval = 0;  // every N epochs; 0 disables
    double holdout_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct TrainTrace {
    std::vector<double> train_elbo;
    std::vector<double> holdout_elbo;
    double worst_grad_check = 0.0;
};

/// Gradient ascent on the mean one-step bound. Throws with diagnostics if
/// the held-out bound ever drops more than 10 nats below its best.
TrainTrace train(VariationalModel& model, const PolicyTable& pi,
                 const std::vector<TransitionSample>& data, const TrainConfig& cfg);

/// Views of the learned model in the exact-inference shapes, so the solver
/// and agent can consume q wherever an exact posterior is expected. The
/// space must be a one-step space; rows are marked approximate.
PosteriorTable posterior_of(const VariationalModel& model, const FutureSpace& space);
FutureModel model_future(const VariationalModel& model, const FutureSpace& space);
InferenceBundle model_inference(const VariationalModel& model, const FutureSpace& space);

/// Loads an exact posterior / true dynamics into the logits (log-prob rows),
/// for bound-tightness oracles and the exact agent bridge.
void set_posterior_logits(VariationalModel& model, const FutureSpace& space,
                          const PosteriorTable& post);
void set_true_model_logits(VariationalModel& model, const TabularMdp& mdp);

std::string model_to_json(const VariationalModel& model);
VariationalModel model_from_json(const std::string& text);

}  // namespace gio
