#pragma once

#include <span>
#include <vector>

#include "gio/mdp.hpp"

namespace gio {

/// Action posterior p(a | s, F) keyed to a FutureSpace. Rows whose outcome
/// marginal is zero are undefined: their mask entry is false and their
/// probabilities are zeroed, and no downstream expectation reads them
/// (their weight is zero wherever they would appear).
struct PosteriorTable {
    Table3 post;                             // post[s][outcome][a]
    std::vector<std::vector<char>> defined;  // defined[s][outcome]
    bool approximate = false;  // true when backed by a learned model
};

/// Outcome marginal p(F | s) = sum_a p(F | s, a) pi(a | s).
struct MarginalTable {
    Table2 marg;  // marg[s][outcome]
};

/// Likelihood, posterior and marginal for one (mdp, policy, space) triple.
struct InferenceBundle {
    FutureModel future;
    PosteriorTable posterior;
    MarginalTable marginal;
};

/// Bayes inversion of the joint p(F | s, a) pi(a | s) against a prebuilt
/// likelihood model.
PosteriorTable bayes_posterior(const FutureModel& model, const PolicyTable& pi,
                               MarginalTable* marginal_out = nullptr);

/// Exact posterior and marginal for a strictly positive policy.
InferenceBundle exact_posterior(const TabularMdp& mdp, const PolicyTable& pi,
                                const FutureSpace& space);

/// State-conditional mutual information between action and future outcome,
/// in nats.
std::vector<double> mutual_information(const TabularMdp& mdp, const PolicyTable& pi,
                                       const FutureSpace& space);
std::vector<double> mutual_information(const InferenceBundle& inf, const PolicyTable& pi);

/// Entropy-decomposition form: H(pi(.|s)) - E_F[H(post(.|s,F))].
std::vector<double> mutual_information_by_entropy(const InferenceBundle& inf,
                                                  const PolicyTable& pi);

double entropy(std::span<const double> p);

/// KL(p || q) in nats. Support mismatch throws; p > 0 where q == 0 returns
/// +infinity.
double kl(std::span<const double> p, std::span<const double> q);

/// D_KL(p(x,y) || q(y) p(x)) - D_KL(p(x,y) || p(y) p(x)); equals
/// KL(p(y) || q(y)) and is therefore nonnegative.
double lemma1_gap(const Table2& joint_xy, const std::vector<double>& q_y);

/// E_p(x,y)[log p(x|y)/p(x)] - E_p(x,y)[log q(x|y)/p(x)]; equals
/// E_p(y)[KL(p(x|y) || q(x|y))] and is therefore nonnegative.
/// q_x_given_y is indexed [y][x].
double corollary1_gap(const Table2& joint_xy, const Table2& q_x_given_y);

/// Expected log-posterior bonus b[s][a] = E_F[log post(a | s, F)] under the
/// model's likelihood; the eta-weighted log-ratio that augments the reward.
Table2 expected_log_posterior(const FutureModel& model, const PosteriorTable& post);

}  // namespace gio
