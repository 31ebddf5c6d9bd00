#include "gio/variational.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "gio/rng.hpp"

namespace gio {

namespace {

std::vector<double> softmax(const std::vector<double>& logits) {
    double hi = logits[0];
    for (double x : logits) hi = std::max(hi, x);
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - hi);
        z += p[i];
    }
    for (double& x : p) x /= z;
    return p;
}

double log_softmax_at(const std::vector<double>& logits, int idx) {
    double hi = logits[0];
    for (double x : logits) hi = std::max(hi, x);
    double z = 0.0;
    for (double x : logits) z += std::exp(x - hi);
    return logits[idx] - hi - std::log(z);
}

}  // namespace

std::vector<double> VariationalModel::posterior_row(int s, int outcome) const {
    return softmax(phi[s][outcome]);
}

std::vector<double> VariationalModel::state_row(int s, int a) const {
    return softmax(psi_state[s][a]);
}

std::vector<double> VariationalModel::reward_row(int s, int a) const {
    return softmax(psi_reward[s][a]);
}

double VariationalModel::log_state_prob(int s, int a, int next_s) const {
    return log_softmax_at(psi_state[s][a], next_s);
}

double VariationalModel::log_reward_prob(int s, int a, int atom) const {
    return log_softmax_at(psi_reward[s][a], atom);
}

double VariationalModel::log_joint_prob(int s, int a, int next_s, int atom) const {
    return log_state_prob(s, a, next_s) + log_reward_prob(s, a, atom);
}

VariationalModel VariationalModel::uniform_init(int n_states, int n_actions,
                                                int n_atoms) {
    VariationalModel m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.n_atoms = n_atoms;
    m.phi = make_table3(n_states, n_states * n_atoms, n_actions);
    m.psi_state = make_table3(n_states, n_actions, n_states);
    m.psi_reward = make_table3(n_states, n_actions, n_atoms);
    return m;
}

GradientBlock GradientBlock::zeros_like(const VariationalModel& model) {
    GradientBlock g;
    g.phi = make_table3(model.n_states, model.n_outcomes(), model.n_actions);
    g.psi_state = make_table3(model.n_states, model.n_actions, model.n_states);
    g.psi_reward = make_table3(model.n_states, model.n_actions, model.n_atoms);
    return g;
}

namespace {

void table3_axpy(Table3& dst, const Table3& src, double scale) {
    for (std::size_t i = 0; i < dst.size(); ++i)
        for (std::size_t j = 0; j < dst[i].size(); ++j)
            for (std::size_t k = 0; k < dst[i][j].size(); ++k)
                dst[i][j][k] += scale * src[i][j][k];
}

void table3_scale(Table3& t, double factor) {
    for (auto& plane : t)
        for (auto& row : plane)
            for (double& x : row) x *= factor;
}

double table3_max_abs(const Table3& t) {
    double hi = 0.0;
    for (const auto& plane : t)
        for (const auto& row : plane)
            for (double x : row) hi = std::max(hi, std::abs(x));
    return hi;
}

}  // namespace

void GradientBlock::accumulate(const GradientBlock& other, double scale) {
    table3_axpy(phi, other.phi, scale);
    table3_axpy(psi_state, other.psi_state, scale);
    table3_axpy(psi_reward, other.psi_reward, scale);
}

void GradientBlock::scale(double factor) {
    table3_scale(phi, factor);
    table3_scale(psi_state, factor);
    table3_scale(psi_reward, factor);
}

double GradientBlock::max_abs() const {
    return std::max({table3_max_abs(phi), table3_max_abs(psi_state),
                     table3_max_abs(psi_reward)});
}

namespace {

struct ElboTerms {
    std::vector<double> q;       // posterior over actions
    std::vector<double> c;       // log pi(a|s) + log p_psi(s', r | s, a)
    std::vector<double> log_ps;  // per-action log p_psi(s'|s,a)
    std::vector<double> log_pr;  // per-action log p_psi(r|s,a)
    double value = 0.0;
    bool floored = false;
};

ElboTerms elbo_terms(const VariationalModel& model, const PolicyTable& pi,
                     const TransitionSample& sample) {
    const int A = model.n_actions;
    const int f = model.outcome_index(sample.next_s, sample.atom);
    ElboTerms t;
    t.q = model.posterior_row(sample.s, f);
    t.c.resize(A);
    t.log_ps.resize(A);
    t.log_pr.resize(A);
    for (int a = 0; a < A; ++a) {
        const double prior = pi.probs[sample.s][a];
        if (prior <= 0.0 && t.q[a] > 0.0) t.floored = true;
        t.log_ps[a] = model.log_state_prob(sample.s, a, sample.next_s);
        t.log_pr[a] = model.log_reward_prob(sample.s, a, sample.atom);
        t.c[a] = safe_log(prior) + t.log_ps[a] + t.log_pr[a];
    }
    for (int a = 0; a < A; ++a)
        if (t.q[a] > 0.0) t.value += t.q[a] * (t.c[a] - std::log(t.q[a]));
    return t;
}

void check_sample(const VariationalModel& model, const TransitionSample& sample) {
    if (sample.s < 0 || sample.s >= model.n_states || sample.next_s < 0 ||
        sample.next_s >= model.n_states || sample.atom < 0 ||
        sample.atom >= model.n_atoms)
        throw std::out_of_range("elbo: sample outside model dimensions");
}

}  // namespace

double one_step_elbo_value(const VariationalModel& model, const PolicyTable& pi,
                           const TransitionSample& sample) {
    check_sample(model, sample);
    return elbo_terms(model, pi, sample).value;
}

ElboResult one_step_elbo(const VariationalModel& model, const PolicyTable& pi,
                         const TransitionSample& sample) {
    check_sample(model, sample);
    const int A = model.n_actions;
    const ElboTerms t = elbo_terms(model, pi, sample);

    ElboResult out;
    out.value = t.value;
    out.floored_prior = t.floored;
    out.grad = GradientBlock::zeros_like(model);

    const int f = model.outcome_index(sample.next_s, sample.atom);
    for (int a = 0; a < A; ++a) {
        // d/dphi_b: q_b * ((c_b - log q_b) - L)
        const double centered = (t.c[a] - (t.q[a] > 0.0 ? std::log(t.q[a]) : 0.0));
        out.grad.phi[sample.s][f][a] = t.q[a] * (centered - t.value);
    }
    for (int a = 0; a < A; ++a) {
        if (t.q[a] == 0.0) continue;
        const auto p_state = model.state_row(sample.s, a);
        const auto p_reward = model.reward_row(sample.s, a);
        for (int s2 = 0; s2 < model.n_states; ++s2)
            out.grad.psi_state[sample.s][a][s2] =
                t.q[a] * ((s2 == sample.next_s ? 1.0 : 0.0) - p_state[s2]);
        for (int k = 0; k < model.n_atoms; ++k)
            out.grad.psi_reward[sample.s][a][k] =
                t.q[a] * ((k == sample.atom ? 1.0 : 0.0) - p_reward[k]);
    }
    return out;
}

std::vector<double>& HistoryPosterior::row(const std::vector<int>& key) {
    auto it = logits.find(key);
    if (it == logits.end())
        it = logits.emplace(key, std::vector<double>(n_actions, 0.0)).first;
    return it->second;
}

std::vector<double> HistoryPosterior::row_or_uniform(const std::vector<int>& key) const {
    const auto it = logits.find(key);
    if (it != logits.end()) return it->second;
    return std::vector<double>(n_actions, 0.0);
}

namespace {

std::vector<int> window_key(const Trajectory& traj, int t, int window) {
    std::vector<int> key;
    const int first = std::max(0, t - window + 1);
    for (int j = first; j <= t; ++j) {
        key.push_back(traj[j].s);
        key.push_back(traj[j].atom);
    }
    key.push_back(traj[t].next_s);
    return key;
}

}  // namespace

TrajectoryElboResult trajectory_elbo(const VariationalModel& model, const PolicyTable& pi,
                                     const TrajectoryBatch& batch, int window,
                                     HistoryPosterior* history) {
    if (window < 1) throw std::invalid_argument("trajectory_elbo: window must be >= 1");
    if (batch.sequences.empty())
        throw std::invalid_argument("trajectory_elbo: empty batch");
    if (window > 1 && history == nullptr)
        throw std::invalid_argument("trajectory_elbo: window > 1 needs history heads");

    TrajectoryElboResult out;
    out.grad = GradientBlock::zeros_like(model);

    for (const auto& traj : batch.sequences) {
        if (traj.empty()) throw std::invalid_argument("trajectory_elbo: empty sequence");
        for (std::size_t t = 0; t + 1 < traj.size(); ++t)
            if (traj[t].next_s != traj[t + 1].s)
                throw std::invalid_argument("trajectory_elbo: sequence not contiguous");

        for (std::size_t t = 0; t < traj.size(); ++t) {
            const TrajectoryStep& st = traj[t];
            if (window == 1) {
                const ElboResult step = one_step_elbo(
                    model, pi, TransitionSample{st.s, st.a, st.next_s, st.atom});
                out.value += step.value;
                out.grad.accumulate(step.grad);
                continue;
            }
            // history-conditioned head: same bound shape, q indexed by the
            // truncated observation window
            const auto key = window_key(traj, static_cast<int>(t), window);
            const auto q = softmax(history->row_or_uniform(key));
            const int A = model.n_actions;
            std::vector<double> c(A);
            double term = 0.0;
            for (int a = 0; a < A; ++a) {
                c[a] = safe_log(pi.probs[st.s][a]) +
                       model.log_joint_prob(st.s, a, st.next_s, st.atom);
                if (q[a] > 0.0) term += q[a] * (c[a] - std::log(q[a]));
            }
            out.value += term;
            auto& wg = out.window_grad[key];
            wg.assign(A, 0.0);
            for (int a = 0; a < A; ++a)
                wg[a] = q[a] * ((c[a] - (q[a] > 0.0 ? std::log(q[a]) : 0.0)) - term);
            for (int a = 0; a < A; ++a) {
                if (q[a] == 0.0) continue;
                const auto p_state = model.state_row(st.s, a);
                const auto p_reward = model.reward_row(st.s, a);
                for (int s2 = 0; s2 < model.n_states; ++s2)
                    out.grad.psi_state[st.s][a][s2] +=
                        q[a] * ((s2 == st.next_s ? 1.0 : 0.0) - p_state[s2]);
                for (int k = 0; k < model.n_atoms; ++k)
                    out.grad.psi_reward[st.s][a][k] +=
                        q[a] * ((k == st.atom ? 1.0 : 0.0) - p_reward[k]);
            }
        }
    }
    return out;
}

namespace {

double mean_elbo(const VariationalModel& model, const PolicyTable& pi,
                 const std::vector<TransitionSample>& data, std::size_t begin,
                 std::size_t end) {
    if (begin >= end) return 0.0;
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i)
        sum += one_step_elbo_value(model, pi, data[i]);
    return sum / static_cast<double>(end - begin);
}

}  // namespace

TrainTrace train(VariationalModel& model, const PolicyTable& pi,
                 const std::vector<TransitionSample>& data, const TrainConfig& cfg) {
    if (data.empty()) throw std::invalid_argument("train: no data");
    if (!(cfg.learning_rate >= 0.0))
        throw std::invalid_argument("train: bad learning rate");

    SeededRng rng(cfg.seed);
    std::vector<TransitionSample> shuffled = data;
    for (std::size_t i = shuffled.size(); i > 1; --i)
        std::swap(shuffled[i - 1], shuffled[rng.below(i)]);

    const std::size_t holdout =
        std::min(shuffled.size() - 1,
                 static_cast<std::size_t>(cfg.holdout_fraction * shuffled.size()));
    const std::size_t n_train = shuffled.size() - holdout;

    TrainTrace trace;
    GradientBlock velocity = GradientBlock::zeros_like(model);
    double best_holdout = -std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const std::size_t batch =
            cfg.batch_size <= 0 ? n_train
                                : std::min<std::size_t>(cfg.batch_size, n_train);
        std::size_t done = 0;
        while (done < n_train) {
            const std::size_t take = std::min(batch, n_train - done);
            GradientBlock grad = GradientBlock::zeros_like(model);
            for (std::size_t i = done; i < done + take; ++i)
                grad.accumulate(one_step_elbo(model, pi, shuffled[i]).grad);
            grad.scale(1.0 / static_cast<double>(take));
            velocity.scale(cfg.momentum);
            velocity.accumulate(grad);
            table3_axpy(model.phi, velocity.phi, cfg.learning_rate);
            table3_axpy(model.psi_state, velocity.psi_state, cfg.learning_rate);
            table3_axpy(model.psi_reward, velocity.psi_reward, cfg.learning_rate);
            done += take;
        }

        trace.train_elbo.push_back(mean_elbo(model, pi, shuffled, 0, n_train));
        const double held =
            holdout > 0 ? mean_elbo(model, pi, shuffled, n_train, shuffled.size())
                        : trace.train_elbo.back();
        trace.holdout_elbo.push_back(held);
        best_holdout = std::max(best_holdout, held);
        if (held < best_holdout - 10.0)
            throw std::runtime_error(
                "train: diverged (held-out bound dropped " +
                std::to_string(best_holdout - held) + " nats at epoch " +
                std::to_string(epoch) + ")");
    }
    return trace;
}

PosteriorTable posterior_of(const VariationalModel& model, const FutureSpace& space) {
    if (model.parameterization != Parameterization::TabularSoftmax)
        throw std::invalid_argument("posterior_of: unsupported parameterization");
    if (space.kind != FutureKind::OneStep)
        throw std::invalid_argument("posterior_of: needs a one-step future space");
    PosteriorTable post;
    post.approximate = true;
    post.post = make_table3(model.n_states, space.size(), model.n_actions);
    post.defined.assign(model.n_states, std::vector<char>(space.size(), 1));
    for (int s = 0; s < model.n_states; ++s)
        for (int f = 0; f < space.size(); ++f) {
            const auto [ns, atom] = space.support[f].steps[0];
            post.post[s][f] = model.posterior_row(s, model.outcome_index(ns, atom));
        }
    return post;
}

FutureModel model_future(const VariationalModel& model, const FutureSpace& space) {
    if (space.kind != FutureKind::OneStep)
        throw std::invalid_argument("model_future: needs a one-step future space");
    FutureModel fut;
    fut.space = space;
    fut.likelihood = make_table3(model.n_states, model.n_actions, space.size());
    for (int s = 0; s < model.n_states; ++s)
        for (int a = 0; a < model.n_actions; ++a) {
            const auto p_state = model.state_row(s, a);
            const auto p_reward = model.reward_row(s, a);
            for (int f = 0; f < space.size(); ++f) {
                const auto [ns, atom] = space.support[f].steps[0];
                fut.likelihood[s][a][f] = p_state[ns] * p_reward[atom];
            }
        }
    return fut;
}

InferenceBundle model_inference(const VariationalModel& model, const FutureSpace& space) {
    InferenceBundle inf;
    inf.future = model_future(model, space);
    inf.posterior = posterior_of(model, space);
    inf.marginal.marg = make_table2(model.n_states, space.size());
    return inf;
}

void set_posterior_logits(VariationalModel& model, const FutureSpace& space,
                          const PosteriorTable& post) {
    if (space.kind != FutureKind::OneStep)
        throw std::invalid_argument("set_posterior_logits: one-step space required");
    for (int s = 0; s < model.n_states; ++s)
        for (int f = 0; f < space.size(); ++f) {
            if (!post.defined[s][f]) continue;
            const auto [ns, atom] = space.support[f].steps[0];
            auto& row = model.phi[s][model.outcome_index(ns, atom)];
            for (int a = 0; a < model.n_actions; ++a)
                row[a] = safe_log(post.post[s][f][a]);
        }
}

void set_true_model_logits(VariationalModel& model, const TabularMdp& mdp) {
    if (model.n_states != mdp.n_states || model.n_actions != mdp.n_actions ||
        model.n_atoms != mdp.n_atoms())
        throw std::invalid_argument("set_true_model_logits: dimension mismatch");
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) {
            for (int s2 = 0; s2 < mdp.n_states; ++s2)
                model.psi_state[s][a][s2] = safe_log(mdp.transition[s][a][s2]);
            for (int k = 0; k < mdp.n_atoms(); ++k)
                model.psi_reward[s][a][k] = safe_log(mdp.reward_dist[s][a][k]);
        }
}

std::string model_to_json(const VariationalModel& model) {
    nlohmann::json j;
    j["parameterization"] = "tabular-softmax";
    j["n_states"] = model.n_states;
    j["n_actions"] = model.n_actions;
    j["n_atoms"] = model.n_atoms;
    j["phi"] = model.phi;
    j["psi_state"] = model.psi_state;
    j["psi_reward"] = model.psi_reward;
    return j.dump(2);
}

VariationalModel model_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("parameterization").get<std::string>() != "tabular-softmax")
        throw std::invalid_argument("model_from_json: unsupported parameterization");
    VariationalModel m;
    m.n_states = j.at("n_states").get<int>();
    m.n_actions = j.at("n_actions").get<int>();
    m.n_atoms = j.at("n_atoms").get<int>();
    m.phi = j.at("phi").get<Table3>();
    m.psi_state = j.at("psi_state").get<Table3>();
    m.psi_reward = j.at("psi_reward").get<Table3>();
    return m;
}

}  // namespace gio
