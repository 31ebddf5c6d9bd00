#include "gio/inference.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gio {

PosteriorTable bayes_posterior(const FutureModel& model, const PolicyTable& pi,
                               MarginalTable* marginal_out) {
    const int S = static_cast<int>(model.likelihood.size());
    const int A = pi.n_actions();
    const int F = model.space.size();

    if (!pi.strictly_positive())
        throw std::invalid_argument("bayes_posterior: policy must be strictly positive");

    PosteriorTable post;
    post.post = make_table3(S, F, A);
    post.defined.assign(S, std::vector<char>(F, 0));
    MarginalTable marg;
    marg.marg = make_table2(S, F);

    for (int s = 0; s < S; ++s) {
        for (int f = 0; f < F; ++f) {
            double total = 0.0;
            for (int a = 0; a < A; ++a)
                total += model.likelihood[s][a][f] * pi.probs[s][a];
            marg.marg[s][f] = total;
            if (total <= 0.0) continue;  // undefined row, never read downstream
            post.defined[s][f] = 1;
            for (int a = 0; a < A; ++a)
                post.post[s][f][a] = model.likelihood[s][a][f] * pi.probs[s][a] / total;
        }
    }
    if (marginal_out) *marginal_out = std::move(marg);
    return post;
}

InferenceBundle exact_posterior(const TabularMdp& mdp, const PolicyTable& pi,
                                const FutureSpace& space) {
    InferenceBundle inf;
    inf.future = build_future_model(mdp, space, &pi);
    inf.posterior = bayes_posterior(inf.future, pi, &inf.marginal);
    return inf;
}

std::vector<double> mutual_information(const InferenceBundle& inf, const PolicyTable& pi) {
    const int S = pi.n_states(), A = pi.n_actions(), F = inf.future.space.size();
    std::vector<double> mi(S, 0.0);
    for (int s = 0; s < S; ++s) {
        double acc = 0.0;
        for (int a = 0; a < A; ++a) {
            const double pa = pi.probs[s][a];
            if (pa == 0.0) continue;
            for (int f = 0; f < F; ++f) {
                const double like = inf.future.likelihood[s][a][f];
                if (like == 0.0) continue;
                acc += pa * like * std::log(like / inf.marginal.marg[s][f]);
            }
        }
        mi[s] = acc;
    }
    return mi;
}

std::vector<double> mutual_information(const TabularMdp& mdp, const PolicyTable& pi,
                                       const FutureSpace& space) {
    const InferenceBundle inf = exact_posterior(mdp, pi, space);
    return mutual_information(inf, pi);
}

std::vector<double> mutual_information_by_entropy(const InferenceBundle& inf,
                                                  const PolicyTable& pi) {
    const int S = pi.n_states(), F = inf.future.space.size();
    std::vector<double> mi(S, 0.0);
    for (int s = 0; s < S; ++s) {
        double expected_post_entropy = 0.0;
        for (int f = 0; f < F; ++f) {
            if (!inf.posterior.defined[s][f]) continue;
            expected_post_entropy +=
                inf.marginal.marg[s][f] * entropy(inf.posterior.post[s][f]);
        }
        mi[s] = entropy(pi.probs[s]) - expected_post_entropy;
    }
    return mi;
}

double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double x : p)
        if (x > 0.0) h -= x * std::log(x);
    return h;
}

double kl(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size())
        throw std::invalid_argument("kl: support size mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
        d += p[i] * std::log(p[i] / q[i]);
    }
    return d;
}

double lemma1_gap(const Table2& joint_xy, const std::vector<double>& q_y) {
    const std::size_t nx = joint_xy.size();
    if (nx == 0) throw std::invalid_argument("lemma1_gap: empty joint");
    const std::size_t ny = joint_xy[0].size();
    if (q_y.size() != ny) throw std::invalid_argument("lemma1_gap: shape mismatch");

    std::vector<double> p_y(ny, 0.0);
    for (const auto& row : joint_xy) {
        if (row.size() != ny) throw std::invalid_argument("lemma1_gap: ragged joint");
        for (std::size_t y = 0; y < ny; ++y) p_y[y] += row[y];
    }
    // Gamma_{x,y} p(x,y) log(p(y)/q(y))
    double gap = 0.0;
    for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y) {
            const double p = joint_xy[x][y];
            if (p <= 0.0) continue;
            if (q_y[y] <= 0.0) return std::numeric_limits<double>::infinity();
            gap += p * std::log(p_y[y] / q_y[y]);
        }
    return gap;
}

double corollary1_gap(const Table2& joint_xy, const Table2& q_x_given_y) {
    const std::size_t nx = joint_xy.size();
    if (nx == 0) throw std::invalid_argument("corollary1_gap: empty joint");
    const std::size_t ny = joint_xy[0].size();
    if (q_x_given_y.size() != ny)
        throw std::invalid_argument("corollary1_gap: shape mismatch");

    std::vector<double> p_y(ny, 0.0);
    for (const auto& row : joint_xy)
        for (std::size_t y = 0; y < ny; ++y) p_y[y] += row[y];

    // Gamma_{x,y} p(x,y) log(p(x|y)/q(x|y))
    double gap = 0.0;
    for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y) {
            const double p = joint_xy[x][y];
            if (p <= 0.0) continue;
            if (q_x_given_y[y].size() != nx)
                throw std::invalid_argument("corollary1_gap: ragged conditional");
            const double p_cond = p / p_y[y];
            const double q_cond = q_x_given_y[y][x];
            if (q_cond <= 0.0) return std::numeric_limits<double>::infinity();
            gap += p * std::log(p_cond / q_cond);
        }
    return gap;
}

Table2 expected_log_posterior(const FutureModel& model, const PosteriorTable& post) {
    const int S = static_cast<int>(model.likelihood.size());
    const int F = model.space.size();
    const int A = S > 0 ? static_cast<int>(model.likelihood[0].size()) : 0;
    Table2 bonus = make_table2(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            double acc = 0.0;
            for (int f = 0; f < F; ++f) {
                const double like = model.likelihood[s][a][f];
                if (like == 0.0) continue;
                acc += like * safe_log(post.post[s][f][a]);
            }
            bonus[s][a] = acc;
        }
    return bonus;
}

}  // namespace gio
