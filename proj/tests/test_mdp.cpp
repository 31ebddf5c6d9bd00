#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "gio/envs.hpp"
#include "gio/io.hpp"
#include "gio/mdp.hpp"

using namespace gio;

namespace {

TabularMdp two_state_mdp() {
    TabularMdp mdp = TabularMdp::zeros(2, 2, 2);
    mdp.gamma = 0.9;
    mdp.reward_atoms = {0.0, 1.0};
    mdp.transition[0][0] = {0.5, 0.5};
    mdp.transition[0][1] = {1.0, 0.0};
    mdp.transition[1][0] = {0.0, 1.0};
    mdp.transition[1][1] = {0.25, 0.75};
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) mdp.reward_dist[s][a] = {0.5, 0.5};
    mdp.initial_dist = {1.0, 0.0};
    return mdp;
}

}  // namespace

TEST_CASE("validate accepts a well-formed MDP") {
    CHECK(validate(two_state_mdp()).empty());
}

TEST_CASE("validate reports a broken transition row") {
    TabularMdp mdp = two_state_mdp();
    mdp.transition[0][0] = {0.5, 0.4};  // sums to 0.9
    const auto violations = validate(mdp);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].find("P[0][0]") != std::string::npos);
}

TEST_CASE("generated environments always validate") {
    // the generators promise normalization by construction
    for (int i = 0; i < 1000; ++i) {
        const TabularMdp mdp = envs::random_mdp(2 + i % 7, 2 + i % 4, 1 + i % 3, i);
        CHECK(validate(mdp).empty());
    }
}

TEST_CASE("step is the unique successor on deterministic rows") {
    TabularMdp mdp = two_state_mdp();
    SeededRng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const StepResult sr = step(mdp, 0, 1, rng);
        CHECK(sr.next_state == 0);
    }
}

TEST_CASE("step frequencies match a binomial oracle") {
    const TabularMdp mdp = two_state_mdp();
    SeededRng rng(11);
    const int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i)
        if (step(mdp, 0, 0, rng).next_state == 0) ++hits;
    // 3 sigma around p = 0.5
    const double sigma = std::sqrt(0.25 * n);
    CHECK(std::abs(hits - 0.5 * n) < 3.0 * sigma);
}

TEST_CASE("identical seeds give identical trajectories") {
    const TabularMdp mdp = envs::random_mdp(5, 3, 2, 77);
    SeededRng a(123), b(123);
    int sa = 0, sb = 0;
    for (int t = 0; t < 200; ++t) {
        const StepResult ra = step(mdp, sa, t % 3, a);
        const StepResult rb = step(mdp, sb, t % 3, b);
        CHECK(ra.next_state == rb.next_state);
        CHECK(ra.atom == rb.atom);
        sa = ra.next_state;
        sb = rb.next_state;
    }
}

TEST_CASE("step rejects out-of-range indices") {
    const TabularMdp mdp = two_state_mdp();
    SeededRng rng(1);
    CHECK_THROWS_AS(step(mdp, 2, 0, rng), std::out_of_range);
    CHECK_THROWS_AS(step(mdp, 0, -1, rng), std::out_of_range);
}

TEST_CASE("derived rng streams differ from the parent") {
    SeededRng base(42);
    SeededRng derived = base.derive(1);
    SeededRng derived2 = base.derive(2);
    CHECK(derived() != derived2());
}

TEST_CASE("one-step enumeration is the product of marginals") {
    const TabularMdp mdp = two_state_mdp();
    const FutureSpace space = make_future_space(mdp, FutureKind::OneStep);
    CHECK(space.size() == 4);  // 2 successors x 2 atoms all reachable
    const auto outcomes = enumerate_future(mdp, 0, 0, space);
    double total = 0.0;
    for (const auto& [outcome, prob] : outcomes) {
        const auto [ns, atom] = outcome.steps[0];
        CHECK(prob == doctest::Approx(mdp.transition[0][0][ns] *
                                      mdp.reward_dist[0][0][atom]).epsilon(1e-14));
        total += prob;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("deterministic mdp has a single one-step outcome") {
    TabularMdp mdp = two_state_mdp();
    mdp.reward_dist[0][1] = {1.0, 0.0};
    const FutureSpace space = make_future_space(mdp, FutureKind::OneStep);
    const auto outcomes = enumerate_future(mdp, 0, 1, space);
    int positive = 0;
    for (const auto& [outcome, prob] : outcomes)
        if (prob > 0.0) {
            ++positive;
            CHECK(prob == doctest::Approx(1.0));
        }
    CHECK(positive == 1);
}

TEST_CASE("two-step enumeration matches brute-force path sums") {
    // 2-state chain with a single atom; marginalize the middle action by hand
    const TabularMdp mdp = envs::random_mdp(2, 2, 1, 5);
    const PolicyTable pi = PolicyTable::uniform(2, 2);
    const FutureSpace space = make_future_space(mdp, FutureKind::KStep, 2);
    CHECK(space.size() == 4);  // (2 states x 1 atom)^2, nothing pruned

    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) {
            const auto outcomes = enumerate_future(mdp, s, a, space, &pi);
            double total = 0.0;
            for (const auto& [outcome, prob] : outcomes) {
                const int s1 = outcome.steps[0].first;
                const int s2 = outcome.steps[1].first;
                double oracle = 0.0;
                for (int mid = 0; mid < 2; ++mid)
                    oracle += mdp.transition[s][a][s1] * pi.probs[s1][mid] *
                              mdp.transition[s1][mid][s2];
                CHECK(prob == doctest::Approx(oracle).epsilon(1e-12));
                total += prob;
            }
            CHECK(std::abs(total - 1.0) < 1e-12);
        }
}

TEST_CASE("k-step guard rejects long horizons") {
    const TabularMdp mdp = two_state_mdp();
    CHECK_THROWS_AS(make_future_space(mdp, FutureKind::KStep, 4), std::invalid_argument);
    CHECK_THROWS_AS(make_future_space(mdp, FutureKind::KStep, 1), std::invalid_argument);
}

TEST_CASE("future space index lookup round-trips") {
    const TabularMdp mdp = two_state_mdp();
    const FutureSpace space = make_future_space(mdp, FutureKind::OneStep);
    for (int f = 0; f < space.size(); ++f)
        CHECK(space.index_of(space.support[f]) == f);
    CHECK(space.index_of(FutureOutcome{{{7, 7}}}) == -1);
}

TEST_CASE("mdp json round-trip preserves every byte") {
    const TabularMdp mdp = envs::random_mdp(4, 3, 2, 9);
    const std::string first = io::mdp_to_json(mdp);
    const TabularMdp loaded = io::mdp_from_json(first);
    CHECK(io::mdp_to_json(loaded) == first);
    CHECK(loaded.gamma == mdp.gamma);
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 3; ++a)
            for (int s2 = 0; s2 < 4; ++s2)
                CHECK(loaded.transition[s][a][s2] == mdp.transition[s][a][s2]);
}

TEST_CASE("loader rejects invalid files") {
    TabularMdp mdp = two_state_mdp();
    mdp.initial_dist = {0.7, 0.7};
    CHECK_THROWS_AS(io::mdp_from_json(io::mdp_to_json(mdp)), std::invalid_argument);
}

TEST_CASE("policy uniform rows are strictly positive") {
    const PolicyTable pi = PolicyTable::uniform(3, 4);
    CHECK(pi.rows_normalized());
    CHECK(pi.strictly_positive());
}
