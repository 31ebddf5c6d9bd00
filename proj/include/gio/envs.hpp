#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gio/mdp.hpp"

namespace gio::envs {

/// Named generator spec; every generated MDP passes validate().
struct EnvSpec {
    std::string name;
    std::map<std::string, double> params;
    std::uint64_t seed = 0;
};

/// Benchmark constructors.
///
/// gridworld(n, eps): n x n grid, 4 actions, slip model = intended move with
///   probability 1-eps and each perpendicular with eps/2; walls bounce back.
///   Reward 1 at the absorbing goal corner, 0 elsewhere; start at (0,0).
/// chain(n): n-state chain, 2 deterministic actions, absorbing reward at the
///   far end.
/// random(s, a, atoms): Dirichlet(1) transition and reward rows, uniform
///   initial distribution, atom values in [-1, 1].
/// uninformative(s, a): transition and reward rows identical across actions,
///   so the posterior equals the prior and the information bonus vanishes.
/// invertible(s): deterministic with a distinct successor per action, so the
///   posterior is a point mass and the bonus reduces to policy entropy.
/// noisy_tv(s, a): one extra action tunes into a high-entropy noise region
///   whose transitions are action-independent; informative region otherwise.
TabularMdp gridworld(int n, double eps, double gamma = 0.95);
TabularMdp chain(int n, double gamma = 0.9);
TabularMdp random_mdp(int n_states, int n_actions, int n_atoms, std::uint64_t seed,
                      double gamma = 0.9);
TabularMdp uninformative(int n_states, int n_actions, std::uint64_t seed,
                         double gamma = 0.9);
TabularMdp invertible(int n_states, double gamma = 0.9, std::uint64_t seed = 0);
TabularMdp noisy_tv(int n_states, int n_actions, std::uint64_t seed, double gamma = 0.9);

/// Number of noise states a noisy_tv(s, a) instance reserves at the top of
/// the state range.
int noisy_tv_noise_states(int n_states);

/// Dispatch by name; unknown names or bad params throw.
TabularMdp make(const EnvSpec& spec);

/// Specs of the shipped solver benchmarks (used by `bench` and the
/// verification suite).
struct Benchmark {
    std::string label;
    EnvSpec spec;
    FutureSpec future;
    double eta = 1.0;
};
std::vector<Benchmark> benchmark_suite();

}  // namespace gio::envs
