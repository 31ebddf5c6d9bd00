#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gio/agent.hpp"
#include "gio/baselines.hpp"
#include "gio/envs.hpp"
#include "gio/experiment.hpp"
#include "gio/io.hpp"
#include "gio/solver.hpp"
#include "gio/variational.hpp"
#include "gio/verify.hpp"

namespace {

namespace fs = std::filesystem;

gio::FutureSpec parse_future(const std::string& text) {
    gio::FutureSpec spec;
    if (text.rfind("k-step", 0) == 0) {
        spec.kind = gio::FutureKind::KStep;
        const auto colon = text.find(':');
        spec.k = colon == std::string::npos ? 2 : std::stoi(text.substr(colon + 1));
    } else {
        spec.kind = gio::future_kind_from_string(text);
    }
    return spec;
}

int cmd_solve(const std::string& mdp_path, const std::string& config_path, double eta,
              const std::string& future, double tol, int max_sweeps,
              std::uint64_t seed, const std::string& out_dir, bool svg) {
    if (!config_path.empty()) {
        gio::ExperimentConfig config =
            gio::config_from_json(gio::io::read_text_file(config_path));
        if (!mdp_path.empty()) {
            config.env_file = mdp_path;
            config.env.name.clear();
        }
        if (!out_dir.empty()) config.out_dir = out_dir;
        config.emit_svg = config.emit_svg || svg;
        const gio::RunRecord record = gio::run_experiment(config);
        std::printf("experiment %s: %zu seed(s), %s\n", record.config_hash.c_str(),
                    record.runs.size(),
                    record.all_converged ? "all converged" : "NON-CONVERGED RUNS");
        return record.all_converged ? 0 : 1;
    }

    const gio::TabularMdp mdp = gio::io::load_mdp(mdp_path);
    gio::SolverConfig cfg;
    cfg.eta = eta;
    cfg.future = parse_future(future);
    cfg.outer_tol = tol;
    cfg.eval_tol = std::min(tol, cfg.eval_tol);
    cfg.outer_max_sweeps = max_sweeps;
    const gio::PolicyTable pi0 =
        gio::seeded_initial_policy(mdp.n_states, mdp.n_actions, seed);
    const gio::SolveResult res = gio::policy_iteration(mdp, pi0, cfg);

    fs::create_directories(out_dir);
    gio::io::CsvWriter csv({"sweep", "bellman_residual", "min_q_delta", "mi_mean",
                            "objective", "fixed_point_kl", "assumption3_term"});
    std::vector<double> objective_curve;
    for (const gio::SweepRecord& rec : res.trace.sweeps) {
        csv.add_row({static_cast<double>(rec.sweep), rec.bellman_residual,
                     rec.min_q_delta, rec.mi_mean, rec.objective, rec.fixed_point_kl,
                     rec.assumption3_term});
        objective_curve.push_back(rec.objective);
    }
    csv.save(out_dir + "/trace.csv");
    gio::io::save_policy(res.policy, out_dir + "/policy.json");
    gio::io::save_q(res.q, out_dir + "/q.json");
    if (svg)
        gio::io::write_text_file(
            out_dir + "/curves.svg",
            gio::io::svg_line_chart({"objective"}, {objective_curve},
                                    "objective per sweep"));
    std::printf("%s after %zu sweeps; objective %.6f\n",
                res.converged ? "converged" : "NOT converged", res.trace.sweeps.size(),
                res.trace.sweeps.back().objective);
    return res.converged ? 0 : 1;
}

int cmd_train_vi(const std::string& mdp_path, const std::string& policy_arg, long samples,
                 double lr, int epochs, std::uint64_t seed, const std::string& out_dir) {
    const gio::TabularMdp mdp = gio::io::load_mdp(mdp_path);
    gio::PolicyTable pi = policy_arg == "uniform"
                              ? gio::PolicyTable::uniform(mdp.n_states, mdp.n_actions)
                              : gio::io::load_policy(policy_arg);

    gio::SeededRng rng(seed);
    std::vector<gio::TransitionSample> data;
    data.reserve(samples);
    int s = rng.categorical(mdp.initial_dist);
    int in_episode = 0;
    while (static_cast<long>(data.size()) < samples) {
        const int a = rng.categorical(pi.probs[s]);
        const gio::StepResult sr = gio::step(mdp, s, a, rng);
        data.push_back({s, a, sr.next_state, sr.atom});
        s = sr.next_state;
        if (++in_episode >= 100) {
            s = rng.categorical(mdp.initial_dist);
            in_episode = 0;
        }
    }

    gio::VariationalModel model =
        gio::VariationalModel::uniform_init(mdp.n_states, mdp.n_actions, mdp.n_atoms());
    gio::TrainConfig cfg;
    cfg.learning_rate = lr;
    cfg.max_epochs = epochs;
    cfg.seed = seed;
    const gio::TrainTrace trace = gio::train(model, pi, data, cfg);

    fs::create_directories(out_dir);
    gio::io::CsvWriter csv({"epoch", "train_elbo", "holdout_elbo"});
    for (std::size_t e = 0; e < trace.train_elbo.size(); ++e)
        csv.add_row({static_cast<double>(e), trace.train_elbo[e], trace.holdout_elbo[e]});
    csv.save(out_dir + "/training.csv");
    gio::io::write_text_file(out_dir + "/checkpoint.json", gio::model_to_json(model));
    std::printf("trained %d epochs on %ld samples; final held-out bound %.6f\n", epochs,
                samples, trace.holdout_elbo.back());
    return 0;
}

int cmd_agent(const std::string& env_arg, long steps, double eta, double tau,
              double lr_critic, double lr_actor, int plan_every, std::uint64_t seed,
              const std::string& out_dir, const std::string& config_path) {
    if (!config_path.empty()) {
        gio::ExperimentConfig config =
            gio::config_from_json(gio::io::read_text_file(config_path));
        if (!out_dir.empty()) config.out_dir = out_dir;
        const gio::RunRecord record = gio::run_experiment(config);
        std::printf("experiment %s: %zu seed(s)\n", record.config_hash.c_str(),
                    record.runs.size());
        return record.all_converged ? 0 : 1;
    }

    gio::TabularMdp mdp;
    if (fs::exists(env_arg)) {
        mdp = gio::io::load_mdp(env_arg);
    } else {
        gio::envs::EnvSpec spec;
        spec.name = env_arg;
        mdp = gio::envs::make(spec);
    }

    gio::AgentConfig cfg;
    cfg.eta = eta;
    cfg.gamma = mdp.gamma;
    cfg.tau = tau;
    cfg.lr_critic = lr_critic;
    cfg.lr_actor = lr_actor;
    cfg.plan_every = plan_every;
    gio::GioAgent agent(mdp.n_states, mdp.n_actions, cfg, seed);
    gio::VariationalModel model =
        gio::VariationalModel::uniform_init(mdp.n_states, mdp.n_actions, mdp.n_atoms());
    const gio::RunResult res = gio::run_agent(agent, mdp, std::move(model), steps);

    fs::create_directories(out_dir);
    gio::io::CsvWriter csv({"step", "eval_return_mean", "eval_return_std", "elbo",
                            "delta_mean", "critic_loss", "actor_kl"});
    for (const gio::RunPoint& p : res.series)
        csv.add_row({static_cast<double>(p.step), p.eval_return_mean, p.eval_return_std,
                     p.elbo, p.delta_mean, p.critic_loss, p.actor_kl});
    csv.save(out_dir + "/returns.csv");
    gio::io::write_text_file(out_dir + "/checkpoint.json", gio::model_to_json(res.model));
    gio::io::save_policy(agent.policy(), out_dir + "/policy.json");
    std::printf("ran %ld steps; final eval return %.3f +- %.3f\n", steps,
                res.series.back().eval_return_mean, res.series.back().eval_return_std);
    return 0;
}

int cmd_env(const std::string& name, int n, int states, int actions, int atoms,
            double eps, double gamma, std::uint64_t seed, const std::string& out_path) {
    gio::envs::EnvSpec spec;
    spec.name = name;
    spec.seed = seed;
    spec.params["n"] = n;
    spec.params["states"] = states;
    spec.params["actions"] = actions;
    spec.params["atoms"] = atoms;
    spec.params["eps"] = eps;
    spec.params["gamma"] = gamma;
    const gio::TabularMdp mdp = gio::envs::make(spec);
    gio::io::save_mdp(mdp, out_path);
    std::printf("wrote %s: %d states, %d actions, %d atoms\n", out_path.c_str(),
                mdp.n_states, mdp.n_actions, mdp.n_atoms());
    return 0;
}

int cmd_verify(const std::string& only, const std::string& json_out,
               const std::string& inject, bool quick, std::uint64_t seed) {
    gio::verify::VerifyOptions options;
    options.quick = quick;
    options.seed = seed;
    if (!only.empty()) {
        std::string token;
        for (char c : only + ",") {
            if (c == ',') {
                if (!token.empty()) options.only.push_back(token);
                token.clear();
            } else {
                token += c;
            }
        }
    }
    if (inject == "negate-eta") options.inject = gio::verify::InjectedBug::NegateEta;
    else if (!inject.empty()) {
        std::fprintf(stderr, "unknown bug fixture: %s\n", inject.c_str());
        return 2;
    }

    const auto results = gio::verify::run_checks(options);
    for (const auto& r : results)
        std::printf("[%s] %-20s margin %+.3e  %s\n", r.pass ? "PASS" : "FAIL",
                    r.name.c_str(), r.worst_margin, r.detail.c_str());
    if (!json_out.empty())
        gio::io::write_text_file(json_out, gio::verify::report_to_json(results));
    return gio::verify::all_passed(results) ? 0 : 1;
}

int cmd_bench(const std::string& out_dir) {
    if (!out_dir.empty()) fs::create_directories(out_dir);
    std::printf("%-24s %8s %10s %12s %14s\n", "benchmark", "sweeps", "converged",
                "objective", "fixpoint_kl");
    bool ok = true;
    for (const gio::envs::Benchmark& bench : gio::envs::benchmark_suite()) {
        const gio::TabularMdp mdp = gio::envs::make(bench.spec);
        gio::SolverConfig cfg;
        cfg.eta = bench.eta;
        cfg.future = bench.future;
        const gio::PolicyTable pi0 =
            gio::seeded_initial_policy(mdp.n_states, mdp.n_actions, 1);
        const gio::SolveResult res = gio::policy_iteration(mdp, pi0, cfg);
        const gio::SweepRecord& last = res.trace.sweeps.back();
        std::printf("%-24s %8zu %10s %12.6f %14.3e\n", bench.label.c_str(),
                    res.trace.sweeps.size(), res.converged ? "yes" : "NO",
                    last.objective, last.fixed_point_kl);
        ok &= res.converged;
        if (!out_dir.empty()) {
            gio::io::CsvWriter csv({"sweep", "bellman_residual", "min_q_delta", "mi_mean",
                                    "objective", "fixed_point_kl", "assumption3_term"});
            for (const gio::SweepRecord& rec : res.trace.sweeps)
                csv.add_row({static_cast<double>(rec.sweep), rec.bellman_residual,
                             rec.min_q_delta, rec.mi_mean, rec.objective,
                             rec.fixed_point_kl, rec.assumption3_term});
            csv.save(out_dir + "/" + bench.label + ".csv");
        }
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generative intrinsic optimization workbench"};
    app.require_subcommand(1);

    // solve
    auto* solve = app.add_subcommand("solve", "Exact intrinsic policy iteration");
    std::string mdp_path, config_path, future = "one-step", out_dir = "out";
    double eta = 1.0, tol = 1e-10;
    int max_sweeps = 1000;
    std::uint64_t seed = 1;
    bool svg = false;
    solve->add_option("--mdp", mdp_path, "MDP JSON file");
    solve->add_option("--config", config_path, "experiment config JSON");
    solve->add_option("--eta", eta, "temperature (nats)");
    solve->add_option("--future", future, "one-step | next-state | k-step:k");
    solve->add_option("--tol", tol, "outer residual tolerance");
    solve->add_option("--max-sweeps", max_sweeps);
    solve->add_option("--seed", seed);
    solve->add_option("--out", out_dir);
    solve->add_flag("--svg", svg, "emit convergence chart");

    // train-vi
    auto* train = app.add_subcommand("train-vi", "Train the variational model");
    std::string tv_mdp, tv_policy = "uniform", tv_out = "out";
    long tv_samples = 5000;
    double tv_lr = 0.5;
    int tv_epochs = 100;
    std::uint64_t tv_seed = 1;
    train->add_option("--mdp", tv_mdp)->required();
    train->add_option("--policy", tv_policy, "policy JSON file or 'uniform'");
    train->add_option("--samples", tv_samples);
    train->add_option("--lr", tv_lr);
    train->add_option("--epochs", tv_epochs);
    train->add_option("--seed", tv_seed);
    train->add_option("--out", tv_out);

    // agent
    auto* agent = app.add_subcommand("agent", "Off-policy intrinsic agent");
    std::string ag_env = "gridworld", ag_out = "out", ag_config;
    long ag_steps = 200000;
    double ag_eta = 0.1, ag_tau = 0.01, ag_lrc = 1.0, ag_lra = 0.5;
    int ag_plan = 10;
    std::uint64_t ag_seed = 1;
    agent->add_option("--env", ag_env, "environment name or MDP file");
    agent->add_option("--config", ag_config, "experiment config JSON");
    agent->add_option("--steps", ag_steps);
    agent->add_option("--eta", ag_eta);
    agent->add_option("--tau", ag_tau);
    agent->add_option("--lr-critic", ag_lrc);
    agent->add_option("--lr-actor", ag_lra);
    agent->add_option("--plan-every", ag_plan);
    agent->add_option("--seed", ag_seed);
    agent->add_option("--out", ag_out);

    // env
    auto* env = app.add_subcommand("env", "Materialize a benchmark MDP to JSON");
    std::string env_name = "gridworld", env_out = "mdp.json";
    int env_n = 5, env_states = 5, env_actions = 3, env_atoms = 2;
    double env_eps = 0.1, env_gamma = 0.95;
    std::uint64_t env_seed = 0;
    env->add_option("--name", env_name)->required();
    env->add_option("--n", env_n, "grid size / chain length");
    env->add_option("--states", env_states);
    env->add_option("--actions", env_actions);
    env->add_option("--atoms", env_atoms);
    env->add_option("--eps", env_eps, "slip probability");
    env->add_option("--gamma", env_gamma);
    env->add_option("--seed", env_seed);
    env->add_option("--out", env_out);

    // verify
    auto* verify = app.add_subcommand("verify", "Run the property suite");
    std::string v_only, v_json, v_inject;
    bool v_quick = false;
    std::uint64_t v_seed = 20250901;
    verify->add_option("--only", v_only, "comma-separated check names");
    verify->add_option("--json", v_json, "write machine-readable report");
    verify->add_option("--inject-bug", v_inject, "sensitivity fixture (negate-eta)");
    verify->add_flag("--quick", v_quick, "smaller instance counts");
    verify->add_option("--seed", v_seed);

    // bench
    auto* bench = app.add_subcommand("bench", "Solve the shipped benchmark suite");
    std::string bench_out;
    bench->add_option("--out", bench_out, "directory for per-benchmark traces");

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed())
            return cmd_solve(mdp_path, config_path, eta, future, tol, max_sweeps, seed,
                             out_dir, svg);
        if (train->parsed())
            return cmd_train_vi(tv_mdp, tv_policy, tv_samples, tv_lr, tv_epochs, tv_seed,
                                tv_out);
        if (agent->parsed())
            return cmd_agent(ag_env, ag_steps, ag_eta, ag_tau, ag_lrc, ag_lra, ag_plan,
                             ag_seed, ag_out, ag_config);
        if (env->parsed())
            return cmd_env(env_name, env_n, env_states, env_actions, env_atoms, env_eps,
                           env_gamma, env_seed, env_out);
        if (verify->parsed()) return cmd_verify(v_only, v_json, v_inject, v_quick, v_seed);
        if (bench->parsed()) return cmd_bench(bench_out);
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 2;
    }
    return 0;
}
