#include "gio/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "gio/baselines.hpp"
#include "gio/io.hpp"

namespace gio {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::vector<std::string>& known,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
    }
}

FutureSpec future_from_json(const json& j) {
    reject_unknown_keys(j, {"kind", "k"}, "future");
    FutureSpec f;
    f.kind = future_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("k")) f.k = j.at("k").get<int>();
    return f;
}

SolverConfig solver_from_json(const json& j) {
    reject_unknown_keys(j,
                        {"eta", "eval_tol", "eval_max_iters", "outer_max_sweeps",
                         "outer_tol", "future"},
                        "solver");
    SolverConfig cfg;
    if (j.contains("eta")) cfg.eta = j.at("eta").get<double>();
    if (j.contains("eval_tol")) cfg.eval_tol = j.at("eval_tol").get<double>();
    if (j.contains("eval_max_iters")) cfg.eval_max_iters = j.at("eval_max_iters").get<int>();
    if (j.contains("outer_max_sweeps"))
        cfg.outer_max_sweeps = j.at("outer_max_sweeps").get<int>();
    if (j.contains("outer_tol")) cfg.outer_tol = j.at("outer_tol").get<double>();
    if (j.contains("future")) cfg.future = future_from_json(j.at("future"));
    return cfg;
}

AgentConfig agent_from_json(const json& j) {
    reject_unknown_keys(
        j,
        {"eta", "gamma", "tau", "lr_critic", "lr_actor", "lr_model", "batch_size",
         "model_samples", "exact_delta", "critic_every", "actor_every", "plan_every",
         "plan_batch", "target_every", "fallback_temp", "warmup", "episode_len",
         "eval_every", "eval_episodes", "eval_horizon", "buffer_capacity"},
        "agent");
    AgentConfig cfg;
    auto get_d = [&](const char* k, double& slot) {
        if (j.contains(k)) slot = j.at(k).get<double>();
    };
    auto get_i = [&](const char* k, int& slot) {
        if (j.contains(k)) slot = j.at(k).get<int>();
    };
    get_d("eta", cfg.eta);
    get_d("gamma", cfg.gamma);
    get_d("tau", cfg.tau);
    get_d("lr_critic", cfg.lr_critic);
    get_d("lr_actor", cfg.lr_actor);
    get_d("lr_model", cfg.lr_model);
    get_i("batch_size", cfg.batch_size);
    get_i("model_samples", cfg.model_samples);
    if (j.contains("exact_delta")) cfg.exact_delta = j.at("exact_delta").get<bool>();
    get_i("critic_every", cfg.critic_every);
    get_i("actor_every", cfg.actor_every);
    get_i("plan_every", cfg.plan_every);
    get_i("plan_batch", cfg.plan_batch);
    get_i("target_every", cfg.target_every);
    get_d("fallback_temp", cfg.fallback_temp);
    get_i("warmup", cfg.warmup);
    get_i("episode_len", cfg.episode_len);
    get_i("eval_every", cfg.eval_every);
    get_i("eval_episodes", cfg.eval_episodes);
    get_i("eval_horizon", cfg.eval_horizon);
    if (j.contains("buffer_capacity"))
        cfg.buffer_capacity = j.at("buffer_capacity").get<std::size_t>();
    return cfg;
}

json future_to_json(const FutureSpec& f) {
    json j;
    j["kind"] = to_string(f.kind);
    j["k"] = f.k;
    return j;
}

json solver_to_json(const SolverConfig& cfg) {
    json j;
    j["eta"] = cfg.eta;
    j["eval_tol"] = cfg.eval_tol;
    j["eval_max_iters"] = cfg.eval_max_iters;
    j["outer_max_sweeps"] = cfg.outer_max_sweeps;
    j["outer_tol"] = cfg.outer_tol;
    j["future"] = future_to_json(cfg.future);
    return j;
}

json agent_to_json(const AgentConfig& cfg) {
    json j;
    j["eta"] = cfg.eta;
    j["gamma"] = cfg.gamma;
    j["tau"] = cfg.tau;
    j["lr_critic"] = cfg.lr_critic;
    j["lr_actor"] = cfg.lr_actor;
    j["lr_model"] = cfg.lr_model;
    j["batch_size"] = cfg.batch_size;
    j["model_samples"] = cfg.model_samples;
    j["exact_delta"] = cfg.exact_delta;
    j["critic_every"] = cfg.critic_every;
    j["actor_every"] = cfg.actor_every;
    j["plan_every"] = cfg.plan_every;
    j["plan_batch"] = cfg.plan_batch;
    j["target_every"] = cfg.target_every;
    j["fallback_temp"] = cfg.fallback_temp;
    j["warmup"] = cfg.warmup;
    j["episode_len"] = cfg.episode_len;
    j["eval_every"] = cfg.eval_every;
    j["eval_episodes"] = cfg.eval_episodes;
    j["eval_horizon"] = cfg.eval_horizon;
    j["buffer_capacity"] = cfg.buffer_capacity;
    return j;
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
    const json j = json::parse(text);
    reject_unknown_keys(j,
                        {"env", "env_file", "algorithm", "solver", "agent",
                         "agent_steps", "seeds", "out_dir", "emit_svg"},
                        "config");
    ExperimentConfig cfg;
    if (j.contains("env")) {
        const json& je = j.at("env");
        reject_unknown_keys(je, {"name", "params", "seed"}, "env");
        cfg.env.name = je.at("name").get<std::string>();
        if (je.contains("params"))
            cfg.env.params = je.at("params").get<std::map<std::string, double>>();
        if (je.contains("seed")) cfg.env.seed = je.at("seed").get<std::uint64_t>();
    }
    if (j.contains("env_file")) cfg.env_file = j.at("env_file").get<std::string>();
    if (cfg.env.name.empty() && cfg.env_file.empty())
        throw std::invalid_argument("config: need env or env_file");
    if (j.contains("algorithm")) cfg.algorithm = j.at("algorithm").get<std::string>();
    static const std::vector<std::string> kAlgorithms{"gio-exact", "gio-agent", "soft-pi",
                                                      "standard-pi"};
    if (std::find(kAlgorithms.begin(), kAlgorithms.end(), cfg.algorithm) ==
        kAlgorithms.end())
        throw std::invalid_argument("config: unknown algorithm " + cfg.algorithm);
    if (j.contains("solver")) cfg.solver = solver_from_json(j.at("solver"));
    if (j.contains("agent")) cfg.agent = agent_from_json(j.at("agent"));
    if (j.contains("agent_steps")) cfg.agent_steps = j.at("agent_steps").get<long>();
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (cfg.seeds.empty()) throw std::invalid_argument("config: empty seed list");
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("emit_svg")) cfg.emit_svg = j.at("emit_svg").get<bool>();
    return cfg;
}

std::string config_canonical_json(const ExperimentConfig& cfg) {
    json j;  // nlohmann::json orders object keys, so dump() is canonical
    json je;
    je["name"] = cfg.env.name;
    je["params"] = cfg.env.params;
    je["seed"] = cfg.env.seed;
    j["env"] = je;
    j["env_file"] = cfg.env_file;
    j["algorithm"] = cfg.algorithm;
    j["solver"] = solver_to_json(cfg.solver);
    j["agent"] = agent_to_json(cfg.agent);
    j["agent_steps"] = cfg.agent_steps;
    j["seeds"] = cfg.seeds;
    j["emit_svg"] = cfg.emit_svg;
    return j.dump();
}

PolicyTable seeded_initial_policy(int n_states, int n_actions, std::uint64_t seed) {
    SeededRng rng(seed);
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
            pi.probs[s][a] = 0.5 * pi.probs[s][a] / sum + 0.5 / n_actions;
    }
    return pi;
}

TabularMdp resolve_env(const ExperimentConfig& config) {
    if (!config.env_file.empty()) return io::load_mdp(config.env_file);
    return envs::make(config.env);
}

int worker_count(std::size_t jobs) {
    int cap = 0;
    if (const char* env = std::getenv("GIO_THREADS")) cap = std::atoi(env);
    if (cap <= 0) cap = static_cast<int>(std::thread::hardware_concurrency());
    if (cap <= 0) cap = 1;
    return std::min<int>(cap, static_cast<int>(jobs));
}

namespace {

SeedRun run_solver_seed(const ExperimentConfig& config, const TabularMdp& mdp,
                        std::uint64_t seed) {
    SeedRun out;
    out.seed = seed;
    const PolicyTable pi0 = seeded_initial_policy(mdp.n_states, mdp.n_actions, seed);

    io::CsvWriter csv({"sweep", "bellman_residual", "min_q_delta", "mi_mean", "objective",
                       "fixed_point_kl", "assumption3_term"});
    if (config.algorithm == "gio-exact") {
        const SolveResult res = policy_iteration(mdp, pi0, config.solver);
        for (const SweepRecord& rec : res.trace.sweeps) {
            csv.add_row({static_cast<double>(rec.sweep), rec.bellman_residual,
                         rec.min_q_delta, rec.mi_mean, rec.objective, rec.fixed_point_kl,
                         rec.assumption3_term});
            out.curve.push_back(rec.objective);
        }
        out.converged = res.converged;
        const auto& last = res.trace.sweeps.back();
        out.finals = {{"objective", last.objective},
                      {"mi_mean", last.mi_mean},
                      {"fixed_point_kl", last.fixed_point_kl},
                      {"sweeps", static_cast<double>(res.trace.sweeps.size())},
                      {"converged", res.converged ? 1.0 : 0.0}};
    } else {
        // independent baselines share the solver CSV shape; information
        // columns are zero by construction
        baselines::PiResult res;
        if (config.algorithm == "soft-pi")
            res = baselines::soft_policy_iteration(mdp, pi0, config.solver.eta,
                                                   config.solver.eval_tol,
                                                   config.solver.outer_max_sweeps,
                                                   config.solver.outer_tol);
        else
            res = baselines::standard_policy_iteration(mdp, pi0, config.solver.eval_tol,
                                                       config.solver.outer_max_sweeps);
        double objective = 0.0;
        for (std::size_t k = 0; k < res.q_per_sweep.size(); ++k) {
            double residual = 0.0, min_delta = 0.0;
            if (k > 0) {
                residual = sup_norm_diff(res.q_per_sweep[k], res.q_per_sweep[k - 1]);
                min_delta =
                    min_elementwise_diff(res.q_per_sweep[k], res.q_per_sweep[k - 1]);
            }
            objective = 0.0;
            for (int s = 0; s < mdp.n_states; ++s) {
                double v = 0.0;
                for (int a = 0; a < mdp.n_actions; ++a)
                    v += res.policy.probs[s][a] * res.q_per_sweep[k][s][a];
                objective += mdp.initial_dist[s] * v;
            }
            csv.add_row({static_cast<double>(k), residual, min_delta, 0.0, objective,
                         0.0, 0.0});
            out.curve.push_back(objective);
        }
        out.converged = res.converged;
        out.finals = {{"objective", objective},
                      {"sweeps", static_cast<double>(res.q_per_sweep.size())},
                      {"converged", res.converged ? 1.0 : 0.0}};
    }
    out.csv = csv.text();
    return out;
}

SeedRun run_agent_seed(const ExperimentConfig& config, const TabularMdp& mdp,
                       std::uint64_t seed) {
    SeedRun out;
    out.seed = seed;
    GioAgent agent(mdp.n_states, mdp.n_actions, config.agent, seed);
    VariationalModel model =
        VariationalModel::uniform_init(mdp.n_states, mdp.n_actions, mdp.n_atoms());
    const RunResult res = run_agent(agent, mdp, std::move(model), config.agent_steps);

    io::CsvWriter csv({"step", "eval_return_mean", "eval_return_std", "elbo",
                       "delta_mean", "critic_loss", "actor_kl"});
    for (const RunPoint& p : res.series) {
        csv.add_row({static_cast<double>(p.step), p.eval_return_mean, p.eval_return_std,
                     p.elbo, p.delta_mean, p.critic_loss, p.actor_kl});
        out.curve.push_back(p.eval_return_mean);
    }
    out.csv = csv.text();
    const RunPoint& last = res.series.back();
    out.finals = {{"eval_return_mean", last.eval_return_mean},
                  {"eval_return_std", last.eval_return_std},
                  {"elbo", last.elbo},
                  {"delta_mean", last.delta_mean},
                  {"critic_loss", last.critic_loss},
                  {"actor_kl", last.actor_kl}};
    out.converged = true;
    return out;
}

}  // namespace

std::string summary_to_json(const RunRecord& record) {
    json j;
    j["config_hash"] = record.config_hash;
    j["version"] = record.version;
    j["algorithm"] = record.algorithm;
    j["all_converged"] = record.all_converged;
    json seeds = json::array();
    for (const SeedRun& run : record.runs) {
        json r;
        r["seed"] = run.seed;
        r["converged"] = run.converged;
        r["finals"] = run.finals;
        seeds.push_back(r);
    }
    j["seeds"] = seeds;
    json stats;
    for (const auto& [metric, values] : record.summary) {
        json m;
        m["mean"] = values[0];
        m["std"] = values[1];
        m["min"] = values[2];
        m["max"] = values[3];
        stats[metric] = m;
    }
    j["metrics"] = stats;
    return j.dump(2);
}

RunRecord run_experiment(const ExperimentConfig& config) {
    const TabularMdp mdp = resolve_env(config);
    RunRecord record;
    record.algorithm = config.algorithm;
    record.config_hash = io::config_hash(config_canonical_json(config));
    record.runs.resize(config.seeds.size());

    const int workers = worker_count(config.seeds.size());
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex next_mutex;
    auto work = [&]() {
        for (;;) {
            std::size_t idx;
            {
                std::lock_guard<std::mutex> lock(next_mutex);
                if (next >= config.seeds.size()) return;
                idx = next++;
            }
            const std::uint64_t seed = config.seeds[idx];
            record.runs[idx] = config.algorithm == "gio-agent"
                                   ? run_agent_seed(config, mdp, seed)
                                   : run_solver_seed(config, mdp, seed);
        }
    };
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();

    for (const SeedRun& run : record.runs) record.all_converged &= run.converged;

    // summary statistics across seeds (final values per metric)
    for (const SeedRun& run : record.runs)
        for (const auto& [metric, value] : run.finals) record.summary[metric];
    for (auto& [metric, slot] : record.summary) {
        double sum = 0.0, sum_sq = 0.0;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        int count = 0;
        for (const SeedRun& run : record.runs) {
            const auto it = run.finals.find(metric);
            if (it == run.finals.end()) continue;
            sum += it->second;
            sum_sq += it->second * it->second;
            lo = std::min(lo, it->second);
            hi = std::max(hi, it->second);
            ++count;
        }
        const double mean = sum / count;
        slot = {mean, std::sqrt(std::max(0.0, sum_sq / count - mean * mean)), lo, hi};
    }

    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    for (const SeedRun& run : record.runs) {
        const std::string path =
            config.out_dir + "/seed_" + std::to_string(run.seed) + ".csv";
        io::write_text_file(path, run.csv);
    }
    io::write_text_file(config.out_dir + "/summary.json", summary_to_json(record));
    if (config.emit_svg) {
        std::vector<std::string> labels;
        std::vector<std::vector<double>> series;
        for (const SeedRun& run : record.runs) {
            labels.push_back("seed " + std::to_string(run.seed));
            series.push_back(run.curve);
        }
        const std::string title = config.algorithm == "gio-agent"
                                      ? "evaluation return"
                                      : "objective per sweep";
        io::write_text_file(config.out_dir + "/curves.svg",
                            io::svg_line_chart(labels, series, title));
    }
    return record;
}

}  // namespace gio
