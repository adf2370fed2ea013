// exomdp command line: event-process simulation, bound tables, pathwise LSTD
// evaluation, policy iteration on finite instances, and the full experiment
// sweep. See README for the config schema.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "exomdp/bounds.hpp"
#include "exomdp/config.hpp"
#include "exomdp/csv.hpp"
#include "exomdp/experiment.hpp"
#include "exomdp/lstd.hpp"
#include "exomdp/oracle.hpp"
#include "exomdp/pendulum_env.hpp"
#include "exomdp/policy_iter.hpp"

namespace {

exomdp::Config load_config(const std::string& path) {
    if (path.empty()) return exomdp::Config();
    return exomdp::Config::parse(exomdp::read_text_file(path));
}

exomdp::DecaySpec decay_spec_from_config(const exomdp::Config& cfg) {
    exomdp::DecaySpec spec;
    spec.m_kernel = cfg.get_kernel("bounds.m_kernel", exomdp::DecayKernel::exponential(1.0, 1.0));
    spec.n_kernel = cfg.get_kernel("bounds.n_kernel", exomdp::DecayKernel::polynomial(1.0, 2.0));
    spec.validate();
    return spec;
}

exomdp::MixingParams mixing_from_config(const exomdp::Config& cfg) {
    exomdp::MixingParams m;
    m.beta_bar = cfg.get_double("mixing.beta_bar", 1.0);
    m.b = cfg.get_double("mixing.b", 1.0);
    m.kappa = cfg.get_double("mixing.kappa", 1.0);
    m.validate();
    return m;
}

exomdp::ExperimentConfig experiment_from_config(const exomdp::Config& cfg) {
    exomdp::ExperimentConfig ec;
    ec.env.event_gain = cfg.get_double("pendulum.event_gain", ec.env.event_gain);
    ec.env.echo = cfg.get_doubles("pendulum.echo", ec.env.echo);
    ec.env.event_torque_limit = cfg.get_double("pendulum.event_torque_limit", ec.env.event_torque_limit);
    ec.env.torque_limit = cfg.get_double("pendulum.torque_limit", ec.env.torque_limit);
    ec.base_intensity = cfg.get_double("hawkes.base_intensity", ec.base_intensity);
    ec.excitation_scale = cfg.get_double("hawkes.excitation_scale", ec.excitation_scale);
    ec.mark_coupling = cfg.get_kernel("hawkes.mark_coupling", ec.mark_coupling);
    ec.mark_std = cfg.get_double("hawkes.mark_std", ec.mark_std);
    ec.horizon_cap = static_cast<int>(cfg.get_int("hawkes.horizon_cap", ec.horizon_cap));
    ec.gamma = cfg.get_double("mdp.gamma", ec.gamma);
    ec.delta = cfg.get_double("bounds.delta", ec.delta);
    ec.mixing.beta_bar = cfg.get_double("mixing.beta_bar", ec.mixing.beta_bar);
    ec.mixing.b = cfg.get_double("mixing.b", ec.mixing.b);
    ec.mixing.kappa = cfg.get_double("mixing.kappa", ec.mixing.kappa);
    ec.mixing.validate();

    auto samples = cfg.get_ints("experiment.samples", {500, 2000, 10000});
    ec.sample_counts.assign(samples.begin(), samples.end());
    ec.horizons = cfg.get_ints("experiment.horizons", ec.horizons);
    ec.decay_rates = cfg.get_doubles("experiment.decay_rates", ec.decay_rates);
    ec.default_samples = static_cast<std::uint64_t>(cfg.get_int("experiment.default_samples", 10000));
    ec.default_horizon = cfg.get_int("experiment.default_horizon", ec.default_horizon);
    ec.default_decay = cfg.get_double("experiment.default_decay", ec.default_decay);
    ec.trials = static_cast<int>(cfg.get_int("experiment.trials", ec.trials));
    ec.percentiles = cfg.get_doubles("experiment.percentiles", ec.percentiles);
    ec.base_seed = static_cast<std::uint64_t>(cfg.get_int("experiment.base_seed", 1));
    ec.ground_truth_rollouts =
        static_cast<int>(cfg.get_int("experiment.ground_truth_rollouts", ec.ground_truth_rollouts));
    ec.eval_states = static_cast<int>(cfg.get_int("experiment.eval_states", ec.eval_states));
    ec.eval_rollout_length =
        static_cast<int>(cfg.get_int("experiment.eval_rollout_length", ec.eval_rollout_length));
    return ec;
}

int cmd_simulate_hawkes(const std::string& config_path, std::uint64_t seed, long long length,
                        const std::string& out) {
    const exomdp::Config cfg = load_config(config_path);
    const exomdp::HawkesParams params = exomdp::hawkes_from_config(cfg);
    const exomdp::EventHistory history = exomdp::rollout_events(params, static_cast<std::size_t>(length), seed);

    std::size_t events = 0;
    for (const auto& s : history.steps()) events += static_cast<std::size_t>(s.indicator);
    std::cout << "steps: " << history.length() << "\n";
    std::cout << "events: " << events << " (rate "
              << (history.empty() ? 0.0 : static_cast<double>(events) / history.length()) << ")\n";
    std::cout << "stable: " << (params.stable() ? "yes" : "no") << "\n";
    std::cout << "truncation residue past lag " << params.horizon_cap << ": "
              << params.truncation_residue() << "\n";
    std::cout << "mark TV bound N_T:";
    for (long long T = 1; T <= 5; ++T) std::cout << " " << exomdp::mark_tv_bound(params, T);
    std::cout << "\n";

    if (!out.empty()) {
        std::ostringstream os;
        exomdp::write_history_csv(os, history);
        exomdp::write_text_file(out, os.str());
        std::cout << "history written to " << out << "\n";
    }
    return 0;
}

int cmd_bounds(const std::string& config_path, bool as_csv) {
    const exomdp::Config cfg = load_config(config_path);
    const exomdp::DecaySpec spec = decay_spec_from_config(cfg);
    const exomdp::MixingParams mixing = mixing_from_config(cfg);
    const double gamma = cfg.get_double("mdp.gamma", 0.9);
    const long long T = cfg.get_int("bounds.T", 5);
    const double epsilon = cfg.get_double("bounds.epsilon", 0.1);
    const double delta = cfg.get_double("bounds.delta", 0.05);

    exomdp::LstdBoundInputs in;
    in.N = static_cast<std::uint64_t>(cfg.get_int("lstd.N", 10000));
    in.d = static_cast<std::size_t>(cfg.get_int("lstd.d", 21));
    in.L = cfg.get_double("lstd.L", 64.0);
    in.gamma = gamma;
    in.delta = delta;
    in.omega = cfg.get_double("lstd.omega", 1.0);
    in.alpha_star_norm = cfg.get_double("lstd.alpha_star_norm", 1.0);
    in.inherent_error = cfg.get_double("lstd.inherent_error", 0.0);
    const exomdp::GramEigenvalueBound gram =
        exomdp::gram_eigenvalue_lower_bound(in.omega, in.N, in.d, delta, mixing, in.L);
    in.nu = cfg.get_double("lstd.nu", gram.nu > 0.0 ? gram.nu : 1.0);

    const auto rows = exomdp::bound_table(spec, gamma, T, epsilon, in, mixing);
    if (as_csv) {
        std::cout << "bound,value\n";
        for (const auto& [name, value] : rows) std::cout << name << "," << exomdp::format_double(value) << "\n";
    } else {
        std::cout << "bounds at T = " << T << ", gamma = " << gamma << ", epsilon = " << epsilon
                  << ", delta = " << delta << "\n";
        for (const auto& [name, value] : rows)
            std::cout << "  " << std::left << std::setw(28) << name << " " << value << "\n";
    }
    return 0;
}

int cmd_evaluate(const std::string& config_path, std::uint64_t seed, const std::string& out,
                 const std::string& path_csv) {
    const exomdp::Config cfg = load_config(config_path);
    exomdp::ExperimentConfig ec = experiment_from_config(cfg);
    const long long T = cfg.get_int("lstd.T", 5);
    const std::uint64_t samples = static_cast<std::uint64_t>(cfg.get_int("lstd.N", 10000));
    const double decay = cfg.get_double("hawkes.decay_rate", 1.0);

    exomdp::SamplePath path;
    if (!path_csv.empty()) {
        std::ifstream is(path_csv);
        if (!is) throw std::runtime_error("cannot open trajectory " + path_csv);
        const auto rows = exomdp::read_trajectory_csv(is);
        path = exomdp::sample_path_from_trajectory(rows, T);
    } else {
        const exomdp::HawkesParams hawkes = ec.hawkes_for(decay);
        const exomdp::PendulumPolicy policy = exomdp::fixed_swing_up_policy(ec.env);
        exomdp::PendulumSimulator sim(ec.env, hawkes);
        sim.reset(seed);
        const long long burn = exomdp::burn_in_length(samples, ec.delta, ec.mixing);
        for (std::uint64_t t = 0; t < samples + static_cast<std::uint64_t>(burn); ++t) {
            const auto window = sim.history().recent_marks(ec.env.echo.size());
            const double a = policy(sim.state(), window);
            const std::vector<double> flat = exomdp::flatten(sim.augmented(T));
            const double r = sim.step(a).reward;
            if (t >= static_cast<std::uint64_t>(burn)) {
                path.states.push_back(flat);
                path.rewards.push_back(r);
            }
        }
        path.seed = seed;
        path.policy_id = "swing_up";
        path.discarded = burn;
    }

    const exomdp::FeatureMap features = exomdp::default_pendulum_features(T);
    const exomdp::DesignMatrices design = exomdp::build_design(path, features);
    const exomdp::LstdSolution sol =
        exomdp::lstd_solve(design.phi, design.phi_next, design.rewards, ec.gamma);
    const double nu = exomdp::gram_min_eigenvalue(design.phi);
    const double residual =
        exomdp::fixed_point_residual(sol.weights, design.phi, design.phi_next, design.rewards, ec.gamma);

    std::ostringstream os;
    os << "pathwise LSTD evaluation record\n";
    os << "policy = " << path.policy_id << "\n";
    os << "seed = " << path.seed << "\n";
    os << "samples = " << path.size() << "\n";
    os << "discarded = " << path.discarded << "\n";
    os << "T = " << T << "\n";
    os << "d = " << sol.dim << "\n";
    os << "effective_rank = " << sol.effective_rank << "\n";
    os << "nu_N = " << exomdp::format_double(nu) << "\n";
    os << "fixed_point_residual = " << exomdp::format_double(residual) << "\n";
    os << "clip = " << exomdp::format_double(1.0 / (1.0 - ec.gamma)) << "\n";
    os << "weights =";
    for (double w : sol.weights) os << " " << exomdp::format_double(w);
    os << "\n";
    std::cout << os.str();
    if (!out.empty()) {
        exomdp::write_text_file(out, os.str());
        std::cout << "record written to " << out << "\n";
    }
    return 0;
}

int cmd_policy_iter(const std::string& config_path, const std::string& env_kind, std::uint64_t seed,
                    long long T, int k_max, const std::string& out_dir) {
    const exomdp::Config cfg = load_config(config_path);
    namespace fs = std::filesystem;
    if (!out_dir.empty()) fs::create_directories(out_dir);

    if (env_kind == "chain") {
        const int n_states = static_cast<int>(cfg.get_int("chain.n_states", 3));
        const int n_actions = static_cast<int>(cfg.get_int("chain.n_actions", 2));
        const int window = static_cast<int>(cfg.get_int("chain.window", 3));
        const double gamma = cfg.get_double("mdp.gamma", 0.9);
        const exomdp::ChainInstance inst =
            exomdp::random_chain_instance(seed, n_states, n_actions, window, gamma);
        const auto mu = exomdp::CompletionDistribution::from_event_prob(inst.env.base_event_prob);
        const exomdp::PolicyIterationReport report =
            exomdp::run_policy_iteration(inst.env, T, k_max, mu, mu);
        const double threshold = exomdp::bellman_error_threshold(inst.spec, gamma, T);

        std::ostringstream os;
        os << "iteration,min_improvement,max_bellman_error,threshold\n";
        for (std::size_t k = 0; k < report.iterations.size(); ++k) {
            double max_err = 0.0;
            for (double e : report.iterations[k].bellman_error) max_err = std::max(max_err, e);
            const double improvement =
                k + 1 < report.iterations.size() ? report.min_improvement(k) : 0.0;
            os << k << "," << exomdp::format_double(improvement) << ","
               << exomdp::format_double(max_err) << "," << exomdp::format_double(threshold) << "\n";
        }
        std::cout << os.str();
        std::cout << "converged: " << (report.converged ? "yes" : "no") << " after "
                  << report.iterations.size() << " evaluations\n";
        if (!out_dir.empty())
            exomdp::write_text_file((fs::path(out_dir) / "policy_iter.csv").string(), os.str());
        return 0;
    }

    if (env_kind == "pendulum") {
        exomdp::ExperimentConfig ec = experiment_from_config(cfg);
        const exomdp::HawkesParams hawkes = ec.hawkes_for(ec.default_decay);
        const int mc_samples = static_cast<int>(cfg.get_int("mc.n_transition_samples", 4));
        const int probe_rollouts = static_cast<int>(cfg.get_int("mc.n_completions", 16));
        const std::uint64_t samples = static_cast<std::uint64_t>(cfg.get_int("lstd.N", 4000));

        exomdp::PendulumPolicy policy = exomdp::fixed_swing_up_policy(ec.env);
        std::cout << "iteration,mean_return\n";
        for (int k = 0; k <= k_max; ++k) {
            // Monte Carlo mean return of the current policy from fresh resets.
            double mean_ret = 0.0;
            exomdp::PendulumSimulator probe(ec.env, hawkes);
            for (int i = 0; i < probe_rollouts; ++i) {
                probe.reset(seed + 1000ull * static_cast<std::uint64_t>(k) + static_cast<std::uint64_t>(i));
                double ret = 0.0, disc = 1.0;
                for (int t = 0; t < ec.ground_truth_horizon(); ++t) {
                    const auto window =
                        probe.history().recent_marks(ec.env.echo.size());
                    ret += disc * probe.step(policy(probe.state(), window)).reward;
                    disc *= ec.gamma;
                }
                mean_ret += ret / probe_rollouts;
            }
            std::cout << k << "," << exomdp::format_double(mean_ret) << "\n";
            if (k == k_max) break;

            // Evaluate with pathwise LSTD, then improve greedily on the grid.
            exomdp::PendulumSimulator sim(ec.env, hawkes);
            sim.reset(seed + 77ull * static_cast<std::uint64_t>(k));
            exomdp::SamplePath path;
            for (std::uint64_t t = 0; t < samples; ++t) {
                const auto window =
                    sim.history().recent_marks(ec.env.echo.size());
                const double a = policy(sim.state(), window);
                const std::vector<double> flat = exomdp::flatten(sim.augmented(T));
                path.states.push_back(flat);
                path.rewards.push_back(sim.step(a).reward);
            }
            const exomdp::FeatureMap features = exomdp::default_pendulum_features(T);
            const exomdp::DesignMatrices design = exomdp::build_design(path, features);
            const exomdp::LstdSolution sol =
                exomdp::lstd_solve(design.phi, design.phi_next, design.rewards, ec.gamma);
            auto vf = std::make_shared<exomdp::LinearValueFunction>(
                exomdp::LinearValueFunction{sol.weights, 1.0 / (1.0 - ec.gamma)});

            exomdp::GreedyGridPolicy greedy;
            greedy.env = ec.env;
            greedy.process = hawkes;
            greedy.grid = exomdp::torque_grid(ec.env.torque_limit);
            greedy.T = T;
            greedy.samples = mc_samples;
            greedy.gamma = ec.gamma;
            greedy.seed = seed + 31ull * static_cast<std::uint64_t>(k);
            greedy.value = [vf, features](const exomdp::AugmentedState& aug) {
                return vf->value(features(exomdp::flatten(aug)));
            };
            policy = greedy;
        }
        return 0;
    }

    std::cerr << "unknown env '" << env_kind << "' (expected chain or pendulum)\n";
    return 2;
}

int cmd_experiment(const std::string& config_path, std::uint64_t seed, const std::string& out_dir,
                   int trials, int jobs) {
    const exomdp::Config cfg = load_config(config_path);
    exomdp::ExperimentConfig ec = experiment_from_config(cfg);
    if (seed != 0) ec.base_seed = seed;
    if (trials > 0) ec.trials = trials;
    ec.jobs = jobs;

    const std::vector<exomdp::TrialResult> results = exomdp::run_sweep(ec);
    const exomdp::ReportPaths paths = exomdp::emit_report(ec, results, out_dir);

    int failures = 0;
    for (const auto& r : results) failures += r.failed ? 1 : 0;
    std::cout << "grid points: " << ec.grid().size() << ", trials per point: " << ec.trials << "\n";
    std::cout << "raw results: " << paths.results_csv << "\n";
    std::cout << "aggregates:  " << paths.aggregate_csv << "\n";
    std::cout << "manifest:    " << paths.manifest << "\n";
    if (failures > 0) {
        std::cerr << failures << " trial(s) failed\n";
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"MDPs under exogenous discrete-time event processes"};
    app.require_subcommand(1);

    std::string config_path, out, path_csv, env_kind = "chain";
    std::uint64_t seed = 1, exp_seed = 0;
    long long length = 1000, T = 2;
    int k_max = 10, trials = 0, jobs = 1;
    bool as_csv = false;
    std::string exp_out = "experiment_out";

    auto* sim = app.add_subcommand("simulate-hawkes", "roll the event process and export CSV");
    sim->add_option("--config", config_path);
    sim->add_option("--seed", seed);
    sim->add_option("--length", length);
    sim->add_option("--out", out);

    auto* bounds = app.add_subcommand("bounds", "print the bound table for a configuration");
    bounds->add_option("--config", config_path);
    bounds->add_flag("--csv", as_csv);

    auto* eval = app.add_subcommand("evaluate", "pathwise LSTD policy evaluation");
    eval->add_option("--config", config_path);
    eval->add_option("--seed", seed);
    eval->add_option("--out", out);
    eval->add_option("--path", path_csv, "fit from a recorded trajectory CSV");

    auto* pi = app.add_subcommand("policy-iter", "approximate policy iteration");
    pi->add_option("--config", config_path);
    pi->add_option("--env", env_kind, "chain or pendulum");
    pi->add_option("--seed", seed);
    pi->add_option("--T", T, "event window horizon");
    pi->add_option("--k-max", k_max);
    pi->add_option("--out", out);

    auto* exp = app.add_subcommand("experiment", "run the evaluation sweep");
    exp->add_option("--config", config_path);
    exp->add_option("--seed", exp_seed, "overrides experiment.base_seed when nonzero");
    exp->add_option("--out", exp_out);
    exp->add_option("--trials", trials);
    exp->add_option("--jobs", jobs);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate_hawkes(config_path, seed, length, out);
        if (bounds->parsed()) return cmd_bounds(config_path, as_csv);
        if (eval->parsed()) return cmd_evaluate(config_path, seed, out, path_csv);
        if (pi->parsed()) return cmd_policy_iter(config_path, env_kind, seed, T, k_max, out);
        if (exp->parsed()) return cmd_experiment(config_path, exp_seed, exp_out, trials, jobs);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
