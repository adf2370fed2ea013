#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "exomdp/bounds.hpp"
#include "exomdp/csv.hpp"
#include "exomdp/lstd.hpp"
#include "exomdp/numerics.hpp"
#include "exomdp/pendulum_env.hpp"

namespace exomdp {

using PendulumPolicy = std::function<double(const PendulumState&, std::span<const double>)>;

inline PendulumPolicy fixed_swing_up_policy(const PendulumEnv& env) {
    SwingUpPolicy base;
    return [env, base](const PendulumState& st, std::span<const double>) { return base(env, st); };
}

// One grid point of the sweep: sample budget, feature window, excitation
// decay rate of the event process.
struct GridPoint {
    std::uint64_t samples = 10000;
    long long horizon = 5;
    double decay_rate = 1.0;

    bool operator==(const GridPoint&) const = default;
};

struct TrialResult {
    GridPoint point;
    int trial = 0;
    double mse = 0.0;
    double nu = 0.0;
    double residual = 0.0;
    double wall_time = 0.0;
    bool failed = false;
    std::string error;
};

struct ExperimentConfig {
    PendulumEnv env;
    double base_intensity = 0.1;
    double excitation_scale = 0.45;                     // c in c e^{-lambda t}
    DecayKernel mark_coupling = DecayKernel::polynomial(1.0, 2.0);
    double mark_std = 1.0;
    int horizon_cap = 64;

    double gamma = 0.85;
    double delta = 0.05;
    MixingParams mixing{1.0, 0.1, 1.0};

    std::vector<std::uint64_t> sample_counts{500, 2000, 10000};
    std::vector<long long> horizons{0, 1, 2, 3, 4, 5, 6};
    std::vector<double> decay_rates{0.5, 1.0, 2.0};
    std::uint64_t default_samples = 10000;
    long long default_horizon = 5;
    double default_decay = 1.0;

    int trials = 20;
    std::vector<double> percentiles{20, 40, 60, 80};
    std::uint64_t base_seed = 1;

    int ground_truth_rollouts = 64;
    double ground_truth_tolerance = 1e-3; // gamma^H / (1-gamma) <= this
    int eval_states = 64;
    int eval_rollout_length = 2000;
    int jobs = 1;

    void validate() const {
        if (trials < 1) throw std::invalid_argument("trials must be >= 1");
        if (sample_counts.empty() || horizons.empty() || decay_rates.empty())
            throw std::invalid_argument("sweep lists must be non-empty");
        if (!(gamma > 0.0) || !(gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
        if (eval_states < 1 || ground_truth_rollouts < 1) throw std::invalid_argument("bad MC budgets");
    }

    int ground_truth_horizon() const {
        if (gamma == 0.0) return 1;
        const double target = ground_truth_tolerance * (1.0 - gamma);
        return std::max(1, static_cast<int>(std::ceil(std::log(target) / std::log(gamma))));
    }

    HawkesParams hawkes_for(double decay_rate) const {
        HawkesParams p;
        p.base_intensity = base_intensity;
        p.excitation = DecayKernel::exponential(excitation_scale, decay_rate);
        p.mark_coupling = mark_coupling;
        p.mark_std = mark_std;
        p.horizon_cap = horizon_cap;
        return p;
    }

    DecaySpec decay_spec_for(double decay_rate) const {
        DecaySpec s;
        s.m_kernel = DecayKernel::exponential(env.event_gain * excitation_scale, decay_rate);
        s.n_kernel = DecayKernel::exponential(excitation_scale, decay_rate);
        return s;
    }

    // Union of the three one-dimensional panels, deduplicated in order.
    std::vector<GridPoint> grid() const {
        std::vector<GridPoint> out;
        auto push = [&](GridPoint g) {
            for (const GridPoint& have : out)
                if (have == g) return;
            out.push_back(g);
        };
        for (std::uint64_t n : sample_counts) push({n, default_horizon, default_decay});
        for (long long T : horizons) push({default_samples, T, default_decay});
        for (double r : decay_rates) push({default_samples, default_horizon, r});
        return out;
    }
};

// Snapshot from which ground-truth rollouts restart.
struct EvalState {
    PendulumState state;
    EventHistory history;       // recent context, enough for the kernels
    std::vector<double> flat;   // flattened truncated view for the features
};

// Averaged discounted Monte Carlo return from one snapshot.
inline double ground_truth_value(const ExperimentConfig& cfg, const HawkesParams& hawkes,
                                 const PendulumPolicy& policy, const EvalState& snap,
                                 std::uint64_t seed) {
    const int horizon = cfg.ground_truth_horizon();
    PendulumSimulator sim(cfg.env, hawkes);
    double acc = 0.0;
    for (int k = 0; k < cfg.ground_truth_rollouts; ++k) {
        sim.restore(snap.state, snap.history, seed + static_cast<std::uint64_t>(k) * 0x9e37ull);
        double ret = 0.0, disc = 1.0;
        for (int t = 0; t < horizon; ++t) {
            const std::vector<double> window =
                sim.history().recent_marks(cfg.env.echo.size());
            const double a = policy(sim.state(), window);
            ret += disc * sim.step(a).reward;
            disc *= cfg.gamma;
        }
        acc += ret;
    }
    return acc / cfg.ground_truth_rollouts;
}

inline std::vector<double> ground_truth_values(const ExperimentConfig& cfg, const HawkesParams& hawkes,
                                               const PendulumPolicy& policy,
                                               const std::vector<EvalState>& snaps, std::uint64_t seed) {
    std::vector<double> out;
    out.reserve(snaps.size());
    for (std::size_t i = 0; i < snaps.size(); ++i)
        out.push_back(ground_truth_value(cfg, hawkes, policy, snaps[i], seed + i * 7919ull));
    return out;
}

inline TrialResult run_trial(const ExperimentConfig& cfg, const GridPoint& gp, int trial) {
    const auto start = std::chrono::steady_clock::now();
    TrialResult out;
    out.point = gp;
    out.trial = trial;
    try {
        const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(trial);
        Rng root(seed);
        Rng path_rng = root.split(1);
        Rng eval_rng = root.split(2);
        Rng gt_rng = root.split(3);

        const HawkesParams hawkes = cfg.hawkes_for(gp.decay_rate);
        const PendulumPolicy policy = fixed_swing_up_policy(cfg.env);
        const long long burn = burn_in_length(gp.samples, cfg.delta, cfg.mixing);

        // Sample path under the fixed policy; burn-in discarded.
        PendulumSimulator sim(cfg.env, hawkes);
        sim.reset(path_rng.next_u64());
        SamplePath path;
        path.seed = seed;
        path.policy_id = "swing_up";
        path.discarded = burn;
        const std::uint64_t total = gp.samples + static_cast<std::uint64_t>(burn);
        for (std::uint64_t t = 0; t < total; ++t) {
            const std::vector<double> window =
                sim.history().recent_marks(cfg.env.echo.size());
            const double a = policy(sim.state(), window);
            const std::vector<double> flat = flatten(sim.augmented(gp.horizon));
            const double r = sim.step(a).reward;
            if (t >= static_cast<std::uint64_t>(burn)) {
                path.states.push_back(flat);
                path.rewards.push_back(r);
            }
        }

        const FeatureMap features = default_pendulum_features(gp.horizon);
        const DesignMatrices design = build_design(path, features);
        const LstdSolution sol = lstd_solve(design.phi, design.phi_next, design.rewards, cfg.gamma);
        out.nu = gram_min_eigenvalue(design.phi);
        out.residual = fixed_point_residual(sol.weights, design.phi, design.phi_next, design.rewards,
                                            cfg.gamma);
        LinearValueFunction vf{sol.weights, 1.0 / (1.0 - cfg.gamma)};

        // Evaluation states: tail of an independent policy rollout.
        PendulumSimulator eval_sim(cfg.env, hawkes);
        eval_sim.reset(eval_rng.next_u64());
        std::vector<EvalState> snaps;
        const int len = cfg.eval_rollout_length;
        const int tail_start = len / 2;
        const int stride = std::max(1, (len - tail_start) / cfg.eval_states);
        for (int t = 0; t < len && static_cast<int>(snaps.size()) < cfg.eval_states; ++t) {
            const std::vector<double> window =
                eval_sim.history().recent_marks(cfg.env.echo.size());
            eval_sim.step(policy(eval_sim.state(), window));
            if (t >= tail_start && (t - tail_start) % stride == 0) {
                EvalState snap;
                snap.state = eval_sim.state();
                snap.history = eval_sim.history().tail_copy(static_cast<std::size_t>(cfg.horizon_cap));
                snap.flat = flatten(eval_sim.augmented(gp.horizon));
                snaps.push_back(std::move(snap));
            }
        }

        const std::vector<double> truth = ground_truth_values(cfg, hawkes, policy, snaps, gt_rng.next_u64());
        double mse = 0.0;
        for (std::size_t i = 0; i < snaps.size(); ++i) {
            const double v = vf.value(features(snaps[i].flat));
            const double d = v - truth[i];
            mse += d * d;
        }
        out.mse = mse / static_cast<double>(snaps.size());
        if (!std::isfinite(out.mse) || out.mse < 0.0) throw std::runtime_error("non-finite MSE");
    } catch (const std::exception& e) {
        out.failed = true;
        out.error = e.what();
    }
    out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

// Full sweep: every (grid point, trial) pair, executed by a bounded worker
// pool and merged in task order, so the output never depends on scheduling.
inline std::vector<TrialResult> run_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::vector<GridPoint> grid = cfg.grid();
    struct Task {
        GridPoint gp;
        int trial;
    };
    std::vector<Task> tasks;
    for (const GridPoint& gp : grid)
        for (int trial = 0; trial < cfg.trials; ++trial) tasks.push_back({gp, trial});

    std::vector<TrialResult> results(tasks.size());
    const int jobs = std::max(1, cfg.jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i)
            results[i] = run_trial(cfg, tasks[i].gp, tasks[i].trial);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) return;
                results[i] = run_trial(cfg, tasks[i].gp, tasks[i].trial);
            }
        };
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return results;
}

struct AggregateRow {
    GridPoint point;
    double median = 0.0;
    std::vector<double> percentile_values;
    int failures = 0;
};

inline std::vector<AggregateRow> aggregate_results(const ExperimentConfig& cfg,
                                                   const std::vector<TrialResult>& results) {
    std::vector<AggregateRow> rows;
    for (const GridPoint& gp : cfg.grid()) {
        AggregateRow row;
        row.point = gp;
        std::vector<double> mses;
        for (const TrialResult& r : results) {
            if (!(r.point == gp)) continue;
            if (r.failed) {
                ++row.failures;
                continue;
            }
            mses.push_back(r.mse);
        }
        if (!mses.empty()) {
            row.median = nearest_rank_percentile(mses, 50.0);
            for (double p : cfg.percentiles) row.percentile_values.push_back(nearest_rank_percentile(mses, p));
        } else {
            row.percentile_values.assign(cfg.percentiles.size(), 0.0);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

struct ReportPaths {
    std::string results_csv;
    std::string aggregate_csv;
    std::string manifest;
    std::string timings_csv;
};

inline std::string experiment_manifest(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << "exomdp experiment manifest\n";
    os << "base_seed = " << cfg.base_seed << "\n";
    os << "trials = " << cfg.trials << "\n";
    os << "gamma = " << format_double(cfg.gamma) << "\n";
    os << "delta = " << format_double(cfg.delta) << "\n";
    os << "base_intensity = " << format_double(cfg.base_intensity) << "\n";
    os << "excitation = exponential " << format_double(cfg.excitation_scale) << " <decay_rate>\n";
    os << "mark_coupling = " << cfg.mark_coupling.describe() << "\n";
    os << "horizon_cap = " << cfg.horizon_cap << "\n";
    os << "event_gain = " << format_double(cfg.env.event_gain) << "\n";
    os << "echo_weights =";
    for (double w : cfg.env.echo) os << " " << format_double(w);
    os << "\n";
    os << "mixing = beta_bar " << format_double(cfg.mixing.beta_bar) << " b "
       << format_double(cfg.mixing.b) << " kappa " << format_double(cfg.mixing.kappa) << "\n";
    os << "sample_counts =";
    for (auto n : cfg.sample_counts) os << " " << n;
    os << "\nhorizons =";
    for (auto t : cfg.horizons) os << " " << t;
    os << "\ndecay_rates =";
    for (auto r : cfg.decay_rates) os << " " << format_double(r);
    os << "\npercentiles =";
    for (auto p : cfg.percentiles) os << " " << format_double(p);
    os << "\nground_truth_rollouts = " << cfg.ground_truth_rollouts;
    os << "\nground_truth_horizon = " << cfg.ground_truth_horizon();
    os << "\neval_states = " << cfg.eval_states;
    os << "\neval_rollout_length = " << cfg.eval_rollout_length;
    os << "\npolicy = energy-shaping swing-up + linear balance (fixed)\n";
    os << "ground_truth = long-horizon Monte Carlo returns from rollout-tail states\n";
    os << "toolchain = " <<
#if defined(__VERSION__)
        "gcc-compatible " __VERSION__
#else
        "unknown"
#endif
       << ", c++" << (__cplusplus / 100 % 100) << "\n";
    return os.str();
}

// Raw trial CSV, aggregate CSV, run manifest, and a separate timing file.
// Wall-clock times vary run to run, so they live outside the raw CSV to keep
// the deterministic outputs byte-stable.
inline ReportPaths emit_report(const ExperimentConfig& cfg, const std::vector<TrialResult>& results,
                               const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    ReportPaths paths;
    paths.results_csv = (fs::path(out_dir) / "results.csv").string();
    paths.aggregate_csv = (fs::path(out_dir) / "aggregate.csv").string();
    paths.manifest = (fs::path(out_dir) / "manifest.txt").string();
    paths.timings_csv = (fs::path(out_dir) / "timings.csv").string();

    {
        std::ostringstream os;
        os << "samples,horizon,decay_rate,trial,mse,nu,residual,failed\n";
        for (const TrialResult& r : results) {
            os << r.point.samples << "," << r.point.horizon << "," << format_double(r.point.decay_rate)
               << "," << r.trial << "," << format_double(r.mse) << "," << format_double(r.nu) << ","
               << format_double(r.residual) << "," << (r.failed ? 1 : 0) << "\n";
        }
        write_text_file(paths.results_csv, os.str());
    }
    {
        std::ostringstream os;
        os << "samples,horizon,decay_rate,median";
        for (double p : cfg.percentiles) os << ",p" << format_double(p);
        os << ",failures\n";
        for (const AggregateRow& row : aggregate_results(cfg, results)) {
            os << row.point.samples << "," << row.point.horizon << ","
               << format_double(row.point.decay_rate) << "," << format_double(row.median);
            for (double v : row.percentile_values) os << "," << format_double(v);
            os << "," << row.failures << "\n";
        }
        write_text_file(paths.aggregate_csv, os.str());
    }
    {
        std::ostringstream os;
        os << "samples,horizon,decay_rate,trial,wall_time\n";
        for (const TrialResult& r : results)
            os << r.point.samples << "," << r.point.horizon << "," << format_double(r.point.decay_rate)
               << "," << r.trial << "," << format_double(r.wall_time) << "\n";
        write_text_file(paths.timings_csv, os.str());
    }
    write_text_file(paths.manifest, experiment_manifest(cfg));
    return paths;
}

} // namespace exomdp
