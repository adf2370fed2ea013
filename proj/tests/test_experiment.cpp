#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "exomdp/csv.hpp"
#include "exomdp/experiment.hpp"
#include "exomdp/policy_iter.hpp"

#include "test_helpers.hpp"

using namespace exomdp;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.sample_counts = {200};
    cfg.horizons = {1};
    cfg.decay_rates = {1.0};
    cfg.default_samples = 200;
    cfg.default_horizon = 1;
    cfg.trials = 3;
    cfg.eval_states = 8;
    cfg.eval_rollout_length = 200;
    cfg.ground_truth_rollouts = 8;
    cfg.ground_truth_tolerance = 1e-2;
    cfg.base_seed = 5;
    return cfg;
}

} // namespace

TEST_CASE("grid is the deduplicated union of the three panels") {
    ExperimentConfig cfg;
    cfg.sample_counts = {500, 10000};
    cfg.horizons = {5, 3};
    cfg.decay_rates = {1.0, 2.0};
    cfg.default_samples = 10000;
    cfg.default_horizon = 5;
    cfg.default_decay = 1.0;
    const std::vector<GridPoint> grid = cfg.grid();
    // (500,5,1), (10000,5,1), (10000,3,1), (10000,5,2): the duplicates collapse
    CHECK(grid.size() == 4);
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t j = i + 1; j < grid.size(); ++j) CHECK_FALSE(grid[i] == grid[j]);
}

TEST_CASE("aggregation matches a hand sort") {
    ExperimentConfig cfg = tiny_config();
    cfg.trials = 20;
    std::vector<TrialResult> results;
    const GridPoint gp{200, 1, 1.0};
    // mse values 20, 19, ..., 1
    for (int t = 0; t < 20; ++t) {
        TrialResult r;
        r.point = gp;
        r.trial = t;
        r.mse = 20.0 - t;
        results.push_back(r);
    }
    const std::vector<AggregateRow> rows = aggregate_results(cfg, results);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].median == 10.0);              // nearest rank: 10th smallest
    CHECK(rows[0].percentile_values[0] == 4.0); // p20
    CHECK(rows[0].percentile_values[1] == 8.0); // p40
    CHECK(rows[0].percentile_values[2] == 12.0); // p60
    CHECK(rows[0].percentile_values[3] == 16.0); // p80

    // one trial: every percentile is that single value
    std::vector<TrialResult> one = {results[0]};
    const std::vector<AggregateRow> single = aggregate_results(cfg, one);
    CHECK(single[0].median == 20.0);
    for (double v : single[0].percentile_values) CHECK(v == 20.0);
}

TEST_CASE("emit_report writes headers even for empty result sets") {
    const ExperimentConfig cfg = tiny_config();
    const std::string dir = "test_report_empty";
    const ReportPaths paths = emit_report(cfg, {}, dir);
    const std::string raw = read_text_file(paths.results_csv);
    CHECK(raw == "samples,horizon,decay_rate,trial,mse,nu,residual,failed\n");
    const std::string agg = read_text_file(paths.aggregate_csv);
    CHECK(agg.find("samples,horizon,decay_rate,median,p20,p40,p60,p80,failures") == 0);
    CHECK(read_text_file(paths.manifest).find("exomdp experiment manifest") == 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("ground truth values: myopic discount returns the immediate reward scale") {
    ExperimentConfig cfg = tiny_config();
    cfg.gamma = 1e-9; // horizon collapses to a single step
    CHECK(cfg.ground_truth_horizon() == 1);
    const HawkesParams hawkes = cfg.hawkes_for(1.0);
    const PendulumPolicy policy = fixed_swing_up_policy(cfg.env);

    EvalState snap;
    snap.state = {0.0, 0.0}; // upright rest: immediate reward is ~1
    snap.flat = {0.0, 0.0, 0.0, 0.0};
    const double v = ground_truth_value(cfg, hawkes, policy, snap, 3);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("ground truth on a zero-reward chain is exactly zero") {
    ChainInstance inst = random_chain_instance(401, 3, 2, 2, 0.9);
    for (auto& per_s : inst.env.reward)
        for (auto& per_a : per_s)
            for (double& r : per_a) r = 0.0;
    WindowPolicyTable pol;
    pol.n_states = 3;
    pol.marks = 2;
    pol.actions.assign(pol.table_size(), 0);
    McConfig mc;
    mc.rollout_horizon = 200;
    mc.seed = 9;
    const std::vector<int> visible = {0, 1};
    CHECK(mc_policy_value(inst.env, pol, 0, visible, 1, CompletionDistribution::zero_fill(), mc) == 0.0);
}

TEST_CASE("ground truth on a stationary chain matches the oracle") {
    ChainInstance inst = random_chain_instance(403, 3, 2, 0, 0.9);
    exomdp_test::make_ergodic(inst.env);
    WindowPolicyTable pol;
    pol.n_states = 3;
    pol.marks = 0;
    pol.actions = {0, 1, 1};
    const std::vector<double> exact =
        exact_policy_value(build_augmented_chain(inst.env), expand_policy(inst.env, pol));

    McConfig mc;
    mc.n_completions = 1;
    mc.n_transition_samples = 4000;
    mc.rollout_horizon = 150; // gamma^150 / 0.1 ~ 1e-6
    mc.truncation_tolerance = 1e-2;
    mc.seed = 17;
    for (int s = 0; s < 3; ++s) {
        const double mc_v =
            mc_policy_value(inst.env, pol, s, {}, -1, CompletionDistribution::zero_fill(), mc);
        CHECK(std::abs(mc_v - exact[s]) < 0.02);
    }
}

TEST_CASE("swing-up policy beats idling from the hanging start") {
    ExperimentConfig cfg = tiny_config();
    const HawkesParams quiet = [] {
        HawkesParams p;
        p.base_intensity = 0.0;
        p.excitation = DecayKernel::zero();
        p.mark_coupling = DecayKernel::zero();
        return p;
    }();
    auto rollout_return = [&](const PendulumPolicy& pol, std::uint64_t seed) {
        PendulumSimulator sim(cfg.env, quiet);
        sim.restore({kPi, 0.0}, EventHistory(), seed);
        double ret = 0.0, disc = 1.0;
        for (int t = 0; t < 400; ++t) {
            const auto window = sim.history().recent_marks(8);
            ret += disc * sim.step(pol(sim.state(), window)).reward;
            disc *= 0.99;
        }
        return ret;
    };
    const PendulumPolicy active = fixed_swing_up_policy(cfg.env);
    const PendulumPolicy idle = [](const PendulumState&, std::span<const double>) { return 0.0; };
    CHECK(rollout_return(active, 2) > rollout_return(idle, 2) + 5.0);
}

TEST_CASE("with zero event gain the MSE is flat across window lengths") {
    ExperimentConfig cfg;
    cfg.env.event_gain = 0.0; // events never touch the dynamics
    cfg.sample_counts = {2000};
    cfg.horizons = {0, 2, 4};
    cfg.decay_rates = {1.0};
    cfg.default_samples = 2000;
    cfg.default_horizon = 2;
    cfg.trials = 6;
    cfg.eval_states = 24;
    cfg.eval_rollout_length = 600;
    cfg.ground_truth_rollouts = 24;
    cfg.jobs = 2;
    const std::vector<AggregateRow> rows = aggregate_results(cfg, run_sweep(cfg));
    double lo = 1e300, hi = 0.0;
    for (const AggregateRow& r : rows) {
        lo = std::min(lo, r.median);
        hi = std::max(hi, r.median);
    }
    CHECK(hi <= 4.0 * lo); // extra marks only add estimator noise, no signal
}

TEST_CASE("torque grid and greedy window policy") {
    const std::vector<double> grid = torque_grid(2.0);
    CHECK(grid.size() == 17);
    CHECK(grid.front() == -2.0);
    CHECK(grid.back() == 2.0);
    CHECK(grid[8] == doctest::Approx(0.0));
    CHECK(torque_grid(2.0, 1) == std::vector<double>{0.0});
    CHECK_THROWS(torque_grid(2.0, 0));

    // stub histories reproduce the given marks newest-first
    const std::vector<double> marks = {1.5, 0.0, -2.0};
    const EventHistory h = history_from_marks(marks);
    REQUIRE(h.length() == 3);
    CHECK(h.recent_marks(3) == marks);
    CHECK(h.at_time(1).mark == -2.0);
    CHECK(h.at_time(2).indicator == 0);

    // the greedy policy is a deterministic function of (state, window)
    ExperimentConfig cfg = tiny_config();
    GreedyGridPolicy greedy;
    greedy.env = cfg.env;
    greedy.process = cfg.hawkes_for(1.0);
    greedy.grid = grid;
    greedy.T = 2;
    greedy.samples = 3;
    greedy.gamma = cfg.gamma;
    greedy.seed = 11;
    greedy.value = [](const AugmentedState& aug) { return -aug.state[0] * aug.state[0]; };
    const PendulumState st{0.4, -1.0};
    const std::vector<double> window = {1.0, 0.0, 0.0};
    const double a1 = greedy(st, window);
    const double a2 = greedy(st, window);
    CHECK(a1 == a2);
    CHECK(std::abs(a1) <= 2.0);
}

TEST_CASE("sweep determinism: identical seeds give identical bytes, any job count") {
    ExperimentConfig cfg = tiny_config();
    const std::vector<TrialResult> r1 = run_sweep(cfg);
    ExperimentConfig cfg2 = tiny_config();
    cfg2.jobs = 2;
    const std::vector<TrialResult> r2 = run_sweep(cfg2);

    const std::string d1 = "test_report_a", d2 = "test_report_b";
    const ReportPaths p1 = emit_report(cfg, r1, d1);
    const ReportPaths p2 = emit_report(cfg2, r2, d2);
    CHECK(read_text_file(p1.results_csv) == read_text_file(p2.results_csv));
    CHECK(read_text_file(p1.aggregate_csv) == read_text_file(p2.aggregate_csv));
    CHECK(read_text_file(p1.manifest) == read_text_file(p2.manifest));

    for (const TrialResult& r : r1) {
        CHECK_FALSE(r.failed);
        CHECK(r.mse >= 0.0);
        CHECK(r.nu > 0.0);
    }
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}
