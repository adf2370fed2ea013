#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "exomdp/chain_env.hpp"
#include "exomdp/lstd.hpp"
#include "exomdp/oracle.hpp"
#include "exomdp/rng.hpp"

#include "test_helpers.hpp"

using namespace exomdp;

namespace {

// Deterministic degree-2 basis over 3 coordinates, d = 10.
FeatureMap quadratic_features() {
    FeatureMap f;
    f.dim = 10;
    f.bound = 1.0;
    f.eval = [](const std::vector<double>& x) {
        return std::vector<double>{1.0,           x[0],          x[1],        x[2],
                                   x[0] * x[0],   x[1] * x[1],   x[2] * x[2], x[0] * x[1],
                                   x[1] * x[2],   x[0] * x[2]};
    };
    return f;
}

SamplePath random_quadratic_path(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    SamplePath path;
    for (std::size_t t = 0; t < n; ++t) {
        path.states.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        path.rewards.push_back(rng.next_double());
    }
    path.seed = seed;
    return path;
}

// Independent fixed-point route: iterate the projected pathwise operator
// from zero until it stops moving. Projection through an LU solve of the
// normal equations, not the SVD path the implementation uses.
std::vector<double> contraction_fixed_point(const linalg::Matrix& phi, const std::vector<double>& r,
                                            double gamma) {
    const std::size_t n = phi.rows(), d = phi.cols();
    linalg::Matrix gram(d, d);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) gram(i, j) += phi(t, i) * phi(t, j);

    std::vector<double> v(n, 0.0);
    for (int iter = 0; iter < 4000; ++iter) {
        // target = r + gamma * (pathwise shift of v)
        std::vector<double> target(n, 0.0);
        for (std::size_t t = 0; t < n; ++t) target[t] = r[t] + gamma * (t + 1 < n ? v[t + 1] : 0.0);
        std::vector<double> rhs(d, 0.0);
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t i = 0; i < d; ++i) rhs[i] += phi(t, i) * target[t];
        const std::vector<double> z = linalg::solve(gram, rhs);
        std::vector<double> next = linalg::multiply(phi, z);
        double delta = 0.0;
        for (std::size_t t = 0; t < n; ++t) delta = std::max(delta, std::abs(next[t] - v[t]));
        v.swap(next);
        if (delta < 1e-13) break;
    }
    return v;
}

} // namespace

TEST_CASE("build_design") {
    FeatureMap constant;
    constant.dim = 1;
    constant.bound = 1.0;
    constant.eval = [](const std::vector<double>&) { return std::vector<double>{1.0}; };

    SamplePath one;
    one.states = {{0.0}};
    one.rewards = {0.5};
    const DesignMatrices d1 = build_design(one, constant);
    CHECK(d1.phi(0, 0) == 1.0);
    CHECK(d1.phi_next(0, 0) == 0.0); // terminal convention: last row is zero

    SamplePath three;
    three.states = {{0.0}, {1.0}, {2.0}};
    three.rewards = {0.1, 0.2, 0.3};
    const DesignMatrices dc = build_design(three, constant);
    for (std::size_t t = 0; t < 3; ++t) CHECK(dc.phi(t, 0) == 1.0);
    CHECK(dc.phi_next(0, 0) == 1.0);
    CHECK(dc.phi_next(1, 0) == 1.0);
    CHECK(dc.phi_next(2, 0) == 0.0);

    // one-hot features on a 3-step path, enumerated by hand
    const FeatureMap oh = tabular_state_features(3);
    const DesignMatrices dh = build_design(three, oh);
    CHECK(dh.phi(0, 0) == 1.0);
    CHECK(dh.phi(1, 1) == 1.0);
    CHECK(dh.phi(2, 2) == 1.0);
    CHECK(dh.phi(0, 1) == 0.0);
    CHECK(dh.phi_next(0, 1) == 1.0);
    CHECK(dh.phi_next(1, 2) == 1.0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(dh.phi_next(2, j) == 0.0);

    SamplePath bad = three;
    bad.rewards[1] = 1.5;
    CHECK_THROWS(build_design(bad, constant));
}

TEST_CASE("lstd_solve: immediate-reward regression at gamma = 0") {
    SamplePath path;
    path.states = {{0.0}, {1.0}, {2.0}};
    path.rewards = {0.4, 0.9, 0.1};
    const FeatureMap oh = tabular_state_features(3);
    const DesignMatrices d = build_design(path, oh);
    const LstdSolution sol = lstd_solve(d.phi, d.phi_next, d.rewards, 0.0);
    CHECK(sol.weights[0] == doctest::Approx(0.4).epsilon(1e-10));
    CHECK(sol.weights[1] == doctest::Approx(0.9).epsilon(1e-10));
    CHECK(sol.weights[2] == doctest::Approx(0.1).epsilon(1e-10));
    CHECK(sol.effective_rank == 3);
}

TEST_CASE("lstd_solve: zero rewards give zero weights") {
    SamplePath path = random_quadratic_path(8, 50);
    for (auto& r : path.rewards) r = 0.0;
    const DesignMatrices d = build_design(path, quadratic_features());
    const LstdSolution sol = lstd_solve(d.phi, d.phi_next, d.rewards, 0.9);
    for (double w : sol.weights) CHECK(std::abs(w) < 1e-12);
}

TEST_CASE("lstd_solve on a stationary chain approaches the oracle value") {
    ChainInstance inst = random_chain_instance(301, 3, 2, 0, 0.8);
    exomdp_test::make_ergodic(inst.env);
    const FiniteAugmentedChain chain = build_augmented_chain(inst.env);
    const std::vector<int> policy = {0, 1, 1};
    const std::vector<double> exact = exact_policy_value(chain, policy);

    Rng rng(12);
    ChainState st;
    st.s = 0;
    SamplePath path;
    for (int t = 0; t < 100000; ++t) {
        path.states.push_back({static_cast<double>(st.s)});
        const ChainStepResult res = chain_step(inst.env, st, policy[static_cast<std::size_t>(st.s)], rng);
        path.rewards.push_back(res.reward);
        st = res.next;
    }
    const DesignMatrices d = build_design(path, tabular_state_features(3));
    const LstdSolution sol = lstd_solve(d.phi, d.phi_next, d.rewards, 0.8);
    for (int s = 0; s < 3; ++s) CHECK(std::abs(sol.weights[s] - exact[s]) < 0.02);
}

TEST_CASE("stationary-case RMSE shrinks roughly in half when N quadruples") {
    ChainInstance inst = random_chain_instance(303, 3, 2, 0, 0.85);
    exomdp_test::make_ergodic(inst.env);
    const FiniteAugmentedChain chain = build_augmented_chain(inst.env);
    const std::vector<int> policy = {0, 1, 0};
    const std::vector<double> exact = exact_policy_value(chain, policy);

    auto rmse_at = [&](std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        ChainState st;
        st.s = 0;
        SamplePath path;
        for (std::size_t t = 0; t < n; ++t) {
            path.states.push_back({static_cast<double>(st.s)});
            const ChainStepResult res =
                chain_step(inst.env, st, policy[static_cast<std::size_t>(st.s)], rng);
            path.rewards.push_back(res.reward);
            st = res.next;
        }
        const DesignMatrices d = build_design(path, tabular_state_features(3));
        const LstdSolution sol = lstd_solve(d.phi, d.phi_next, d.rewards, 0.85);
        double acc = 0.0;
        for (int s = 0; s < 3; ++s) acc += (sol.weights[s] - exact[s]) * (sol.weights[s] - exact[s]);
        return std::sqrt(acc / 3.0);
    };

    double small = 0.0, large = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        small += rmse_at(4000, 40 + seed);
        large += rmse_at(16000, 40 + seed);
    }
    CHECK(large < 0.75 * small); // ~0.5 expected, wide noise margin
}

TEST_CASE("fixed-point residual: direct solve agrees with contraction iteration") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SamplePath path = random_quadratic_path(900 + seed, 200);
        const DesignMatrices d = build_design(path, quadratic_features());
        const LstdSolution sol = lstd_solve(d.phi, d.phi_next, d.rewards, 0.9);
        REQUIRE(sol.effective_rank == 10);
        CHECK(fixed_point_residual(sol.weights, d.phi, d.phi_next, d.rewards, 0.9) < 1e-8);

        const std::vector<double> iterated = contraction_fixed_point(d.phi, d.rewards, 0.9);
        const std::vector<double> direct = linalg::multiply(d.phi, sol.weights);
        double gap = 0.0;
        for (std::size_t t = 0; t < direct.size(); ++t) gap += (direct[t] - iterated[t]) * (direct[t] - iterated[t]);
        CHECK(std::sqrt(gap / direct.size()) < 1e-6);
    }
}

TEST_CASE("fixed-point residual: zero rewards and rank-deficient designs") {
    SamplePath path = random_quadratic_path(5, 100);
    for (auto& r : path.rewards) r = 0.0;
    const DesignMatrices d = build_design(path, quadratic_features());
    const LstdSolution sol = lstd_solve(d.phi, d.phi_next, d.rewards, 0.9);
    CHECK(fixed_point_residual(sol.weights, d.phi, d.phi_next, d.rewards, 0.9) < 1e-12);

    // duplicate one basis function: A goes singular but nothing throws and
    // the projected fixed point is still reached
    FeatureMap dup = quadratic_features();
    dup.dim = 11;
    auto base_eval = quadratic_features().eval;
    dup.eval = [base_eval](const std::vector<double>& x) {
        std::vector<double> f = base_eval(x);
        f.push_back(f[1]);
        return f;
    };
    SamplePath path2 = random_quadratic_path(6, 150);
    const DesignMatrices d2 = build_design(path2, dup);
    const LstdSolution sol2 = lstd_solve(d2.phi, d2.phi_next, d2.rewards, 0.9);
    CHECK(sol2.effective_rank < 11);
    CHECK(fixed_point_residual(sol2.weights, d2.phi, d2.phi_next, d2.rewards, 0.9) < 1e-8);
}

TEST_CASE("empirical norm") {
    CHECK(empirical_norm({0.0, 0.0, 0.0}) == 0.0);
    CHECK(empirical_norm({2.5, 2.5}) == doctest::Approx(2.5));
    CHECK(empirical_norm({-2.5}) == doctest::Approx(2.5));
    CHECK(empirical_norm({3.0, 4.0}) == doctest::Approx(std::sqrt(25.0 / 2.0)));
    CHECK_THROWS(empirical_norm({}));
}

TEST_CASE("gram smallest positive eigenvalue") {
    // identity rows, N = d: gram = I / N
    const std::size_t d = 4;
    linalg::Matrix phi(d, d);
    for (std::size_t i = 0; i < d; ++i) phi(i, i) = 1.0;
    CHECK(gram_min_eigenvalue(phi) == doctest::Approx(1.0 / d).epsilon(1e-12));

    // equal visitation of one-hot states: gram = I / d regardless of N
    linalg::Matrix phi2(12, 4);
    for (std::size_t t = 0; t < 12; ++t) phi2(t, t % 4) = 1.0;
    CHECK(gram_min_eigenvalue(phi2) == doctest::Approx(0.25).epsilon(1e-12));

    // duplicated column: zero eigenvalue skipped, smallest positive reported
    linalg::Matrix phi3(8, 2);
    for (std::size_t t = 0; t < 8; ++t) {
        phi3(t, 0) = 1.0;
        phi3(t, 1) = 1.0;
    }
    CHECK(gram_min_eigenvalue(phi3) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("pendulum feature map") {
    const FeatureMap f5 = default_pendulum_features(5);
    CHECK(f5.dim == 21); // 8 + 2 * 6 + 1

    // zero state and window: only the constant feature is nonzero... plus
    // cos(0) = 1 and cos^2 = 1, which the count below accounts for
    const std::vector<double> zero_in(2 + 6, 0.0);
    const std::vector<double> f = f5(zero_in);
    CHECK(f[0] == 1.0);              // cos(0)
    CHECK(f[1] == 0.0);              // sin(0)
    CHECK(f[4] == 1.0);              // cos^2
    CHECK(f.back() == 1.0);          // constant
    for (std::size_t i : {2ul, 3ul, 5ul, 6ul, 7ul}) CHECK(f[i] == 0.0);
    for (std::size_t i = 8; i + 1 < f.size(); ++i) CHECK(f[i] == 0.0);

    // boundedness under extreme inputs, including out-of-clip marks
    Rng rng(21);
    for (int rep = 0; rep < 2000; ++rep) {
        std::vector<double> x = {rng.uniform(-kPi, kPi), rng.uniform(-8.0, 8.0)};
        for (int j = 0; j < 6; ++j) x.push_back(rng.uniform(-40.0, 40.0));
        for (double v : f5(x)) CHECK(std::abs(v) <= f5.bound);
    }

    CHECK(default_pendulum_features(0).dim == 11);
    CHECK_THROWS(default_pendulum_features(-1));
}

TEST_CASE("clipping never increases the error against a bounded target") {
    Rng rng(23);
    const double clip = 10.0;
    for (int rep = 0; rep < 200; ++rep) {
        const double truth = rng.uniform(-clip, clip); // |V| <= 1/(1-gamma)
        const double raw = rng.uniform(-3.0 * clip, 3.0 * clip);
        const double clipped = std::clamp(raw, -clip, clip);
        CHECK(std::abs(clipped - truth) <= std::abs(raw - truth) + 1e-15);
    }

    LinearValueFunction vf{{2.0}, 1.0};
    CHECK(vf.raw({3.0}) == doctest::Approx(6.0));
    CHECK(vf.value({3.0}) == doctest::Approx(1.0));
}

TEST_CASE("lstd_solve is covariant under basis permutation") {
    SamplePath path = random_quadratic_path(77, 120);
    const FeatureMap base = quadratic_features();
    const std::vector<std::size_t> perm = {3, 0, 9, 1, 7, 2, 8, 4, 6, 5};
    FeatureMap permuted = base;
    permuted.eval = [perm, eval = base.eval](const std::vector<double>& x) {
        const std::vector<double> f = eval(x);
        std::vector<double> g(f.size());
        for (std::size_t i = 0; i < perm.size(); ++i) g[i] = f[perm[i]];
        return g;
    };
    const DesignMatrices d0 = build_design(path, base);
    const DesignMatrices d1 = build_design(path, permuted);
    const LstdSolution s0 = lstd_solve(d0.phi, d0.phi_next, d0.rewards, 0.9);
    const LstdSolution s1 = lstd_solve(d1.phi, d1.phi_next, d1.rewards, 0.9);
    for (std::size_t i = 0; i < perm.size(); ++i)
        CHECK(s1.weights[i] == doctest::Approx(s0.weights[perm[i]]).epsilon(1e-8));
}

TEST_CASE("empirical error inequality holds in most seeded trials") {
    const double delta = 0.1;
    const double gamma = 0.85;
    int holds = 0;
    const int trials = 200;
    for (int trial = 0; trial < trials; ++trial) {
        const ChainInstance inst = random_chain_instance(4000 + trial, 3, 2, 2, gamma);
        const FiniteChainEnv& env = inst.env;
        const FiniteAugmentedChain chain = build_augmented_chain(env);

        Rng rng(9000 + trial);
        WindowPolicyTable pol;
        pol.n_states = 3;
        pol.marks = 1; // policy reads the newest mark only
        pol.actions.resize(pol.table_size());
        for (auto& a : pol.actions) a = static_cast<int>(rng.uniform_index(2));
        const std::vector<double> exact = exact_policy_value(chain, expand_policy(env, pol));

        // features read (s, newest mark); the value also depends on the older
        // mark, so the approximation error is genuinely nonzero
        const std::size_t n = 2000;
        SamplePath path;
        std::vector<double> v; // true values at the sampled augmented states
        ChainState st;
        st.s = 0;
        st.window = {0, 0};
        for (std::size_t t = 0; t < n; ++t) {
            path.states.push_back(
                {static_cast<double>(st.s), static_cast<double>(st.window[0]), static_cast<double>(st.window[1])});
            v.push_back(exact[augmented_index(env, st.s, env.encode_window(st.window))]);
            const ChainStepResult res = chain_step(env, st, pol.action_at(st.s, st.window), rng);
            path.rewards.push_back(res.reward);
            st = res.next;
        }
        const FeatureMap features = tabular_window_features(3, 1);
        const DesignMatrices dm = build_design(path, features);
        const LstdSolution sol = lstd_solve(dm.phi, dm.phi_next, dm.rewards, gamma);

        const std::vector<double> vhat = linalg::multiply(dm.phi, sol.weights);
        std::vector<double> err(n);
        for (std::size_t t = 0; t < n; ++t) err[t] = v[t] - vhat[t];
        const double lhs = empirical_norm(err);

        const std::vector<double> proj = project_onto_span(dm.phi, v);
        std::vector<double> perr(n);
        for (std::size_t t = 0; t < n; ++t) perr[t] = v[t] - proj[t];
        const double approx_term = empirical_norm(perr) / std::sqrt(1.0 - gamma * gamma);

        const double nu = gram_min_eigenvalue(dm.phi);
        const double d = static_cast<double>(features.dim);
        const double stoch = features.bound / ((1.0 - gamma) * (1.0 - gamma)) * std::sqrt(d / nu) *
                             (std::sqrt(2.0 * std::log(2.0 * d / delta) / n) + 1.0 / n);
        if (lhs <= approx_term + stoch) ++holds;
    }
    CHECK(holds >= static_cast<int>((1.0 - delta) * trials));
}
