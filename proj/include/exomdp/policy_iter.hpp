#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "exomdp/chain_env.hpp"
#include "exomdp/oracle.hpp"
#include "exomdp/rng.hpp"

namespace exomdp {

// Law used to fill in the event positions a window policy cannot see
// (ages T+1 .. W-1), one independent draw per position.
struct CompletionDistribution {
    std::array<double, 3> law{0.0, 1.0, 0.0}; // P(-1), P(0), P(+1)

    static CompletionDistribution zero_fill() { return {}; }

    // Marginal one-step law of the quantized event process started cold:
    // event with probability p, sign uniform.
    static CompletionDistribution from_event_prob(double p) {
        CompletionDistribution d;
        d.law = {p / 2.0, 1.0 - p, p / 2.0};
        return d;
    }

    int sample(Rng& rng) const {
        const double u = rng.next_double();
        if (u < law[0]) return -1;
        if (u < law[0] + law[1]) return 0;
        return 1;
    }
};

// Monte Carlo budgets for the sampled variants of evaluation/improvement.
struct McConfig {
    int n_completions = 8;
    int n_transition_samples = 8;
    int rollout_horizon = 100;
    double truncation_tolerance = 1e-2; // declared bound on gamma^H / (1-gamma)
    std::uint64_t seed = 0;

    void validate(double gamma) const {
        if (n_completions < 1 || n_transition_samples < 1 || rollout_horizon < 1)
            throw std::invalid_argument("Monte Carlo counts must be >= 1");
        const double tail = std::pow(gamma, rollout_horizon) / (1.0 - gamma);
        if (tail > truncation_tolerance)
            throw std::invalid_argument("rollout horizon too short for the declared truncation tolerance");
    }
};

namespace detail {

// All window completions for ages T+1..W-1 with their product weights.
struct Completion {
    std::vector<int> marks; // marks for positions T+1..W-1, in age order
    double weight = 1.0;
};

inline std::vector<Completion> enumerate_completions(int window, long long T,
                                                     const CompletionDistribution& mu) {
    const int free_positions = std::max(0, window - static_cast<int>(T) - 1);
    std::vector<Completion> out;
    std::size_t combos = 1;
    for (int i = 0; i < free_positions; ++i) combos *= kChainMarks;
    out.reserve(combos);
    for (std::size_t code = 0; code < combos; ++code) {
        Completion c;
        c.marks.resize(static_cast<std::size_t>(free_positions));
        std::size_t rem = code;
        for (int i = 0; i < free_positions; ++i) {
            const int mark = static_cast<int>(rem % kChainMarks) - 1;
            rem /= kChainMarks;
            c.marks[static_cast<std::size_t>(i)] = mark;
            c.weight *= mu.law[static_cast<std::size_t>(mark + 1)];
        }
        if (c.weight > 0.0) out.push_back(std::move(c));
    }
    return out;
}

inline std::vector<int> assemble_window(const FiniteChainEnv& env, std::span<const int> visible,
                                        long long T, std::span<const int> completion) {
    std::vector<int> w(static_cast<std::size_t>(env.window), 0);
    for (std::size_t j = 0; j < w.size(); ++j) {
        if (static_cast<long long>(j) <= T) {
            if (j < visible.size()) w[j] = visible[j];
        } else {
            const std::size_t k = j - static_cast<std::size_t>(T) - 1;
            if (k < completion.size()) w[j] = completion[k];
        }
    }
    return w;
}

} // namespace detail

// Tabulated value estimate over truncated augmented states (s, T+1 marks).
struct TruncatedValueTable {
    int n_states = 1;
    int marks = 0;
    std::vector<double> values; // index: s * 3^marks + window code

    std::size_t index_of(int s, std::span<const int> window) const {
        std::size_t code = 0, mult = 1;
        for (int j = 0; j < marks; ++j) {
            const int m = j < static_cast<int>(window.size()) ? window[static_cast<std::size_t>(j)] : 0;
            code += static_cast<std::size_t>(m + 1) * mult;
            mult *= kChainMarks;
        }
        return static_cast<std::size_t>(s) * mult + code;
    }

    double at(int s, std::span<const int> window) const { return values.at(index_of(s, window)); }
};

// Approximate policy evaluation, exact variant: V_hat(s, x_{0:T}) is the
// mu_1-weighted combination of the exact values over completions of the
// unseen older events.
inline TruncatedValueTable evaluate_policy_exact(const FiniteChainEnv& env,
                                                 const WindowPolicyTable& policy, long long T,
                                                 const CompletionDistribution& mu1,
                                                 std::size_t cap = FiniteAugmentedChain::kDefaultCap) {
    const FiniteAugmentedChain chain = build_augmented_chain(env, cap);
    const std::vector<double> full_value = exact_policy_value(chain, expand_policy(env, policy));
    const std::vector<detail::Completion> completions = detail::enumerate_completions(env.window, T, mu1);

    TruncatedValueTable out;
    out.n_states = env.n_states;
    out.marks = static_cast<int>(std::min<long long>(T + 1, env.window));
    std::size_t codes = 1;
    for (int j = 0; j < out.marks; ++j) codes *= kChainMarks;
    out.values.assign(static_cast<std::size_t>(env.n_states) * codes, 0.0);

    for (std::size_t code = 0; code < codes; ++code) {
        std::vector<int> visible(static_cast<std::size_t>(out.marks), 0);
        std::size_t rem = code;
        for (int j = 0; j < out.marks; ++j) {
            visible[static_cast<std::size_t>(j)] = static_cast<int>(rem % kChainMarks) - 1;
            rem /= kChainMarks;
        }
        for (int s = 0; s < env.n_states; ++s) {
            double acc = 0.0;
            double mass = 0.0;
            for (const auto& c : completions) {
                const std::vector<int> w = detail::assemble_window(env, visible, T, c.marks);
                acc += c.weight * full_value[augmented_index(env, s, env.encode_window(w))];
                mass += c.weight;
            }
            out.values[static_cast<std::size_t>(s) * codes + code] = acc / mass;
        }
    }
    return out;
}

// Approximate policy improvement, exact variant: one-step lookahead through
// the mu_2-completed window, greedy with lowest-index tie-breaking.
inline WindowPolicyTable improve_policy_exact(const FiniteChainEnv& env, const TruncatedValueTable& vhat,
                                              long long T, const CompletionDistribution& mu2) {
    if (env.n_actions < 1) throw std::invalid_argument("empty action set");
    const std::vector<detail::Completion> completions = detail::enumerate_completions(env.window, T, mu2);

    WindowPolicyTable out;
    out.n_states = env.n_states;
    out.marks = vhat.marks;
    std::size_t codes = 1;
    for (int j = 0; j < out.marks; ++j) codes *= kChainMarks;
    out.actions.assign(static_cast<std::size_t>(env.n_states) * codes, 0);

    for (std::size_t code = 0; code < codes; ++code) {
        std::vector<int> visible(static_cast<std::size_t>(out.marks), 0);
        std::size_t rem = code;
        for (int j = 0; j < out.marks; ++j) {
            visible[static_cast<std::size_t>(j)] = static_cast<int>(rem % kChainMarks) - 1;
            rem /= kChainMarks;
        }
        // successor visible windows under each next mark: shift, drop oldest
        std::array<std::vector<int>, 3> shifted;
        for (int m = -1; m <= 1; ++m) {
            std::vector<int> nw(static_cast<std::size_t>(out.marks), 0);
            if (out.marks > 0) {
                nw[0] = m;
                for (int j = 1; j < out.marks; ++j)
                    nw[static_cast<std::size_t>(j)] = visible[static_cast<std::size_t>(j - 1)];
            }
            shifted[static_cast<std::size_t>(m + 1)] = std::move(nw);
        }

        for (int s = 0; s < env.n_states; ++s) {
            double best = -1e300;
            int best_action = 0;
            for (int a = 0; a < env.n_actions; ++a) {
                double acc = 0.0;
                double mass = 0.0;
                for (const auto& c : completions) {
                    const std::vector<int> w = detail::assemble_window(env, visible, T, c.marks);
                    const std::vector<double> row = env.perturbed_row(s, a, w);
                    const std::array<double, 3> mark_law = env.mark_distribution(w);
                    double inner = 0.0;
                    for (int s2 = 0; s2 < env.n_states; ++s2) {
                        if (row[static_cast<std::size_t>(s2)] == 0.0) continue;
                        double future = 0.0;
                        for (int m = 0; m < 3; ++m)
                            future += mark_law[static_cast<std::size_t>(m)] *
                                      vhat.at(s2, shifted[static_cast<std::size_t>(m)]);
                        inner += row[static_cast<std::size_t>(s2)] *
                                 (env.reward[s][a][s2] + env.gamma * future);
                    }
                    acc += c.weight * inner;
                    mass += c.weight;
                }
                const double q = acc / mass;
                if (q > best) {
                    best = q;
                    best_action = a;
                }
            }
            out.actions[static_cast<std::size_t>(s) * codes + code] = best_action;
        }
    }
    return out;
}

struct IterationRecord {
    WindowPolicyTable policy;
    TruncatedValueTable vhat;
    std::vector<double> exact_value;    // V^{pi_k} on the full augmented chain
    std::vector<double> bellman_error;  // |T V^{pi_k} - V^{pi_k}| per state
};

struct PolicyIterationReport {
    std::vector<IterationRecord> iterations;
    bool converged = false;

    // min over states of V^{pi_{k+1}} - V^{pi_k}.
    double min_improvement(std::size_t k) const {
        const auto& a = iterations.at(k).exact_value;
        const auto& b = iterations.at(k + 1).exact_value;
        double lo = 1e300;
        for (std::size_t i = 0; i < a.size(); ++i) lo = std::min(lo, b[i] - a[i]);
        return lo;
    }
};

// Exact-variant policy iteration: evaluate through mu_1, improve through
// mu_2, stop when the policy repeats or k_max improvements were applied.
inline PolicyIterationReport run_policy_iteration(const FiniteChainEnv& env, long long T, int k_max,
                                                  const CompletionDistribution& mu1,
                                                  const CompletionDistribution& mu2,
                                                  std::size_t cap = FiniteAugmentedChain::kDefaultCap) {
    if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");
    const FiniteAugmentedChain chain = build_augmented_chain(env, cap);

    WindowPolicyTable policy;
    policy.n_states = env.n_states;
    policy.marks = static_cast<int>(std::min<long long>(T + 1, env.window));
    policy.actions.assign(policy.table_size(), 0);

    PolicyIterationReport report;
    for (int k = 0; k <= k_max; ++k) {
        IterationRecord rec;
        rec.policy = policy;
        rec.vhat = evaluate_policy_exact(env, policy, T, mu1, cap);
        const std::vector<int> expanded = expand_policy(env, policy);
        rec.exact_value = exact_policy_value(chain, expanded);
        rec.bellman_error = bellman_error_map(chain, expanded);
        report.iterations.push_back(std::move(rec));
        if (k == k_max) break;

        WindowPolicyTable next = improve_policy_exact(env, report.iterations.back().vhat, T, mu2);
        if (next.actions == policy.actions) {
            report.converged = true;
            break;
        }
        policy = std::move(next);
    }
    return report;
}

// Monte Carlo estimate of the window policy's value at a truncated state:
// sample older events from mu, roll the policy out, average the discounted
// returns. Deterministic in mc.seed.
inline double mc_policy_value(const FiniteChainEnv& env, const WindowPolicyTable& policy, int s0,
                              std::span<const int> visible, long long T, const CompletionDistribution& mu,
                              const McConfig& mc) {
    mc.validate(env.gamma);
    Rng root(mc.seed);
    double acc = 0.0;
    for (int i = 0; i < mc.n_completions; ++i) {
        Rng completion_rng = root.split(static_cast<std::uint64_t>(i) * 2 + 1);
        std::vector<int> completion(
            static_cast<std::size_t>(std::max(0, env.window - static_cast<int>(T) - 1)), 0);
        for (auto& m : completion) m = mu.sample(completion_rng);

        for (int j = 0; j < mc.n_transition_samples; ++j) {
            Rng rng = completion_rng.split(static_cast<std::uint64_t>(j) + 17);
            ChainState st;
            st.s = s0;
            st.window = detail::assemble_window(env, visible, T, completion);
            double ret = 0.0, disc = 1.0;
            for (int step = 0; step < mc.rollout_horizon; ++step) {
                const int a = policy.action_at(st.s, st.window);
                ChainStepResult res = chain_step(env, st, a, rng);
                ret += disc * res.reward;
                disc *= env.gamma;
                st = std::move(res.next);
            }
            acc += ret;
        }
    }
    return acc / (static_cast<double>(mc.n_completions) * static_cast<double>(mc.n_transition_samples));
}

} // namespace exomdp
