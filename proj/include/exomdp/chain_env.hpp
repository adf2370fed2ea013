#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "exomdp/bounds.hpp"
#include "exomdp/decay_kernel.hpp"
#include "exomdp/rng.hpp"

namespace exomdp {

// Marks of the quantized event process driving the finite environments.
inline constexpr int kChainMarks = 3; // {-1, 0, +1}

// Small finite MDP perturbed by a window-limited event process with marks in
// {-1, 0, +1}. Perturbations are convex mixtures
//     Q_w = (1 - omega(w)) Q + omega(w) Q_alt,
// omega(w) = sum_j |x_j| m_j, with Q_alt rows supported where the matching Q
// rows vanish. That makes the configured m_j the exact worst-case TV induced
// by a single event of age j, so the influence assumptions hold with
// equality where the verification suite probes them.
struct FiniteChainEnv {
    int n_states = 2;
    int n_actions = 1;
    int window = 1; // W: marks of ages 0..W-1 are part of the augmented state
    double gamma = 0.9;

    // base[s][a] and alt[s][a] are probability rows over next states.
    std::vector<std::vector<std::vector<double>>> base;
    std::vector<std::vector<std::vector<double>>> alt;
    std::vector<std::vector<std::vector<double>>> reward; // r(s,a,s') in [0,1]

    // Transition disturbance weight of an event of age j (index j, entry 0
    // forced to zero: the newest event only influences later transitions).
    std::vector<double> disturbance;

    // Quantized event process: P(event) = clamp(alpha0 + sum excitation, .),
    // sign mean = clip(sum coupling * mark, -1, 1). Index l = lag >= 1.
    double base_event_prob = 0.0;
    std::vector<double> excitation; // excitation[l] for l = 1..W (index 0 unused)
    std::vector<double> coupling;   // coupling[l]  for l = 1..W (index 0 unused)

    void validate() const {
        if (n_states < 1 || n_actions < 1 || window < 0) throw std::invalid_argument("bad chain shape");
        if (!(gamma > 0.0) || !(gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
        auto check_rows = [&](const auto& q, bool stochastic) {
            for (int s = 0; s < n_states; ++s)
                for (int a = 0; a < n_actions; ++a) {
                    double sum = 0.0;
                    for (int s2 = 0; s2 < n_states; ++s2) {
                        const double v = q[s][a][s2];
                        if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("bad kernel entry");
                        sum += v;
                    }
                    if (stochastic && std::abs(sum - 1.0) > 1e-12)
                        throw std::invalid_argument("kernel row does not sum to 1");
                }
        };
        check_rows(base, true);
        check_rows(alt, true);
        for (int s = 0; s < n_states; ++s)
            for (int a = 0; a < n_actions; ++a)
                for (int s2 = 0; s2 < n_states; ++s2)
                    if (reward[s][a][s2] < 0.0 || reward[s][a][s2] > 1.0)
                        throw std::invalid_argument("reward outside [0, 1]");
        double total = 0.0;
        for (double m : disturbance) {
            if (m < 0.0) throw std::invalid_argument("negative disturbance weight");
            total += m;
        }
        if (!disturbance.empty() && disturbance[0] != 0.0)
            throw std::invalid_argument("age-0 disturbance must be zero");
        if (total > 1.0 + 1e-12) throw std::invalid_argument("disturbance weights must sum to <= 1");
    }

    std::size_t window_codes() const {
        std::size_t n = 1;
        for (int j = 0; j < window; ++j) n *= kChainMarks;
        return n;
    }

    std::size_t augmented_size() const { return static_cast<std::size_t>(n_states) * window_codes(); }

    // Window <-> base-3 code (digit = mark + 1, position j is age j).
    std::size_t encode_window(const std::vector<int>& w) const {
        std::size_t code = 0, mult = 1;
        for (int j = 0; j < window; ++j) {
            code += static_cast<std::size_t>(w[static_cast<std::size_t>(j)] + 1) * mult;
            mult *= kChainMarks;
        }
        return code;
    }

    std::vector<int> decode_window(std::size_t code) const {
        std::vector<int> w(static_cast<std::size_t>(window), 0);
        for (int j = 0; j < window; ++j) {
            w[static_cast<std::size_t>(j)] = static_cast<int>(code % kChainMarks) - 1;
            code /= kChainMarks;
        }
        return w;
    }

    double mixture_weight(const std::vector<int>& w) const {
        double omega = 0.0;
        for (std::size_t j = 1; j < w.size() && j < disturbance.size(); ++j)
            omega += disturbance[j] * std::abs(static_cast<double>(w[j]));
        return omega;
    }

    double event_probability(const std::vector<int>& w) const {
        double p = base_event_prob;
        for (std::size_t j = 0; j < w.size(); ++j) {
            const std::size_t lag = j + 1;
            if (lag < excitation.size() && w[j] != 0) p += excitation[lag];
        }
        return std::clamp(p, 0.0, 1.0);
    }

    // Law of the next mark over {-1, 0, +1} given the current window.
    std::array<double, 3> mark_distribution(const std::vector<int>& w) const {
        const double p = event_probability(w);
        double mean = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            const std::size_t lag = j + 1;
            if (lag < coupling.size()) mean += coupling[lag] * static_cast<double>(w[j]);
        }
        mean = std::clamp(mean, -1.0, 1.0);
        return {p * (1.0 - mean) / 2.0, 1.0 - p, p * (1.0 + mean) / 2.0};
    }

    std::vector<double> perturbed_row(int s, int a, const std::vector<int>& w) const {
        const double omega = mixture_weight(w);
        std::vector<double> row(static_cast<std::size_t>(n_states), 0.0);
        for (int s2 = 0; s2 < n_states; ++s2)
            row[static_cast<std::size_t>(s2)] =
                (1.0 - omega) * base[s][a][s2] + omega * alt[s][a][s2];
        return row;
    }

    double expected_reward(int s, int a, const std::vector<int>& w) const {
        const std::vector<double> row = perturbed_row(s, a, w);
        double r = 0.0;
        for (int s2 = 0; s2 < n_states; ++s2) r += row[static_cast<std::size_t>(s2)] * reward[s][a][s2];
        return r;
    }

    // Environment with every influence of events older than T removed: the
    // window keeps its shape, old positions just stop mattering.
    FiniteChainEnv truncated(long long T) const {
        FiniteChainEnv env = *this;
        for (std::size_t j = 0; j < env.disturbance.size(); ++j)
            if (static_cast<long long>(j) > T) env.disturbance[j] = 0.0;
        for (std::size_t l = 0; l < env.excitation.size(); ++l)
            if (static_cast<long long>(l) >= T + 2) env.excitation[l] = 0.0;
        for (std::size_t l = 0; l < env.coupling.size(); ++l)
            if (static_cast<long long>(l) >= T + 2) env.coupling[l] = 0.0;
        return env;
    }
};

// Live configuration of a chain rollout.
struct ChainState {
    int s = 0;
    std::vector<int> window; // marks by age, newest first
};

struct ChainStepResult {
    ChainState next;
    double reward = 0.0;
    int indicator = 0;
    double mark = 0.0;
};

// One transition: the next mark is sampled from the exogenous law (it never
// sees s or a), the next state from the perturbed kernel, then the window
// shifts.
inline ChainStepResult chain_step(const FiniteChainEnv& env, const ChainState& st, int action, Rng& rng) {
    if (action < 0 || action >= env.n_actions) throw std::invalid_argument("action out of range");
    ChainStepResult out;

    const std::array<double, 3> mark_law = env.mark_distribution(st.window);
    const double u = rng.next_double();
    int mark;
    if (u < mark_law[0]) mark = -1;
    else if (u < mark_law[0] + mark_law[1]) mark = 0;
    else mark = 1;

    const std::vector<double> row = env.perturbed_row(st.s, action, st.window);
    const double v = rng.next_double();
    int s2 = env.n_states - 1;
    double acc = 0.0;
    for (int i = 0; i < env.n_states; ++i) {
        acc += row[static_cast<std::size_t>(i)];
        if (v < acc) {
            s2 = i;
            break;
        }
    }

    out.reward = env.reward[st.s][action][s2];
    out.indicator = mark != 0 ? 1 : 0;
    out.mark = static_cast<double>(mark);
    out.next.s = s2;
    out.next.window.assign(st.window.size(), 0);
    if (!st.window.empty()) {
        out.next.window[0] = mark;
        for (std::size_t j = 1; j < st.window.size(); ++j) out.next.window[j] = st.window[j - 1];
    }
    return out;
}

// Zeroes window entries of age > T (the finite analogue of state truncation).
inline std::vector<int> crop_window(const std::vector<int>& w, long long T) {
    std::vector<int> out = w;
    for (std::size_t j = 0; j < out.size(); ++j)
        if (static_cast<long long>(j) > T) out[j] = 0;
    return out;
}

// Seeded generator of small verification instances. The influence series are
// exponential: m_j = cm e^{-lm j}, and the event bounds combine as
// N_l = (ca + cb/2) e^{-le l} with shared decay, so the returned DecaySpec
// upper-bounds the realized influences with exponential kernels exactly as
// the analysis assumes.
struct ChainInstance {
    FiniteChainEnv env;
    DecaySpec spec;
};

inline ChainInstance random_chain_instance(std::uint64_t seed, int n_states, int n_actions, int window,
                                           double gamma) {
    if (n_states < 2) throw std::invalid_argument("need at least 2 states");
    Rng rng(seed);
    FiniteChainEnv env;
    env.n_states = n_states;
    env.n_actions = n_actions;
    env.window = window;
    env.gamma = gamma;

    auto tensor = [&](double fill) {
        return std::vector<std::vector<std::vector<double>>>(
            static_cast<std::size_t>(n_states),
            std::vector<std::vector<double>>(static_cast<std::size_t>(n_actions),
                                             std::vector<double>(static_cast<std::size_t>(n_states), fill)));
    };
    env.base = tensor(0.0);
    env.alt = tensor(0.0);
    env.reward = tensor(0.0);

    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            // a designated target state where the base row vanishes and the
            // alternative row concentrates: per-row TV is exactly 1.
            const int target = (s + 1 + a) % n_states;
            double sum = 0.0;
            for (int s2 = 0; s2 < n_states; ++s2) {
                if (s2 == target) continue;
                env.base[s][a][s2] = 0.05 + rng.next_double();
                sum += env.base[s][a][s2];
            }
            for (int s2 = 0; s2 < n_states; ++s2) env.base[s][a][s2] /= sum;
            env.alt[s][a][target] = 1.0;
            for (int s2 = 0; s2 < n_states; ++s2) env.reward[s][a][s2] = rng.next_double();
        }

    const double cm = 0.05 + 0.2 * rng.next_double();
    const double lm = 0.5 + rng.next_double();
    env.disturbance.assign(static_cast<std::size_t>(window), 0.0);
    for (int j = 1; j < window; ++j) env.disturbance[static_cast<std::size_t>(j)] = cm * std::exp(-lm * j);

    const double ca = 0.05 + 0.15 * rng.next_double();
    const double cb = 0.1 + 0.3 * rng.next_double();
    const double le = 0.5 + rng.next_double();
    env.base_event_prob = 0.1 + 0.2 * rng.next_double();
    env.excitation.assign(static_cast<std::size_t>(window) + 1, 0.0);
    env.coupling.assign(static_cast<std::size_t>(window) + 1, 0.0);
    for (int l = 1; l <= window; ++l) {
        env.excitation[static_cast<std::size_t>(l)] = ca * std::exp(-le * l);
        env.coupling[static_cast<std::size_t>(l)] = cb * std::exp(-le * l);
    }
    env.validate();

    ChainInstance out;
    out.env = env;
    out.spec.m_kernel = DecayKernel::exponential(cm, lm);
    out.spec.n_kernel = DecayKernel::exponential(ca + cb / 2.0, le);
    return out;
}

} // namespace exomdp
