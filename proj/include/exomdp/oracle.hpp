#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "exomdp/chain_env.hpp"
#include "exomdp/linalg.hpp"

namespace exomdp {

// Exact closure of a FiniteChainEnv under its mark window: every augmented
// state (s, window) is enumerated and the per-action transition matrices are
// materialized densely. This is a verification oracle, not a scalable
// solver; instances above the cap are refused rather than handled sparsely.
struct FiniteAugmentedChain {
    std::size_t size = 0;
    int n_actions = 1;
    double gamma = 0.9;
    std::vector<linalg::Matrix> transition;        // per action, size x size
    std::vector<std::vector<double>> exp_reward;   // per action, expected reward

    static constexpr std::size_t kDefaultCap = 2000;
};

// Augmented index layout: idx = s * 3^W + window_code.
inline std::size_t augmented_index(const FiniteChainEnv& env, int s, std::size_t window_code) {
    return static_cast<std::size_t>(s) * env.window_codes() + window_code;
}

inline FiniteAugmentedChain build_augmented_chain(const FiniteChainEnv& env,
                                                  std::size_t cap = FiniteAugmentedChain::kDefaultCap) {
    env.validate();
    const std::size_t n = env.augmented_size();
    if (n > cap) throw std::invalid_argument("augmented chain exceeds the oracle state cap");

    FiniteAugmentedChain chain;
    chain.size = n;
    chain.n_actions = env.n_actions;
    chain.gamma = env.gamma;
    chain.transition.assign(static_cast<std::size_t>(env.n_actions), linalg::Matrix(n, n));
    chain.exp_reward.assign(static_cast<std::size_t>(env.n_actions), std::vector<double>(n, 0.0));

    const std::size_t codes = env.window_codes();
    for (std::size_t code = 0; code < codes; ++code) {
        const std::vector<int> w = env.decode_window(code);
        const std::array<double, 3> mark_law = env.mark_distribution(w);

        // Codes of the three shifted successor windows.
        std::array<std::size_t, 3> next_code{0, 0, 0};
        for (int mark = -1; mark <= 1; ++mark) {
            std::vector<int> w2(w.size(), 0);
            if (!w.empty()) {
                w2[0] = mark;
                for (std::size_t j = 1; j < w.size(); ++j) w2[j] = w[j - 1];
            }
            next_code[static_cast<std::size_t>(mark + 1)] = env.encode_window(w2);
        }

        for (int s = 0; s < env.n_states; ++s) {
            const std::size_t from = augmented_index(env, s, code);
            for (int a = 0; a < env.n_actions; ++a) {
                const std::vector<double> row = env.perturbed_row(s, a, w);
                double r = 0.0;
                for (int s2 = 0; s2 < env.n_states; ++s2) {
                    r += row[static_cast<std::size_t>(s2)] * env.reward[s][a][s2];
                    for (int m = 0; m < 3; ++m) {
                        const double p = row[static_cast<std::size_t>(s2)] * mark_law[static_cast<std::size_t>(m)];
                        if (p == 0.0) continue;
                        chain.transition[static_cast<std::size_t>(a)](
                            from, augmented_index(env, s2, next_code[static_cast<std::size_t>(m)])) += p;
                    }
                }
                chain.exp_reward[static_cast<std::size_t>(a)][from] = r;
            }
        }
    }
    return chain;
}

// Policy that reads the state and the newest `marks` window entries.
struct WindowPolicyTable {
    int n_states = 1;
    int marks = 0;            // number of window marks consumed (T + 1)
    std::vector<int> actions; // index: s * 3^marks + code of cropped window

    std::size_t table_size() const {
        std::size_t codes = 1;
        for (int j = 0; j < marks; ++j) codes *= kChainMarks;
        return static_cast<std::size_t>(n_states) * codes;
    }

    std::size_t index_of(int s, std::span<const int> full_window) const {
        std::size_t code = 0, mult = 1;
        for (int j = 0; j < marks; ++j) {
            const int mark = j < static_cast<int>(full_window.size()) ? full_window[static_cast<std::size_t>(j)] : 0;
            code += static_cast<std::size_t>(mark + 1) * mult;
            mult *= kChainMarks;
        }
        return static_cast<std::size_t>(s) * mult + code;
    }

    int action_at(int s, std::span<const int> full_window) const {
        return actions.at(index_of(s, full_window));
    }
};

// Expands a window policy to one action per augmented state.
inline std::vector<int> expand_policy(const FiniteChainEnv& env, const WindowPolicyTable& policy) {
    std::vector<int> out(env.augmented_size(), 0);
    for (std::size_t code = 0; code < env.window_codes(); ++code) {
        const std::vector<int> w = env.decode_window(code);
        for (int s = 0; s < env.n_states; ++s)
            out[augmented_index(env, s, code)] = policy.action_at(s, w);
    }
    return out;
}

// V = (I - gamma P_pi)^{-1} r_pi by direct LU solve.
inline std::vector<double> exact_policy_value(const FiniteAugmentedChain& chain,
                                              const std::vector<int>& policy) {
    if (policy.size() != chain.size) throw std::invalid_argument("policy size mismatch");
    const std::size_t n = chain.size;
    linalg::Matrix system(n, n);
    std::vector<double> rhs(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const int a = policy[i];
        if (a < 0 || a >= chain.n_actions) throw std::invalid_argument("policy action out of range");
        for (std::size_t j = 0; j < n; ++j)
            system(i, j) = (i == j ? 1.0 : 0.0) - chain.gamma * chain.transition[static_cast<std::size_t>(a)](i, j);
        rhs[i] = chain.exp_reward[static_cast<std::size_t>(a)][i];
    }
    return linalg::solve(std::move(system), std::move(rhs));
}

// One Bellman backup of v under action a at state i.
inline double backup(const FiniteAugmentedChain& chain, std::size_t i, int a,
                     const std::vector<double>& v) {
    const linalg::Matrix& p = chain.transition[static_cast<std::size_t>(a)];
    double acc = 0.0;
    for (std::size_t j = 0; j < chain.size; ++j) acc += p(i, j) * v[j];
    return chain.exp_reward[static_cast<std::size_t>(a)][i] + chain.gamma * acc;
}

struct OptimalSolution {
    std::vector<double> values;
    std::vector<int> policy;
    std::size_t iterations = 0;
};

// Value iteration to span seminorm 1e-12, finished with the standard
// gamma/(1-gamma) span certificate, then greedy extraction (lowest action
// index wins ties).
inline OptimalSolution exact_optimal(const FiniteAugmentedChain& chain) {
    const std::size_t n = chain.size;
    std::vector<double> v(n, 0.0), next(n, 0.0);
    std::size_t iters = 0;
    bool converged = false;
    for (; iters < 100000; ++iters) {
        for (std::size_t i = 0; i < n; ++i) {
            double best = -1e300;
            for (int a = 0; a < chain.n_actions; ++a) best = std::max(best, backup(chain, i, a, v));
            next[i] = best;
        }
        double lo = 1e300, hi = -1e300;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = next[i] - v[i];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        v.swap(next);
        if (hi - lo <= 1e-12) {
            converged = true;
            break;
        }
    }
    if (!converged) throw std::runtime_error("value iteration missed the span tolerance");

    OptimalSolution out;
    out.iterations = iters;
    out.policy.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double best = -1e300;
        int arg = 0;
        for (int a = 0; a < chain.n_actions; ++a) {
            const double q = backup(chain, i, a, v);
            if (q > best) {
                best = q;
                arg = a;
            }
        }
        out.policy[i] = arg;
    }
    out.values = exact_policy_value(chain, out.policy);
    return out;
}

inline double tv_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("tv_distance needs equal-length vectors");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
    return 0.5 * acc;
}

// Worst-case realized TV between perturbed transition rows for windows that
// differ only by one event of the given age. With the mixture construction
// this equals the configured disturbance weight.
inline double single_event_perturbation(const FiniteChainEnv& env, int age) {
    if (age < 0 || age >= env.window) return 0.0;
    double worst = 0.0;
    for (std::size_t code = 0; code < env.window_codes(); ++code) {
        std::vector<int> w = env.decode_window(code);
        if (w[static_cast<std::size_t>(age)] != 0) continue;
        for (int mark : {-1, 1}) {
            std::vector<int> w2 = w;
            w2[static_cast<std::size_t>(age)] = mark;
            for (int s = 0; s < env.n_states; ++s)
                for (int a = 0; a < env.n_actions; ++a) {
                    const std::vector<double> r1 = env.perturbed_row(s, a, w);
                    const std::vector<double> r2 = env.perturbed_row(s, a, w2);
                    worst = std::max(worst, tv_distance(r1, r2));
                }
        }
    }
    return worst;
}

// max over augmented states of |V^pi(s, w) - V^pi(s, crop_T(w))| on the full
// chain, for a policy that reads at most T+1 marks.
inline double exact_truncation_gap(const FiniteChainEnv& env, const WindowPolicyTable& policy,
                                   long long T, std::size_t cap = FiniteAugmentedChain::kDefaultCap) {
    const FiniteAugmentedChain chain = build_augmented_chain(env, cap);
    const std::vector<double> v = exact_policy_value(chain, expand_policy(env, policy));
    double gap = 0.0;
    for (std::size_t code = 0; code < env.window_codes(); ++code) {
        const std::vector<int> w = env.decode_window(code);
        const std::size_t cropped = env.encode_window(crop_window(w, T));
        for (int s = 0; s < env.n_states; ++s)
            gap = std::max(gap, std::abs(v[augmented_index(env, s, code)] -
                                         v[augmented_index(env, s, cropped)]));
    }
    return gap;
}

// Plain-text matrix format for fixture reuse:
//   exomdp-chain v1
//   size <n> actions <A> gamma <g>
//   reward <a>:    n values on one line
//   transition <a>: n rows of n values
inline std::string serialize_chain(const FiniteAugmentedChain& chain) {
    std::ostringstream os;
    os << "exomdp-chain v1\n";
    os << "size " << chain.size << " actions " << chain.n_actions << " gamma ";
    os.precision(17);
    os << chain.gamma << "\n";
    for (int a = 0; a < chain.n_actions; ++a) {
        os << "reward " << a << "\n";
        for (std::size_t i = 0; i < chain.size; ++i)
            os << chain.exp_reward[static_cast<std::size_t>(a)][i] << (i + 1 < chain.size ? ' ' : '\n');
        os << "transition " << a << "\n";
        for (std::size_t i = 0; i < chain.size; ++i)
            for (std::size_t j = 0; j < chain.size; ++j)
                os << chain.transition[static_cast<std::size_t>(a)](i, j) << (j + 1 < chain.size ? ' ' : '\n');
    }
    return os.str();
}

inline FiniteAugmentedChain parse_chain(const std::string& text) {
    std::istringstream is(text);
    std::string magic, version;
    is >> magic >> version;
    if (magic != "exomdp-chain" || version != "v1")
        throw std::invalid_argument("not an exomdp-chain v1 file");
    std::string key;
    FiniteAugmentedChain chain;
    is >> key >> chain.size >> key >> chain.n_actions >> key >> chain.gamma;
    if (chain.size == 0 || chain.n_actions < 1) throw std::invalid_argument("bad chain header");
    chain.transition.assign(static_cast<std::size_t>(chain.n_actions),
                            linalg::Matrix(chain.size, chain.size));
    chain.exp_reward.assign(static_cast<std::size_t>(chain.n_actions),
                            std::vector<double>(chain.size, 0.0));
    std::string section;
    int a = 0;
    while (is >> section >> a) {
        if (a < 0 || a >= chain.n_actions) throw std::invalid_argument("action index out of range");
        if (section == "reward") {
            for (std::size_t i = 0; i < chain.size; ++i)
                if (!(is >> chain.exp_reward[static_cast<std::size_t>(a)][i]))
                    throw std::invalid_argument("truncated reward block");
        } else if (section == "transition") {
            for (std::size_t i = 0; i < chain.size; ++i)
                for (std::size_t j = 0; j < chain.size; ++j)
                    if (!(is >> chain.transition[static_cast<std::size_t>(a)](i, j)))
                        throw std::invalid_argument("truncated transition block");
        } else {
            throw std::invalid_argument("unknown section '" + section + "'");
        }
    }
    return chain;
}

// |T V^pi - V^pi| per augmented state, both sides exact.
inline std::vector<double> bellman_error_map(const FiniteAugmentedChain& chain,
                                             const std::vector<int>& policy) {
    const std::vector<double> v = exact_policy_value(chain, policy);
    std::vector<double> err(chain.size, 0.0);
    for (std::size_t i = 0; i < chain.size; ++i) {
        double best = -1e300;
        for (int a = 0; a < chain.n_actions; ++a) best = std::max(best, backup(chain, i, a, v));
        err[i] = std::abs(best - v[i]);
    }
    return err;
}

} // namespace exomdp
