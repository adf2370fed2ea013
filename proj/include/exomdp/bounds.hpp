#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "exomdp/decay_kernel.hpp"

namespace exomdp {

// The pair of influence series: M_t bounds the TV disturbance an event t
// steps old induces in the transition kernel, N_t the disturbance in the
// event-mark law.
struct DecaySpec {
    DecayKernel m_kernel;
    DecayKernel n_kernel;

    void validate() const {
        if (!m_kernel.summable() || !n_kernel.summable())
            throw std::invalid_argument("influence series must be summable");
    }
};

// Exponential beta-mixing envelope: beta_i <= beta_bar * exp(-b i^kappa).
struct MixingParams {
    double beta_bar = 1.0;
    double b = 1.0;
    double kappa = 1.0;

    void validate() const {
        if (!(beta_bar >= 0.0)) throw std::invalid_argument("beta_bar must be >= 0");
        if (!(b > 0.0)) throw std::invalid_argument("b must be positive");
        if (!(kappa > 0.0) || !(kappa <= 1.0)) throw std::invalid_argument("kappa must lie in (0, 1]");
    }
};

struct LstdBoundInputs {
    std::uint64_t N = 0;       // sample count
    std::size_t d = 1;         // feature dimension
    double L = 1.0;            // sup bound on each basis function
    double gamma = 0.9;
    double delta = 0.05;
    double nu = 1.0;           // Gram eigenvalue lower bound
    double omega = 1.0;        // population Gram smallest eigenvalue
    double alpha_star_norm = 1.0;
    double inherent_error = 0.0;

    void validate() const {
        if (N == 0) throw std::invalid_argument("N must be positive");
        if (d < 1) throw std::invalid_argument("d must be >= 1");
        if (!(delta > 0.0) || !(delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
        if (!(gamma > 0.0) || !(gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
        if (!(nu > 0.0)) throw std::invalid_argument("nu must be positive");
    }
};

// Named term values backing a bound, for reports.
struct BoundBreakdown {
    std::vector<std::pair<std::string, double>> terms;
    double total = 0.0;
};

struct TailSum {
    double exact = 0.0;          // sum_{t > T} kernel(t)
    double integral_bound = 0.0; // (c/lambda) e^{-lambda T} for exponential kernels
};

inline TailSum tail_sum(const DecayKernel& kernel, long long T) {
    TailSum out;
    out.exact = kernel.tail_exact(T);
    out.integral_bound = kernel.tail_integral_bound(T);
    return out;
}

// Combined tail sum_{t > T} (M_t + N_t) entering every bound below.
inline double combined_tail(const DecaySpec& spec, long long T) {
    return spec.m_kernel.tail_exact(T) + spec.n_kernel.tail_exact(T);
}

struct HorizonResult {
    long long T = 0;
    bool feasible = true;
};

// Smallest window T with both tails below epsilon (1-gamma)^2 / 4, the
// horizon that guarantees an epsilon-suboptimal finite-history policy.
inline HorizonResult horizon_for_epsilon(const DecaySpec& spec, double gamma, double epsilon,
                                         long long cap = 1'000'000) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    if (!(gamma > 0.0) || !(gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
    const double threshold = epsilon * (1.0 - gamma) * (1.0 - gamma) / 4.0;
    for (long long T = 0; T <= cap; ++T) {
        if (spec.m_kernel.tail_exact(T) < threshold && spec.n_kernel.tail_exact(T) < threshold)
            return {T, true};
    }
    return {cap, false};
}

// 2 / (1-gamma)^2 * tail: value loss of the best window-T policy.
inline double suboptimality_epsilon(const DecaySpec& spec, double gamma, long long T) {
    const double g = 1.0 - gamma;
    return 2.0 / (g * g) * combined_tail(spec, T);
}

// 1 / (1-gamma)^2 * tail: value gap from zeroing events older than T.
inline double state_cropping_bound(const DecaySpec& spec, double gamma, long long T) {
    const double g = 1.0 - gamma;
    return 1.0 / (g * g) * combined_tail(spec, T);
}

// (2 + 5 gamma) / (1-gamma)^2 * tail: largest possible per-iteration value
// decrease of approximate policy iteration.
inline double policy_improvement_slack(const DecaySpec& spec, double gamma, long long T) {
    const double g = 1.0 - gamma;
    return (2.0 + 5.0 * gamma) / (g * g) * combined_tail(spec, T);
}

// 11 / (1-gamma)^3 * tail: Bellman-error level below which improvement is
// not guaranteed.
inline double bellman_error_threshold(const DecaySpec& spec, double gamma, long long T) {
    const double g = 1.0 - gamma;
    return 11.0 / (g * g * g) * combined_tail(spec, T);
}

// ceil( (1/b ln(2 e beta_bar N / delta))^{1/kappa} ) samples discarded for
// chain burn-in; zero when the chain has no mixing envelope mass.
inline long long burn_in_length(std::uint64_t N, double delta, const MixingParams& mixing) {
    if (mixing.beta_bar == 0.0) return 0;
    const double arg = 2.0 * std::exp(1.0) * mixing.beta_bar * static_cast<double>(N) / delta;
    const double ln = std::log(arg);
    if (ln <= 0.0) return 0;
    return static_cast<long long>(std::ceil(std::pow(ln / mixing.b, 1.0 / mixing.kappa)));
}

namespace detail {

// ln max(16 (6e)^{2(d+1)}, beta_bar), computed in log space so large d does
// not overflow; the ln+ clamp at zero is applied by the caller via std::max.
inline double log_capacity_term(double front_constant, std::size_t d, double beta_bar) {
    const double log_cap = std::log(front_constant) +
                           2.0 * (static_cast<double>(d) + 1.0) * std::log(6.0 * std::exp(1.0));
    const double log_beta = beta_bar > 0.0 ? std::log(beta_bar) : -1e300;
    return std::max(log_cap, log_beta);
}

inline double lambda1(std::uint64_t N, std::size_t d, double delta, double beta_bar) {
    return 2.0 * (static_cast<double>(d) + 1.0) * std::log(static_cast<double>(N)) +
           std::log(std::exp(1.0) / delta) + std::max(0.0, log_capacity_term(16.0, d, beta_bar));
}

inline double lambda2(std::uint64_t N, double delta, double beta_bar) {
    return std::log(std::exp(1.0) / delta) +
           std::log(std::max(6.0, static_cast<double>(N) * beta_bar));
}

// Variant used by the Gram eigenvalue bound (front constant 18, not 16; both
// constants appear in the analysis and each is used where it applies).
inline double lambda_gram(std::uint64_t N, std::size_t d, double delta, double beta_bar) {
    return 2.0 * (static_cast<double>(d) + 1.0) * std::log(static_cast<double>(N)) +
           std::log(std::exp(1.0) / delta) + std::max(0.0, log_capacity_term(18.0, d, beta_bar));
}

inline double mixing_radius(double lambda, std::uint64_t N, const MixingParams& mixing) {
    return std::sqrt(2.0 * lambda / static_cast<double>(N) *
                     std::pow(std::max(lambda / mixing.b, 1.0), 1.0 / mixing.kappa));
}

} // namespace detail

struct MixingEpsilons {
    double eps1 = 0.0;
    double eps2 = 0.0;
};

// Generalization error terms for beta-mixing chains. The failure probability
// delta is split as delta/4 inside each capacity term, matching the way the
// two generalization events are combined in the evaluation-error bound.
inline MixingEpsilons mixing_epsilons(std::uint64_t N, std::size_t d, double delta,
                                      const MixingParams& mixing, double L, double gamma,
                                      double alpha_star_norm) {
    mixing.validate();
    if (N == 0) throw std::invalid_argument("N must be positive");
    const double l1 = detail::lambda1(N, d, delta / 4.0, mixing.beta_bar);
    const double l2 = detail::lambda2(N, delta / 4.0, mixing.beta_bar);
    MixingEpsilons out;
    out.eps1 = 24.0 / (1.0 - gamma) * detail::mixing_radius(l1, N, mixing);
    out.eps2 = 12.0 * (1.0 / (1.0 - gamma) + L * alpha_star_norm) * detail::mixing_radius(l2, N, mixing);
    return out;
}

struct GramEigenvalueBound {
    double nu = 0.0;      // (sqrt(omega)/2 - 6 L r)^2, clamped at 0
    bool feasible = false; // sample-size condition N > 288 L^2 Lambda / omega * ...
};

inline GramEigenvalueBound gram_eigenvalue_lower_bound(double omega, std::uint64_t N, std::size_t d,
                                                       double delta, const MixingParams& mixing,
                                                       double L) {
    mixing.validate();
    if (!(omega > 0.0)) throw std::invalid_argument("omega must be positive");
    const double lambda = detail::lambda_gram(N, d, delta, mixing.beta_bar);
    const double r = detail::mixing_radius(lambda, N, mixing);
    const double root = std::sqrt(omega) / 2.0 - 6.0 * L * r;
    GramEigenvalueBound out;
    out.nu = root > 0.0 ? root * root : 0.0;
    out.feasible = static_cast<double>(N) > 288.0 * L * L * lambda / omega *
                                             std::pow(std::max(lambda / mixing.b, 1.0), 1.0 / mixing.kappa);
    return out;
}

// High-probability bound on || V_tilde - V ||_rho for clipped pathwise LSTD
// on the truncated window: truncation + inherent approximation error, the
// sample stochastic term, and the two mixing generalization terms.
inline BoundBreakdown lstd_expected_error_breakdown(const LstdBoundInputs& in, const DecaySpec& spec,
                                                    long long T, const MixingParams& mixing) {
    in.validate();
    const double gamma = in.gamma;
    const double one_minus_g2 = 1.0 - gamma * gamma;
    const double tail = combined_tail(spec, T);

    const double approx = 4.0 * std::sqrt(2.0) / std::sqrt(one_minus_g2) *
                          (3.0 / one_minus_g2 * tail + in.inherent_error);
    const double stochastic =
        2.0 * in.L / ((1.0 - gamma) * (1.0 - gamma)) *
        std::sqrt(static_cast<double>(in.d) / in.nu) *
        (std::sqrt(2.0 * std::log(8.0 * static_cast<double>(in.d) / in.delta) / static_cast<double>(in.N)) +
         1.0 / static_cast<double>(in.N));
    const MixingEpsilons eps = mixing_epsilons(in.N, in.d, in.delta, mixing, in.L, gamma,
                                               in.alpha_star_norm);

    BoundBreakdown out;
    out.terms = {{"truncation_tail", tail},
                 {"approximation_term", approx},
                 {"stochastic_term", stochastic},
                 {"eps1", eps.eps1},
                 {"eps2", eps.eps2}};
    out.total = approx + stochastic + eps.eps1 + 2.0 * std::sqrt(2.0) * eps.eps2;
    return out;
}

inline double lstd_expected_error_bound(const LstdBoundInputs& in, const DecaySpec& spec, long long T,
                                        const MixingParams& mixing) {
    return lstd_expected_error_breakdown(in, spec, T, mixing).total;
}

// Every bound this module computes, as named (term, value) rows; the CLI
// renders this and experiment reports can embed it.
inline std::vector<std::pair<std::string, double>> bound_table(const DecaySpec& spec, double gamma,
                                                               long long T, double epsilon,
                                                               const LstdBoundInputs& lstd_in,
                                                               const MixingParams& mixing) {
    const TailSum tm = tail_sum(spec.m_kernel, T);
    const TailSum tn = tail_sum(spec.n_kernel, T);
    const HorizonResult hor = horizon_for_epsilon(spec, gamma, epsilon);
    const MixingEpsilons eps =
        mixing_epsilons(lstd_in.N, lstd_in.d, lstd_in.delta, mixing, lstd_in.L, gamma,
                        lstd_in.alpha_star_norm);
    const GramEigenvalueBound gram =
        gram_eigenvalue_lower_bound(lstd_in.omega, lstd_in.N, lstd_in.d, lstd_in.delta, mixing,
                                    lstd_in.L);
    const BoundBreakdown lstd = lstd_expected_error_breakdown(lstd_in, spec, T, mixing);

    std::vector<std::pair<std::string, double>> rows = {
        {"tail_M_exact", tm.exact},
        {"tail_M_integral_bound", tm.integral_bound},
        {"tail_N_exact", tn.exact},
        {"tail_N_integral_bound", tn.integral_bound},
        {"horizon_for_epsilon", static_cast<double>(hor.T)},
        {"horizon_feasible", hor.feasible ? 1.0 : 0.0},
        {"suboptimality_epsilon", suboptimality_epsilon(spec, gamma, T)},
        {"state_cropping_bound", state_cropping_bound(spec, gamma, T)},
        {"policy_improvement_slack", policy_improvement_slack(spec, gamma, T)},
        {"bellman_error_threshold", bellman_error_threshold(spec, gamma, T)},
        {"burn_in_length", static_cast<double>(burn_in_length(lstd_in.N, lstd_in.delta, mixing))},
        {"eps1", eps.eps1},
        {"eps2", eps.eps2},
        {"gram_nu_lower_bound", gram.nu},
        {"gram_sample_size_feasible", gram.feasible ? 1.0 : 0.0},
    };
    for (const auto& term : lstd.terms) rows.emplace_back("lstd_" + term.first, term.second);
    rows.emplace_back("lstd_expected_error_bound", lstd.total);
    return rows;
}

} // namespace exomdp
