#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "exomdp/decay_kernel.hpp"
#include "exomdp/numerics.hpp"
#include "exomdp/rng.hpp"

namespace exomdp {

// One realized step of the event process. A non-event carries mark exactly 0.
struct EventStep {
    int indicator = 0;
    double mark = 0.0;
};

// Ordered record of events for time steps 1..length().
class EventHistory {
public:
    EventHistory() = default;

    void append(EventStep step) {
        if (step.indicator != 0 && step.indicator != 1)
            throw std::invalid_argument("event indicator must be 0 or 1");
        if (!std::isfinite(step.mark)) throw std::invalid_argument("event mark must be finite");
        if (step.indicator == 0 && step.mark != 0.0)
            throw std::invalid_argument("non-event steps must carry mark 0");
        steps_.push_back(step);
    }

    std::size_t length() const { return steps_.size(); }
    bool empty() const { return steps_.empty(); }
    const EventStep& at_time(std::size_t t) const { return steps_.at(t - 1); } // t in 1..length
    std::span<const EventStep> steps() const { return steps_; }

    // Most recent `count` marks, newest first, zero-padded to `count`.
    std::vector<double> recent_marks(std::size_t count) const {
        std::vector<double> out(count, 0.0);
        const std::size_t n = std::min(count, steps_.size());
        for (std::size_t i = 0; i < n; ++i) out[i] = steps_[steps_.size() - 1 - i].mark;
        return out;
    }

    // Copy holding only the most recent `count` steps; enough context for any
    // consumer whose kernels look back at most `count` lags.
    EventHistory tail_copy(std::size_t count) const {
        EventHistory out;
        const std::size_t n = std::min(count, steps_.size());
        out.steps_.assign(steps_.end() - static_cast<std::ptrdiff_t>(n), steps_.end());
        return out;
    }

private:
    std::vector<EventStep> steps_;
};

// Parameters of the discrete-time marked self-exciting process: Bernoulli
// event indicators with intensity fed by decayed past events, Gaussian marks
// whose mean is fed by decayed past marks.
struct HawkesParams {
    double base_intensity = 0.0;         // alpha_0
    DecayKernel excitation;              // alpha_t, t >= 1
    DecayKernel mark_coupling;           // beta_t, t >= 1
    double mark_std = 1.0;
    int horizon_cap = 64;                // kernel support truncated past this lag

    void validate() const {
        if (!(base_intensity >= 0.0) || !(base_intensity <= 1.0) || !std::isfinite(base_intensity))
            throw std::invalid_argument("base intensity must lie in [0, 1]");
        if (!(mark_std > 0.0)) throw std::invalid_argument("mark_std must be positive");
        if (horizon_cap < 1) throw std::invalid_argument("horizon_cap must be >= 1");
        for (long long t = 1; t <= std::min(horizon_cap, 4); ++t) {
            if (!std::isfinite(excitation.at(t)) || !std::isfinite(mark_coupling.at(t)))
                throw std::invalid_argument("kernel values must be finite");
        }
    }

    // True iff the unclamped intensity can never exceed 1.
    bool stable() const {
        if (!excitation.summable()) return false;
        return base_intensity + excitation.total_sum() <= 1.0 + 1e-15;
    }

    // Mass of the excitation kernel discarded by the horizon cap, so tests can
    // bound the effect of O(1)-per-step truncation.
    double truncation_residue() const {
        return excitation.summable() ? excitation.tail_exact(horizon_cap)
                                     : std::numeric_limits<double>::infinity();
    }
};

// Event probability for the step following `history`:
// clamp(alpha_0 + sum_{lag <= cap} alpha_lag * E_{t-lag}, 0, 1).
inline double intensity(const HawkesParams& params, const EventHistory& history) {
    double p = params.base_intensity;
    const std::size_t n = history.length();
    const std::size_t lags = std::min<std::size_t>(n, static_cast<std::size_t>(params.horizon_cap));
    for (std::size_t lag = 1; lag <= lags; ++lag) {
        const EventStep& s = history.at_time(n + 1 - lag);
        if (s.indicator) {
            const double a = params.excitation.at(static_cast<long long>(lag));
            if (!std::isfinite(a)) throw std::invalid_argument("non-finite excitation kernel value");
            p += a;
        }
    }
    return std::clamp(p, 0.0, 1.0);
}

// Conditional mark mean: sum_{lag <= cap} beta_lag * E_{t-lag} * X_{t-lag}.
inline double mark_mean(const HawkesParams& params, const EventHistory& history) {
    double m = 0.0;
    const std::size_t n = history.length();
    const std::size_t lags = std::min<std::size_t>(n, static_cast<std::size_t>(params.horizon_cap));
    for (std::size_t lag = 1; lag <= lags; ++lag) {
        const EventStep& s = history.at_time(n + 1 - lag);
        if (s.indicator) {
            const double b = params.mark_coupling.at(static_cast<long long>(lag));
            if (!std::isfinite(b)) throw std::invalid_argument("non-finite coupling kernel value");
            m += b * s.mark;
        }
    }
    return m;
}

// Draws the next (indicator, mark). The history is not mutated; the caller
// appends the step if it wants to extend the path.
inline EventStep sample_step(const HawkesParams& params, const EventHistory& history, Rng& rng) {
    EventStep out;
    const double p = intensity(params, history);
    out.indicator = rng.bernoulli(p) ? 1 : 0;
    out.mark = out.indicator ? rng.normal(mark_mean(params, history), params.mark_std) : 0.0;
    return out;
}

// Analytic bound N_T = alpha_T + erf(beta_T / (2 sqrt 2)) on the total
// variation a single event T steps old induces in the next-mark law.
inline double mark_tv_bound(const HawkesParams& params, long long T) {
    if (T < 1) throw std::invalid_argument("mark_tv_bound requires T >= 1");
    const double a = params.excitation.at(T);
    const double b = params.mark_coupling.at(T);
    if (!std::isfinite(a) || !std::isfinite(b)) throw std::invalid_argument("non-finite kernel value");
    return a + exomdp::erf(b / (2.0 * std::sqrt(2.0)));
}

inline EventHistory rollout_events(const HawkesParams& params, std::size_t length, std::uint64_t seed) {
    Rng rng(seed);
    EventHistory h;
    for (std::size_t t = 0; t < length; ++t) h.append(sample_step(params, h, rng));
    return h;
}

// Deterministic binned estimator of the next-mark law: 201 equal-width bins
// on [-8, 8], out-of-range mass lumped into the edge bins.
struct MarkHistogram {
    static constexpr int kBins = 201;
    static constexpr double kLo = -8.0;
    static constexpr double kHi = 8.0;

    std::vector<double> density = std::vector<double>(kBins, 0.0);
    std::size_t count = 0;

    void add(double mark) {
        const double width = (kHi - kLo) / kBins;
        int bin = static_cast<int>(std::floor((mark - kLo) / width));
        bin = std::clamp(bin, 0, kBins - 1);
        density[static_cast<std::size_t>(bin)] += 1.0;
        ++count;
    }

    static double tv(const MarkHistogram& a, const MarkHistogram& b) {
        if (a.count == 0 || b.count == 0) throw std::invalid_argument("empty histogram");
        double acc = 0.0;
        for (int i = 0; i < kBins; ++i)
            acc += std::abs(a.density[static_cast<std::size_t>(i)] / static_cast<double>(a.count) -
                            b.density[static_cast<std::size_t>(i)] / static_cast<double>(b.count));
        return 0.5 * acc;
    }
};

// Empirical TV distance between next-mark laws after two histories, from
// `samples` paired draws per side.
inline double empirical_next_mark_tv(const HawkesParams& params, const EventHistory& h1,
                                     const EventHistory& h2, std::size_t samples, std::uint64_t seed) {
    MarkHistogram a, b;
    Rng rng(seed);
    for (std::size_t i = 0; i < samples; ++i) a.add(sample_step(params, h1, rng).mark);
    for (std::size_t i = 0; i < samples; ++i) b.add(sample_step(params, h2, rng).mark);
    return MarkHistogram::tv(a, b);
}

} // namespace exomdp
