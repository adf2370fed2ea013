#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "exomdp/augmented.hpp"
#include "exomdp/event_process.hpp"
#include "exomdp/rng.hpp"

namespace exomdp {

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double x) {
    double a = std::fmod(x + kPi, 2.0 * kPi);
    if (a <= 0.0) a += 2.0 * kPi;
    return a - kPi;
}

// Torque-limited pendulum with the classic conventions (theta = 0 upright,
// explicit Euler at dt = 0.05, angular velocity clipped to +-8). Exogenous
// events inject extra torque: the injection is gain * sum_j echo[j] * mark_j
// over the most recent marks, so an event keeps pushing for echo.size()
// steps after it fires.
struct PendulumEnv {
    double mass = 1.0;
    double length = 1.0;
    double gravity = 10.0;
    double dt = 0.05;
    double torque_limit = 2.0;
    double velocity_limit = 8.0;

    double event_gain = 2.0;
    std::vector<double> echo{1.0, 1.0, 0.9, 0.7, 0.3};
    double event_torque_limit = 1.5; // saturation of the exogenous disturbance

    int event_window() const { return static_cast<int>(echo.size()); }

    // Quadratic cost rescaled so rewards land in [0, 1] without moving the
    // argmax: r = (cost_max - cost) / cost_max.
    double max_cost() const {
        return kPi * kPi + 0.1 * velocity_limit * velocity_limit + 0.001 * torque_limit * torque_limit;
    }

    double reward(double theta, double vel, double action) const {
        const double u = std::clamp(action, -torque_limit, torque_limit);
        const double a = wrap_angle(theta);
        const double cost = a * a + 0.1 * vel * vel + 0.001 * u * u;
        return (max_cost() - cost) / max_cost();
    }

    double event_torque(std::span<const double> window) const {
        double acc = 0.0;
        const std::size_t n = std::min(window.size(), echo.size());
        for (std::size_t j = 0; j < n; ++j) acc += echo[j] * window[j];
        return std::clamp(event_gain * acc, -event_torque_limit, event_torque_limit);
    }
};

struct PendulumState {
    double theta = kPi; // hanging down
    double vel = 0.0;
};

struct PendulumStepResult {
    PendulumState next;
    double reward = 0.0;
    int indicator = 0;
    double mark = 0.0;
};

// One control step: the event process advances first (it never sees the
// state or action), then physics runs under agent torque plus the event
// injection.
inline PendulumStepResult pendulum_step(const PendulumEnv& env, const PendulumState& st, double action,
                                        const HawkesParams& process, EventHistory& history, Rng& rng) {
    if (!std::isfinite(action)) throw std::invalid_argument("action must be finite");
    PendulumStepResult out;

    const EventStep ev = sample_step(process, history, rng);
    history.append(ev);
    out.indicator = ev.indicator;
    out.mark = ev.mark;

    const std::vector<double> window = history.recent_marks(env.echo.size());
    const double u = std::clamp(action, -env.torque_limit, env.torque_limit);
    const double torque = u + env.event_torque(window);

    out.reward = env.reward(st.theta, st.vel, u);

    const double acc = 3.0 * env.gravity / (2.0 * env.length) * std::sin(st.theta) +
                       3.0 / (env.mass * env.length * env.length) * torque;
    double vel2 = st.vel + acc * env.dt;
    vel2 = std::clamp(vel2, -env.velocity_limit, env.velocity_limit);
    out.next.vel = vel2;
    out.next.theta = wrap_angle(st.theta + vel2 * env.dt);
    return out;
}

// Deterministic energy-shaping swing-up with a linear balancing law near the
// top. Intentionally imperfect: torque saturates well below what holding an
// arbitrary angle would need.
struct SwingUpPolicy {
    double energy_gain = 1.0;
    double kp = 12.0;
    double kd = 5.0;
    double balance_angle = 0.8;
    double balance_velocity = 4.0;

    double operator()(const PendulumEnv& env, const PendulumState& st) const {
        const double theta = wrap_angle(st.theta);
        if (std::abs(theta) < balance_angle && std::abs(st.vel) < balance_velocity) {
            return std::clamp(-kp * theta - kd * st.vel, -env.torque_limit, env.torque_limit);
        }
        const double inertia = env.mass * env.length * env.length / 3.0;
        const double e = 0.5 * inertia * st.vel * st.vel +
                         env.mass * env.gravity * env.length / 2.0 * std::cos(theta);
        const double e_top = env.mass * env.gravity * env.length / 2.0;
        const double sign = st.vel >= 0.0 ? 1.0 : -1.0;
        return std::clamp(energy_gain * (e_top - e) * sign, -env.torque_limit, env.torque_limit);
    }
};

// Stub history whose steps reproduce the given marks (newest first); lets a
// window be treated as the whole event context, i.e. the truncated process.
inline EventHistory history_from_marks(std::span<const double> marks_newest_first) {
    EventHistory h;
    for (std::size_t i = marks_newest_first.size(); i-- > 0;) {
        const double m = marks_newest_first[i];
        h.append({m != 0.0 ? 1 : 0, m});
    }
    return h;
}

// Rollout state for the perturbed pendulum.
class PendulumSimulator {
public:
    PendulumSimulator(PendulumEnv env, HawkesParams process) : env_(env), process_(process) {
        process_.validate();
    }

    const PendulumEnv& env() const { return env_; }
    const HawkesParams& process() const { return process_; }
    const PendulumState& state() const { return state_; }
    const EventHistory& history() const { return history_; }

    void reset(std::uint64_t seed) {
        rng_ = Rng(seed);
        state_.theta = rng_.uniform(-kPi, kPi);
        state_.vel = rng_.uniform(-1.0, 1.0);
        history_ = EventHistory();
    }

    // Restart dynamics from a snapshot (state + event history) with a fresh
    // random stream; used by ground-truth rollouts.
    void restore(const PendulumState& st, const EventHistory& history, std::uint64_t seed) {
        rng_ = Rng(seed);
        state_ = st;
        history_ = history;
    }

    PendulumStepResult step(double action) {
        PendulumStepResult res = pendulum_step(env_, state_, action, process_, history_, rng_);
        state_ = res.next;
        return res;
    }

    AugmentedState augmented(long long T) const {
        return truncate(history_, {state_.theta, state_.vel}, T);
    }

private:
    PendulumEnv env_;
    HawkesParams process_;
    PendulumState state_{};
    EventHistory history_;
    Rng rng_{0};
};

// Uniform torque grid over [-limit, limit].
inline std::vector<double> torque_grid(double limit, int points = 17) {
    if (points < 1) throw std::invalid_argument("empty action grid");
    std::vector<double> grid;
    if (points == 1) {
        grid.push_back(0.0);
        return grid;
    }
    for (int i = 0; i < points; ++i)
        grid.push_back(-limit + 2.0 * limit * static_cast<double>(i) / (points - 1));
    return grid;
}

// Greedy one-step lookahead over a torque grid against a value estimate on
// truncated states. The lookahead treats the visible window (plus zeros) as
// the whole event context; expectations are small Monte Carlo averages with
// a decision-local seed, so the induced policy is deterministic. Ties break
// toward the lowest grid index.
struct GreedyGridPolicy {
    PendulumEnv env;
    HawkesParams process;
    std::vector<double> grid;
    std::function<double(const AugmentedState&)> value;
    long long T = 5;
    int samples = 8;
    double gamma = 0.95;
    std::uint64_t seed = 0;

    double operator()(const PendulumState& st, std::span<const double> window) const {
        const std::vector<double> visible(window.begin(),
                                          window.begin() + std::min<std::size_t>(window.size(),
                                                                                 static_cast<std::size_t>(T) + 1));
        double best = -1e300;
        double best_action = grid.at(0);
        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            const double a = grid[gi];
            double acc = 0.0;
            for (int k = 0; k < samples; ++k) {
                Rng rng(seed ^ (0x51ull * (gi + 1)) ^ (0x9e3779b97f4a7c15ull * (k + 1)));
                EventHistory h = history_from_marks(visible);
                PendulumStepResult res = pendulum_step(env, st, a, process, h, rng);
                AugmentedState aug = truncate(h, {res.next.theta, res.next.vel}, T);
                acc += res.reward + gamma * value(aug);
            }
            const double q = acc / samples;
            if (q > best) {
                best = q;
                best_action = a;
            }
        }
        return best_action;
    }
};

} // namespace exomdp
