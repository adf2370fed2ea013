#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "exomdp/event_process.hpp"

namespace exomdp {

// Environment state paired with the most recent T+1 event marks, newest
// first, zero-padded. This is the truncated view of the infinite augmented
// state that window policies and value features operate on.
struct AugmentedState {
    std::vector<double> state;
    std::vector<double> window;
};

inline AugmentedState truncate(const EventHistory& history, std::vector<double> state, long long T) {
    if (T < 0) throw std::invalid_argument("window horizon T must be >= 0");
    AugmentedState out;
    out.state = std::move(state);
    out.window = history.recent_marks(static_cast<std::size_t>(T) + 1);
    return out;
}

// Flat feature input: state coordinates followed by the window marks.
inline std::vector<double> flatten(const AugmentedState& aug) {
    std::vector<double> x;
    x.reserve(aug.state.size() + aug.window.size());
    x.insert(x.end(), aug.state.begin(), aug.state.end());
    x.insert(x.end(), aug.window.begin(), aug.window.end());
    return x;
}

} // namespace exomdp
