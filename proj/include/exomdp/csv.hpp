#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "exomdp/event_process.hpp"
#include "exomdp/lstd.hpp"

namespace exomdp {

// Shortest round-trip decimal form; the same bytes for the same double on
// every run, which is what the determinism guarantees lean on.
inline std::string format_double(double v) {
    char buf[40] = {};
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    return out;
}

inline double parse_double(const std::string& s) {
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw std::invalid_argument("bad numeric cell '" + s + "'");
    }
}

// Event history export: one row per time step, columns (t, indicator, mark).
inline void write_history_csv(std::ostream& os, const EventHistory& history) {
    os << "t,indicator,mark\n";
    std::size_t t = 1;
    for (const EventStep& s : history.steps()) {
        os << t++ << "," << s.indicator << "," << format_double(s.mark) << "\n";
    }
}

inline EventHistory read_history_csv(std::istream& is) {
    EventHistory h;
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("empty history file");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != 3) throw std::invalid_argument("history row needs 3 columns");
        EventStep s;
        s.indicator = static_cast<int>(parse_double(cells[1]));
        s.mark = parse_double(cells[2]);
        h.append(s);
    }
    return h;
}

// One trajectory row: time, state coordinates, action, reward, event fields.
struct TrajectoryRow {
    std::size_t t = 0;
    std::vector<double> state;
    double action = 0.0;
    double reward = 0.0;
    int indicator = 0;
    double mark = 0.0;
};

inline void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRow>& rows,
                                 const std::vector<std::string>& state_names) {
    os << "t";
    for (const std::string& n : state_names) os << "," << n;
    os << ",action,reward,indicator,mark\n";
    for (const TrajectoryRow& r : rows) {
        os << r.t;
        for (double v : r.state) os << "," << format_double(v);
        os << "," << format_double(r.action) << "," << format_double(r.reward) << "," << r.indicator
           << "," << format_double(r.mark) << "\n";
    }
}

inline std::vector<TrajectoryRow> read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("empty trajectory file");
    const std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 5) throw std::invalid_argument("trajectory header too short");
    const std::size_t state_dims = header.size() - 5;

    std::vector<TrajectoryRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size()) throw std::invalid_argument("ragged trajectory row");
        TrajectoryRow r;
        r.t = static_cast<std::size_t>(parse_double(cells[0]));
        for (std::size_t i = 0; i < state_dims; ++i) r.state.push_back(parse_double(cells[1 + i]));
        r.action = parse_double(cells[1 + state_dims]);
        r.reward = parse_double(cells[2 + state_dims]);
        r.indicator = static_cast<int>(parse_double(cells[3 + state_dims]));
        r.mark = parse_double(cells[4 + state_dims]);
        rows.push_back(std::move(r));
    }
    return rows;
}

// Rebuilds the truncated-state sample path the pathwise estimator consumes:
// the window for row t holds the marks of rows t-1, t-2, ... (events strictly
// before the step), zero-padded at the start.
inline SamplePath sample_path_from_trajectory(const std::vector<TrajectoryRow>& rows, long long T) {
    if (T < 0) throw std::invalid_argument("window horizon T must be >= 0");
    SamplePath path;
    path.policy_id = "ingested";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<double> flat = rows[i].state;
        for (long long j = 0; j <= T; ++j) {
            const long long src = static_cast<long long>(i) - 1 - j;
            flat.push_back(src >= 0 ? rows[static_cast<std::size_t>(src)].mark : 0.0);
        }
        path.states.push_back(std::move(flat));
        path.rewards.push_back(rows[i].reward);
    }
    return path;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << content;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

} // namespace exomdp
