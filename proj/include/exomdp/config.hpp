#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "exomdp/decay_kernel.hpp"
#include "exomdp/event_process.hpp"

namespace exomdp {

// Plain-text key/value configuration: one `key = value` pair per line,
// '#' starts a comment, keys are dotted paths. Values are free-form text
// interpreted by the typed getters.
class Config {
public:
    Config() = default;

    static Config parse(const std::string& text) {
        Config cfg;
        std::istringstream is(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const std::size_t eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("config line " + std::to_string(lineno) + ": missing '='");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
            cfg.entries_[key] = value;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        try {
            return std::stod(it->second);
        } catch (const std::exception&) {
            throw std::invalid_argument("config key '" + key + "': bad number '" + it->second + "'");
        }
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        try {
            return std::stoll(it->second);
        } catch (const std::exception&) {
            throw std::invalid_argument("config key '" + key + "': bad integer '" + it->second + "'");
        }
    }

    std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        std::vector<double> out;
        std::istringstream is(it->second);
        double v;
        while (is >> v) out.push_back(v);
        if (out.empty()) throw std::invalid_argument("config key '" + key + "': empty list");
        return out;
    }

    std::vector<long long> get_ints(const std::string& key, std::vector<long long> fallback) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        std::vector<long long> out;
        std::istringstream is(it->second);
        long long v;
        while (is >> v) out.push_back(v);
        if (out.empty()) throw std::invalid_argument("config key '" + key + "': empty list");
        return out;
    }

    DecayKernel get_kernel(const std::string& key, const DecayKernel& fallback) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? fallback : parse_kernel(it->second);
    }

    void set(const std::string& key, const std::string& value) { entries_[key] = value; }

    // Deterministic ordered dump (keys sorted by the map).
    std::string serialize() const {
        std::ostringstream os;
        for (const auto& [k, v] : entries_) os << k << " = " << v << "\n";
        return os.str();
    }

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    static std::string trim(const std::string& s) {
        const std::size_t b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const std::size_t e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> entries_;
};

// Event-process block shared by several subcommands.
inline HawkesParams hawkes_from_config(const Config& cfg) {
    HawkesParams p;
    p.base_intensity = cfg.get_double("hawkes.base_intensity", 0.2);
    p.excitation = cfg.get_kernel("hawkes.excitation", DecayKernel::exponential(1.0, 1.0));
    p.mark_coupling = cfg.get_kernel("hawkes.mark_coupling", DecayKernel::polynomial(1.0, 2.0));
    p.mark_std = cfg.get_double("hawkes.mark_std", 1.0);
    p.horizon_cap = static_cast<int>(cfg.get_int("hawkes.horizon_cap", 64));
    p.validate();
    return p;
}

inline std::string hawkes_to_config(const HawkesParams& p) {
    std::ostringstream os;
    os << "hawkes.base_intensity = " << p.base_intensity << "\n";
    os << "hawkes.excitation = " << p.excitation.describe() << "\n";
    os << "hawkes.mark_coupling = " << p.mark_coupling.describe() << "\n";
    os << "hawkes.mark_std = " << p.mark_std << "\n";
    os << "hawkes.horizon_cap = " << p.horizon_cap << "\n";
    return os.str();
}

} // namespace exomdp
