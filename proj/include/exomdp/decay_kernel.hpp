#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "exomdp/numerics.hpp"

namespace exomdp {

// Non-negative, non-increasing influence sequence over lags t = 1, 2, ...
// Three parametric families; exponential and polynomial tails have closed or
// near-closed forms, tabulated kernels are finite literal sums.
struct DecayKernel {
    enum class Kind { exponential, polynomial, tabulated };

    Kind kind = Kind::tabulated;
    double c = 0.0;      // scale (exponential, polynomial)
    double rate = 1.0;   // lambda (exponential) or p (polynomial)
    std::vector<double> values; // tabulated entries for lags 1..values.size()

    static DecayKernel exponential(double c, double lambda) {
        if (!(c >= 0.0) || !(lambda > 0.0) || !std::isfinite(c) || !std::isfinite(lambda))
            throw std::invalid_argument("exponential kernel needs c >= 0, lambda > 0");
        DecayKernel k;
        k.kind = Kind::exponential;
        k.c = c;
        k.rate = lambda;
        return k;
    }

    static DecayKernel polynomial(double c, double p) {
        if (!(c >= 0.0) || !(p > 0.0) || !std::isfinite(c) || !std::isfinite(p))
            throw std::invalid_argument("polynomial kernel needs c >= 0, p > 0");
        DecayKernel k;
        k.kind = Kind::polynomial;
        k.c = c;
        k.rate = p;
        return k;
    }

    static DecayKernel tabulated(std::vector<double> vals) {
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (!std::isfinite(vals[i]) || vals[i] < 0.0)
                throw std::invalid_argument("tabulated kernel entries must be finite and non-negative");
            if (i > 0 && vals[i] > vals[i - 1])
                throw std::invalid_argument("tabulated kernel entries must be non-increasing");
        }
        DecayKernel k;
        k.kind = Kind::tabulated;
        k.values = std::move(vals);
        return k;
    }

    static DecayKernel zero() { return tabulated({}); }

    // Kernel value at integer lag t >= 1; zero outside the tabulated support.
    double at(long long t) const {
        if (t < 1) throw std::invalid_argument("kernel lag must be >= 1");
        switch (kind) {
        case Kind::exponential: return c * std::exp(-rate * static_cast<double>(t));
        case Kind::polynomial: return c / (1.0 + std::pow(static_cast<double>(t), rate));
        case Kind::tabulated:
            return static_cast<std::size_t>(t) <= values.size() ? values[static_cast<std::size_t>(t) - 1] : 0.0;
        }
        return 0.0;
    }

    bool summable() const {
        switch (kind) {
        case Kind::exponential: return true;
        case Kind::polynomial: return rate > 1.0;
        case Kind::tabulated: return true;
        }
        return false;
    }

    // sum_{t >= 1} at(t); +inf for a non-summable polynomial kernel.
    double total_sum() const {
        if (!summable()) return std::numeric_limits<double>::infinity();
        return tail_exact(0);
    }

    // Exact value of sum_{t >= T+1} at(t) (numeric-to-convergence for the
    // polynomial family, geometric closed form for the exponential one).
    double tail_exact(long long T) const {
        if (T < 0) throw std::invalid_argument("tail start must be >= 0");
        switch (kind) {
        case Kind::exponential: {
            const double q = std::exp(-rate);
            return c * std::pow(q, static_cast<double>(T + 1)) / (1.0 - q);
        }
        case Kind::polynomial:
            if (!summable()) throw std::invalid_argument("polynomial kernel with p <= 1 has no finite tail");
            return polynomial_tail_sum(c, rate, T);
        case Kind::tabulated: {
            KahanSum s;
            for (std::size_t i = values.size(); i > static_cast<std::size_t>(std::max<long long>(T, 0)); --i)
                s.add(values[i - 1]);
            return s.value();
        }
        }
        return 0.0;
    }

    // The integral-comparison upper bound (c/lambda) e^{-lambda T} used in the
    // worked error analysis; dominates tail_exact for exponential kernels.
    // Other families fall back to the exact tail.
    double tail_integral_bound(long long T) const {
        if (kind == Kind::exponential) return c / rate * std::exp(-rate * static_cast<double>(T));
        return tail_exact(T);
    }

    std::string describe() const {
        std::ostringstream os;
        os.precision(17);
        switch (kind) {
        case Kind::exponential: os << "exponential " << c << " " << rate; break;
        case Kind::polynomial: os << "polynomial " << c << " " << rate; break;
        case Kind::tabulated:
            os << "tabulated";
            for (double v : values) os << " " << v;
            break;
        }
        return os.str();
    }
};

// Parses the textual kernel syntax used by config files:
//   "exponential <c> <lambda>" | "polynomial <c> <p>" | "tabulated v1 v2 ..." | "zero"
inline DecayKernel parse_kernel(const std::string& text) {
    std::istringstream is(text);
    std::string kind;
    is >> kind;
    if (kind == "zero") return DecayKernel::zero();
    if (kind == "exponential" || kind == "polynomial") {
        double c = 0.0, r = 0.0;
        if (!(is >> c >> r)) throw std::invalid_argument("kernel '" + text + "': expected two parameters");
        return kind == "exponential" ? DecayKernel::exponential(c, r) : DecayKernel::polynomial(c, r);
    }
    if (kind == "tabulated") {
        std::vector<double> vals;
        double v;
        while (is >> v) vals.push_back(v);
        return DecayKernel::tabulated(std::move(vals));
    }
    throw std::invalid_argument("unknown kernel kind '" + kind + "'");
}

} // namespace exomdp
