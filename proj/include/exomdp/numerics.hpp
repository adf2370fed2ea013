#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace exomdp {

inline constexpr double kPi = 3.14159265358979323846;

// Compensated accumulator for long sums.
class KahanSum {
public:
    void add(double x) {
        const double y = x - carry_;
        const double t = sum_ + y;
        carry_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

namespace detail {

// Maclaurin series, adequate for |x| <= 2.
inline double erf_series(double x) {
    const double x2 = x * x;
    double term = x;
    double sum = x;
    for (int n = 1; n < 120; ++n) {
        term *= -x2 / n;
        const double add = term / (2 * n + 1);
        sum += add;
        if (std::abs(add) < 1e-18 * std::abs(sum)) break;
    }
    return 2.0 / std::sqrt(kPi) * sum;
}

// Continued fraction for erfc, evaluated with the modified Lentz algorithm.
// Used for x >= 2 where the series loses accuracy.
inline double erfc_cfrac(double x) {
    const double tiny = 1e-300;
    double f = x;
    double c = x;
    double d = 0.0;
    for (int n = 1; n < 300; ++n) {
        const double a = n / 2.0;
        // CF: erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + 1/2/(x + 1/(x + 3/2/(x + ...))))
        d = x + a * d;
        if (std::abs(d) < tiny) d = tiny;
        c = x + a / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-17) break;
    }
    return std::exp(-x * x) / std::sqrt(kPi) / f;
}

} // namespace detail

// Error function, accurate to ~1e-15 absolute and deterministic across
// platforms (no libm erf involved).
inline double erf(double x) {
    if (std::isnan(x)) return x;
    const double ax = std::abs(x);
    double r;
    if (ax < 2.0) {
        r = detail::erf_series(ax);
    } else if (ax < 6.5) {
        r = 1.0 - detail::erfc_cfrac(ax);
    } else {
        r = 1.0;
    }
    return x < 0 ? -r : r;
}

namespace detail {

// Tail of the Hurwitz zeta function: sum_{t >= a} t^{-s}, for real s > 1 and
// integer a >= 1, via Euler-Maclaurin with four Bernoulli correction terms.
inline double zeta_tail(double s, double a) {
    // Shift the start point up so the asymptotic corrections are tiny.
    KahanSum head;
    double t = a;
    while (t < a + 32) {
        head.add(std::pow(t, -s));
        t += 1.0;
    }
    const double K = t; // first index not summed explicitly
    const double Kms = std::pow(K, -s);
    double tail = K * Kms / (s - 1.0); // integral_K^inf x^-s dx = K^{1-s}/(s-1)
    tail += 0.5 * Kms;
    // Bernoulli terms B2/2! s K^{-s-1}, B4/4! s(s+1)(s+2) K^{-s-3}, ...
    const double k1 = s / K;
    tail += Kms * k1 / 12.0;
    const double k3 = s * (s + 1.0) * (s + 2.0) / (K * K * K);
    tail -= Kms * k3 / 720.0;
    const double k5 = s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) / std::pow(K, 5);
    tail += Kms * k5 / 30240.0;
    return head.value() + tail;
}

} // namespace detail

// sum_{t = T+1}^{inf} c / (1 + t^p) for p > 1, to near machine precision.
// Expands 1/(1+t^p) = sum_k (-1)^k t^{-p(k+1)} beyond an explicit head.
inline double polynomial_tail_sum(double c, double p, long long T) {
    if (p <= 1.0) throw std::invalid_argument("polynomial kernel with p <= 1 is not summable");
    KahanSum head;
    long long t = T + 1;
    const long long K = std::max<long long>(T + 1, 64); // head covers t in [T+1, K)
    for (; t < K; ++t) head.add(c / (1.0 + std::pow(static_cast<double>(t), p)));
    double total = head.value();
    // Alternating zeta-tail series from K on; each term is K^{ -p } smaller.
    double sign = 1.0;
    for (int k = 0; k < 40; ++k) {
        const double term = detail::zeta_tail(p * (k + 1), static_cast<double>(K));
        total += sign * c * term;
        if (term < 1e-18 * std::abs(total) + 1e-300) break;
        sign = -sign;
    }
    return total;
}

// Approximate chi-square quantile (Wilson-Hilferty); good to a few percent,
// enough for loose homogeneity gates in tests.
inline double chi_square_quantile(double p, double df) {
    // Inverse normal via Acklam-style rational approximation.
    auto inv_norm = [](double q) {
        const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                            1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
        const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                            6.680131188771972e+01, -1.328068155288572e+01};
        const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                            -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
        const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                            3.754408661907416e+00};
        const double plow = 0.02425;
        if (q < plow) {
            const double u = std::sqrt(-2.0 * std::log(q));
            return (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
                   ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
        }
        if (q > 1.0 - plow) {
            const double u = std::sqrt(-2.0 * std::log(1.0 - q));
            return -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
                   ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
        }
        const double u = q - 0.5;
        const double r = u * u;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * u /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    };
    const double z = inv_norm(p);
    const double h = 2.0 / (9.0 * df);
    const double core = 1.0 - h + z * std::sqrt(h);
    return df * core * core * core;
}

// Nearest-rank percentile: the ceil(p/100 * n)-th smallest value (1-based).
inline double nearest_rank_percentile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile of empty sample");
    if (p < 0.0 || p > 100.0) throw std::invalid_argument("percentile outside [0, 100]");
    std::sort(values.begin(), values.end());
    if (p == 0.0) return values.front();
    const std::size_t n = values.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return values[rank - 1];
}

} // namespace exomdp
