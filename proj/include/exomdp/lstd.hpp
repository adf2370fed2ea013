#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "exomdp/augmented.hpp"
#include "exomdp/linalg.hpp"

namespace exomdp {

// d basis functions over flattened truncated augmented states, each bounded
// by L in absolute value.
struct FeatureMap {
    std::size_t dim = 0;
    double bound = 1.0; // L
    std::function<std::vector<double>(const std::vector<double>&)> eval;

    std::vector<double> operator()(const std::vector<double>& x) const {
        std::vector<double> out = eval(x);
        if (out.size() != dim) throw std::runtime_error("feature map produced wrong dimension");
        return out;
    }
};

// One trajectory of truncated augmented states and rewards.
struct SamplePath {
    std::vector<std::vector<double>> states; // flattened (state..., window...)
    std::vector<double> rewards;
    std::uint64_t seed = 0;
    std::string policy_id;
    long long discarded = 0; // burn-in samples dropped before this path

    std::size_t size() const { return states.size(); }

    void validate() const {
        if (states.size() != rewards.size()) throw std::invalid_argument("state/reward length mismatch");
        for (double r : rewards)
            if (!(r >= 0.0) || !(r <= 1.0)) throw std::invalid_argument("reward outside [0, 1]");
    }
};

struct LinearValueFunction {
    std::vector<double> weights;
    double clip = 0.0; // 1 / (1 - gamma)

    double raw(const std::vector<double>& features) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) acc += weights[i] * features[i];
        return acc;
    }

    double value(const std::vector<double>& features) const {
        return std::clamp(raw(features), -clip, clip);
    }
};

struct DesignMatrices {
    linalg::Matrix phi;      // N x d, rows phi(x_t)
    linalg::Matrix phi_next; // N x d, row t is phi(x_{t+1}); last row zero
    std::vector<double> rewards;
    bool underdetermined = false; // N < d
};

// Realizes the pathwise transition operator: (P x)_t = x_{t+1}, (P x)_N = 0.
inline DesignMatrices build_design(const SamplePath& path, const FeatureMap& features) {
    path.validate();
    const std::size_t n = path.size();
    if (n == 0) throw std::invalid_argument("empty sample path");
    DesignMatrices out;
    out.phi = linalg::Matrix(n, features.dim);
    out.phi_next = linalg::Matrix(n, features.dim);
    out.rewards = path.rewards;
    out.underdetermined = n < features.dim;

    for (std::size_t t = 0; t < n; ++t) {
        const std::vector<double> f = features(path.states[t]);
        for (std::size_t j = 0; j < features.dim; ++j) {
            if (!std::isfinite(f[j])) throw std::invalid_argument("non-finite feature value");
            out.phi(t, j) = f[j];
            if (t > 0) out.phi_next(t - 1, j) = f[j];
        }
    }
    return out;
}

struct LstdSolution {
    std::vector<double> weights;
    std::size_t effective_rank = 0;
    std::size_t dim = 0;
};

// alpha = [Phi^T (Phi - gamma Phi')]^+ Phi^T r via SVD pseudoinverse with
// relative cutoff 1e-10. Singular systems yield the minimum-norm solution
// instead of throwing; the effective rank is reported.
inline LstdSolution lstd_solve(const linalg::Matrix& phi, const linalg::Matrix& phi_next,
                               const std::vector<double>& rewards, double gamma) {
    const std::size_t n = phi.rows(), d = phi.cols();
    if (phi_next.rows() != n || phi_next.cols() != d || rewards.size() != n)
        throw std::invalid_argument("design shape mismatch");

    linalg::Matrix a(d, d);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t i = 0; i < d; ++i) {
            const double pti = phi(t, i);
            if (pti == 0.0) continue;
            for (std::size_t j = 0; j < d; ++j)
                a(i, j) += pti * (phi(t, j) - gamma * phi_next(t, j));
        }
    std::vector<double> b(d, 0.0);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t i = 0; i < d; ++i) b[i] += phi(t, i) * rewards[t];

    const linalg::PinvResult inv = linalg::pseudo_inverse(a, 1e-10);
    LstdSolution out;
    out.dim = d;
    out.effective_rank = inv.effective_rank;
    out.weights = linalg::multiply(inv.pinv, b);
    return out;
}

// Root-mean-square (the empirical norm ||.||_N).
inline double empirical_norm(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("empirical norm of empty vector");
    double acc = 0.0;
    for (double v : values) acc += v * v;
    return std::sqrt(acc / static_cast<double>(values.size()));
}

// Least-squares projection of y onto the column span of Phi.
inline std::vector<double> project_onto_span(const linalg::Matrix& phi, const std::vector<double>& y) {
    const std::size_t n = phi.rows(), d = phi.cols();
    linalg::Matrix gram(d, d);
    std::vector<double> rhs(d, 0.0);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t i = 0; i < d; ++i) {
            const double pti = phi(t, i);
            if (pti == 0.0) continue;
            for (std::size_t j = 0; j < d; ++j) gram(i, j) += pti * phi(t, j);
            rhs[i] += pti * y[t];
        }
    const linalg::PinvResult inv = linalg::pseudo_inverse(gram, 1e-12);
    const std::vector<double> z = linalg::multiply(inv.pinv, rhs);
    return linalg::multiply(phi, z);
}

// || Phi alpha - Proj(r + gamma Phi' alpha) ||_N: how far the returned
// weights are from the projected-operator fixed point.
inline double fixed_point_residual(const std::vector<double>& weights, const linalg::Matrix& phi,
                                   const linalg::Matrix& phi_next, const std::vector<double>& rewards,
                                   double gamma) {
    const std::size_t n = phi.rows();
    std::vector<double> lhs = linalg::multiply(phi, weights);
    std::vector<double> target = linalg::multiply(phi_next, weights);
    for (std::size_t t = 0; t < n; ++t) target[t] = rewards[t] + gamma * target[t];
    const std::vector<double> projected = project_onto_span(phi, target);
    std::vector<double> diff(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) diff[t] = lhs[t] - projected[t];
    return empirical_norm(diff);
}

// Smallest positive eigenvalue of (1/N) Phi^T Phi. Eigenvalues below
// 1e-12 * max are treated as zero (rank deficiency) and skipped.
inline double gram_min_eigenvalue(const linalg::Matrix& phi) {
    const std::size_t n = phi.rows(), d = phi.cols();
    if (n == 0) throw std::invalid_argument("empty design matrix");
    linalg::Matrix gram(d, d);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t i = 0; i < d; ++i) {
            const double pti = phi(t, i);
            if (pti == 0.0) continue;
            for (std::size_t j = i; j < d; ++j) gram(i, j) += pti * phi(t, j);
        }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < i; ++j) gram(i, j) = gram(j, i);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) gram(i, j) /= static_cast<double>(n);

    const linalg::SymmetricEigen eig = linalg::eigen_symmetric(gram);
    const double top = eig.values.empty() ? 0.0 : eig.values.back();
    double smallest_positive = 0.0;
    for (double v : eig.values) {
        if (v > 1e-12 * std::max(top, 1e-300)) {
            smallest_positive = v;
            break;
        }
    }
    return smallest_positive;
}

// Pendulum feature basis on the truncated augmented state: the 8 state
// features (cos, sin, angular velocity, angle, and their squares), the T+1
// window marks with their squares, and a constant. d = 8 + 2(T+1) + 1.
// Window marks are clipped to +-mark_clip before featurization so every
// basis function stays bounded.
inline FeatureMap default_pendulum_features(long long T, double mark_clip = 5.0,
                                            double velocity_limit = 8.0) {
    if (T < 0) throw std::invalid_argument("T must be >= 0");
    FeatureMap map;
    const std::size_t marks = static_cast<std::size_t>(T) + 1;
    map.dim = 8 + 2 * marks + 1;
    const double vmax = std::max({velocity_limit * velocity_limit, mark_clip * mark_clip, kPi * kPi});
    map.bound = std::max(vmax, 1.0);
    map.eval = [marks, mark_clip](const std::vector<double>& x) {
        if (x.size() < 2 + marks) throw std::invalid_argument("pendulum feature input too short");
        const double theta = x[0], vel = x[1];
        std::vector<double> f;
        f.reserve(8 + 2 * marks + 1);
        f.push_back(std::cos(theta));
        f.push_back(std::sin(theta));
        f.push_back(vel);
        f.push_back(theta);
        f.push_back(std::cos(theta) * std::cos(theta));
        f.push_back(std::sin(theta) * std::sin(theta));
        f.push_back(vel * vel);
        f.push_back(theta * theta);
        for (std::size_t i = 0; i < marks; ++i) {
            const double m = std::clamp(x[2 + i], -mark_clip, mark_clip);
            f.push_back(m);
        }
        for (std::size_t i = 0; i < marks; ++i) {
            const double m = std::clamp(x[2 + i], -mark_clip, mark_clip);
            f.push_back(m * m);
        }
        f.push_back(1.0);
        return f;
    };
    return map;
}

// One-hot basis over an integer state stored in x[0]; ignores the window.
inline FeatureMap tabular_state_features(int n_states) {
    FeatureMap map;
    map.dim = static_cast<std::size_t>(n_states);
    map.bound = 1.0;
    map.eval = [n_states](const std::vector<double>& x) {
        std::vector<double> f(static_cast<std::size_t>(n_states), 0.0);
        const int s = static_cast<int>(std::lround(x.at(0)));
        if (s < 0 || s >= n_states) throw std::invalid_argument("state index out of range");
        f[static_cast<std::size_t>(s)] = 1.0;
        return f;
    };
    return map;
}

// One-hot basis over (state, quantized window of `marks` entries).
inline FeatureMap tabular_window_features(int n_states, int marks) {
    FeatureMap map;
    std::size_t codes = 1;
    for (int j = 0; j < marks; ++j) codes *= 3;
    map.dim = static_cast<std::size_t>(n_states) * codes;
    map.bound = 1.0;
    map.eval = [n_states, marks, codes](const std::vector<double>& x) {
        std::vector<double> f(static_cast<std::size_t>(n_states) * codes, 0.0);
        const int s = static_cast<int>(std::lround(x.at(0)));
        std::size_t code = 0, mult = 1;
        for (int j = 0; j < marks; ++j) {
            const int m = static_cast<int>(std::lround(x.at(1 + static_cast<std::size_t>(j))));
            code += static_cast<std::size_t>(m + 1) * mult;
            mult *= 3;
        }
        f[static_cast<std::size_t>(s) * codes + code] = 1.0;
        return f;
    };
    return map;
}

} // namespace exomdp
