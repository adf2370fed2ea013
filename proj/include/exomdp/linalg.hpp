#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace exomdp::linalg {

// Row-major dense matrix; sized for the small systems this library solves
// (feature dimension <= ~200, oracle chains <= a few thousand states).
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

inline Matrix multiply(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matrix product shape mismatch");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

inline std::vector<double> multiply(const Matrix& a, const std::vector<double>& x) {
    if (a.cols() != x.size()) throw std::invalid_argument("matrix-vector shape mismatch");
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

// Solves A x = b by LU decomposition with partial pivoting. Throws on
// numerically singular pivots.
inline std::vector<double> solve(Matrix a, std::vector<double> b) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.size() != n) throw std::invalid_argument("solve needs square A and matching b");
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        double best = std::abs(a(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            const double v = std::abs(a(r, col));
            if (v > best) {
                best = v;
                pivot = r;
            }
        }
        if (best < 1e-300) throw std::runtime_error("singular linear system");
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
            std::swap(b[col], b[pivot]);
        }
        const double inv = 1.0 / a(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) * inv;
            if (f == 0.0) continue;
            a(r, col) = 0.0;
            for (std::size_t j = col + 1; j < n; ++j) a(r, j) -= f * a(col, j);
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t j = i + 1; j < n; ++j) acc -= a(i, j) * x[j];
        x[i] = acc / a(i, i);
    }
    return x;
}

struct SymmetricEigen {
    std::vector<double> values;  // ascending
    Matrix vectors;              // columns are eigenvectors, same order
};

// Cyclic Jacobi rotations for a symmetric matrix. Off-diagonal mass is driven
// below 1e-12 * ||A||_F (documented tolerance; results are reproducible since
// the sweep order is fixed).
inline SymmetricEigen eigen_symmetric(Matrix a) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("eigen_symmetric needs a square matrix");
    Matrix v = Matrix::identity(n);

    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) norm += a(i, j) * a(i, j);
    norm = std::sqrt(norm);
    const double tol = 1e-12 * (norm > 0 ? norm : 1.0);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
        if (std::sqrt(off) <= tol) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= tol / (static_cast<double>(n) * static_cast<double>(n))) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double cos = 1.0 / std::sqrt(t * t + 1.0);
                const double sin = t * cos;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = cos * akp - sin * akq;
                    a(k, q) = sin * akp + cos * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = cos * apk - sin * aqk;
                    a(q, k) = sin * apk + cos * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = cos * vkp - sin * vkq;
                    v(k, q) = sin * vkp + cos * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

    SymmetricEigen out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

struct Svd {
    Matrix u;                    // m x n, columns orthonormal where sigma > 0
    std::vector<double> sigma;   // descending
    Matrix v;                    // n x n orthogonal
};

// One-sided Jacobi SVD: rotates column pairs until mutually orthogonal.
// Deterministic sweep order; adequate for the d x d systems solved here.
inline Svd svd(Matrix a) {
    const std::size_t m = a.rows(), n = a.cols();
    Matrix v = Matrix::identity(n);

    for (int sweep = 0; sweep < 120; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t k = 0; k < m; ++k) {
                    app += a(k, p) * a(k, p);
                    aqq += a(k, q) * a(k, q);
                    apq += a(k, p) * a(k, q);
                }
                if (std::abs(apq) <= 1e-15 * std::sqrt(app * aqq) || apq == 0.0) continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cos = 1.0 / std::sqrt(1.0 + t * t);
                const double sin = cos * t;
                for (std::size_t k = 0; k < m; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = cos * akp - sin * akq;
                    a(k, q) = sin * akp + cos * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = cos * vkp - sin * vkq;
                    v(k, q) = sin * vkp + cos * vkq;
                }
            }
        }
        if (!rotated) break;
    }

    std::vector<double> sig(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k) s += a(k, j) * a(k, j);
        sig[j] = std::sqrt(s);
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (sig[x] != sig[y]) return sig[x] > sig[y];
        return x < y; // deterministic tie-break
    });

    Svd out;
    out.sigma.resize(n);
    out.u = Matrix(m, n);
    out.v = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        out.sigma[j] = sig[src];
        for (std::size_t k = 0; k < n; ++k) out.v(k, j) = v(k, src);
        if (sig[src] > 0.0)
            for (std::size_t k = 0; k < m; ++k) out.u(k, j) = a(k, src) / sig[src];
    }
    return out;
}

struct PinvResult {
    Matrix pinv;
    std::size_t effective_rank = 0;
    double sigma_max = 0.0;
};

// Moore-Penrose pseudoinverse by SVD, discarding singular values below
// `rel_cutoff` relative to the largest.
inline PinvResult pseudo_inverse(const Matrix& a, double rel_cutoff = 1e-10) {
    const Svd dec = svd(a);
    const double smax = dec.sigma.empty() ? 0.0 : dec.sigma.front();
    const double cut = smax * rel_cutoff;

    PinvResult out;
    out.sigma_max = smax;
    out.pinv = Matrix(a.cols(), a.rows());
    for (std::size_t j = 0; j < dec.sigma.size(); ++j) {
        if (dec.sigma[j] <= cut || dec.sigma[j] == 0.0) continue;
        ++out.effective_rank;
        const double inv = 1.0 / dec.sigma[j];
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double vij = dec.v(i, j) * inv;
            if (vij == 0.0) continue;
            for (std::size_t k = 0; k < a.rows(); ++k) out.pinv(i, k) += vij * dec.u(k, j);
        }
    }
    return out;
}

} // namespace exomdp::linalg
