#include <doctest.h>

#include <cmath>

#include "exomdp/linalg.hpp"
#include "exomdp/rng.hpp"

using namespace exomdp;
using linalg::Matrix;

namespace {

Matrix random_matrix(Rng& rng, std::size_t m, std::size_t n) {
    Matrix a(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = rng.uniform(-1.0, 1.0);
    return a;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) d = std::max(d, std::abs(a(i, j) - b(i, j)));
    return d;
}

} // namespace

TEST_CASE("LU solve achieves tiny residuals") {
    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 2 + rng.uniform_index(30);
        Matrix a = random_matrix(rng, n, n);
        for (std::size_t i = 0; i < n; ++i) a(i, i) += 2.0; // diagonally dominant enough
        std::vector<double> b(n);
        for (auto& v : b) v = rng.uniform(-1.0, 1.0);
        const std::vector<double> x = linalg::solve(a, b);
        const std::vector<double> ax = linalg::multiply(a, x);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(ax[i] - b[i]) < 1e-10);
    }
    Matrix singular(2, 2);
    singular(0, 0) = 1.0;
    singular(0, 1) = 1.0;
    singular(1, 0) = 1.0;
    singular(1, 1) = 1.0;
    CHECK_THROWS(linalg::solve(singular, {1.0, 0.0}));
}

TEST_CASE("symmetric eigensolve on a known matrix") {
    // [[2, 1], [1, 2]] has eigenvalues 1 and 3
    Matrix a(2, 2);
    a(0, 0) = 2;
    a(0, 1) = 1;
    a(1, 0) = 1;
    a(1, 1) = 2;
    const linalg::SymmetricEigen e = linalg::eigen_symmetric(a);
    CHECK(e.values[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.values[1] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("symmetric eigensolve satisfies A v = lambda v") {
    Rng rng(41);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t n = 3 + rng.uniform_index(20);
        Matrix a(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                const double v = rng.uniform(-1.0, 1.0);
                a(i, j) = v;
                a(j, i) = v;
            }
        const linalg::SymmetricEigen e = linalg::eigen_symmetric(a);
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<double> v(n);
            for (std::size_t i = 0; i < n; ++i) v[i] = e.vectors(i, k);
            const std::vector<double> av = linalg::multiply(a, v);
            for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(av[i] - e.values[k] * v[i]) < 1e-9);
        }
        for (std::size_t k = 1; k < n; ++k) CHECK(e.values[k] >= e.values[k - 1]);
    }
}

TEST_CASE("SVD reconstructs and orders singular values") {
    Rng rng(51);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t m = 4 + rng.uniform_index(20);
        const std::size_t n = 2 + rng.uniform_index(m - 1);
        const Matrix a = random_matrix(rng, m, n);
        const linalg::Svd dec = linalg::svd(a);
        // A = U diag(sigma) V^T
        Matrix us(m, n);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) us(i, j) = dec.u(i, j) * dec.sigma[j];
        const Matrix rec = linalg::multiply(us, dec.v.transposed());
        CHECK(max_abs_diff(rec, a) < 1e-10);
        for (std::size_t j = 1; j < n; ++j) CHECK(dec.sigma[j] <= dec.sigma[j - 1]);
    }
}

TEST_CASE("pseudoinverse satisfies the Moore-Penrose identities") {
    Rng rng(61);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t n = 3 + rng.uniform_index(12);
        Matrix a = random_matrix(rng, n, n);
        if (rep % 2 == 0) {
            // duplicate a column: rank-deficient case
            for (std::size_t i = 0; i < n; ++i) a(i, n - 1) = a(i, 0);
        }
        const linalg::PinvResult p = linalg::pseudo_inverse(a);
        const Matrix apa = linalg::multiply(linalg::multiply(a, p.pinv), a);
        CHECK(max_abs_diff(apa, a) < 1e-8);
        const Matrix pap = linalg::multiply(linalg::multiply(p.pinv, a), p.pinv);
        CHECK(max_abs_diff(pap, p.pinv) < 1e-8);
        // A A+ and A+ A are symmetric
        const Matrix aap = linalg::multiply(a, p.pinv);
        CHECK(max_abs_diff(aap, aap.transposed()) < 1e-8);
        const Matrix paa = linalg::multiply(p.pinv, a);
        CHECK(max_abs_diff(paa, paa.transposed()) < 1e-8);
        if (rep % 2 == 0) CHECK(p.effective_rank < n);
        else CHECK(p.effective_rank == n);
    }
}

TEST_CASE("pseudoinverse of the zero matrix is zero") {
    const linalg::PinvResult p = linalg::pseudo_inverse(Matrix(3, 3));
    CHECK(p.effective_rank == 0);
    CHECK(max_abs_diff(p.pinv, Matrix(3, 3)) == 0.0);
}
