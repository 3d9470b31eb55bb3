#include <catch2/catch.hpp>

#include <cmath>
#include <set>

#include "hmlab/numerics.hpp"
#include "hmlab/rng.hpp"
#include "oracles.hpp"

using namespace hmlab;
namespace num = hmlab::numerics;

TEST_CASE("hermite polynomials match explicit forms") {
    const double z = 1.37;
    CHECK(num::hermite_he(0, z) == 1.0);
    CHECK(num::hermite_he(1, z) == z);
    CHECK(num::hermite_he(2, z) == Approx(z * z - 1.0).epsilon(1e-14));
    CHECK(num::hermite_he(3, z) == Approx(z * z * z - 3.0 * z).epsilon(1e-14));
    CHECK(num::hermite_he(4, z) ==
          Approx(z * z * z * z - 6.0 * z * z + 3.0).epsilon(1e-14));

    std::vector<double> all;
    num::hermite_he_all(6, z, all);
    for (int k = 0; k <= 6; ++k) CHECK(all[k] == Approx(num::hermite_he(k, z)));
}

TEST_CASE("gauss-hermite two-point rule is (+-1, 1/2)") {
    const auto& r = num::gauss_hermite(2);
    REQUIRE(r.nodes.size() == 2);
    CHECK(r.nodes[0] == Approx(-1.0).margin(1e-14));
    CHECK(r.nodes[1] == Approx(1.0).margin(1e-14));
    CHECK(r.weights[0] == Approx(0.5).margin(1e-14));
    CHECK(r.weights[1] == Approx(0.5).margin(1e-14));
}

TEST_CASE("gauss-hermite normalization and moments") {
    for (int n : {2, 8, 64, 129}) {
        const auto& r = num::gauss_hermite(n);
        double sw = 0.0, sw2 = 0.0;
        for (std::size_t i = 0; i < r.nodes.size(); ++i) {
            sw += r.weights[i];
            sw2 += r.weights[i] * r.nodes[i] * r.nodes[i];
            CHECK(r.weights[i] > 0.0);
        }
        CHECK(sw == Approx(1.0).margin(1e-12));
        CHECK(sw2 == Approx(1.0).margin(1e-10));
    }
    const auto& r = num::gauss_hermite(64);
    CHECK(r.integrate([](double z) { return z * z * z * z; }) ==
          Approx(3.0).margin(1e-12));
}

TEST_CASE("gauss-hermite integrates He_6^2 to 6!") {
    const auto& r = num::gauss_hermite(64);
    const double got = r.integrate([](double z) {
        const double h6 = num::hermite_he(6, z);
        return h6 * h6;
    });
    CHECK(got == Approx(720.0).margin(1e-9));

    // Monte Carlo cross-check of the same moment; He_6^2 is heavy-tailed,
    // so compare against its own standard error.
    Rng rng(2024);
    double mc = 0.0, mc2 = 0.0;
    const int n = 10'000'000;
    for (int i = 0; i < n; ++i) {
        const double h6 = num::hermite_he(6, rng.next_gaussian());
        mc += h6 * h6;
        mc2 += h6 * h6 * h6 * h6;
    }
    mc /= n;
    mc2 /= n;
    const double se = std::sqrt((mc2 - mc * mc) / n);
    CHECK(std::abs(mc - 720.0) <= 5.0 * se);
}

TEST_CASE("quadrature rules are consistent between n and 2n nodes") {
    auto tanh_sq = [](double z) { return std::tanh(z) * std::tanh(z); };
    auto poly = [](double z) { return 0.5 * (z * z - 1.0) + z * z * z * z / 48.0; };
    for (int n : {32, 64, 128}) {
        const auto& a = num::gauss_hermite(n);
        const auto& b = num::gauss_hermite(2 * n);
        CHECK(a.integrate(tanh_sq) == Approx(b.integrate(tanh_sq)).margin(1e-8));
        CHECK(a.integrate(poly) == Approx(b.integrate(poly)).margin(1e-8));
    }
}

TEST_CASE("gauss-legendre integrates polynomials on [-1,1]") {
    const auto& r = num::gauss_legendre(16);
    CHECK(r.integrate([](double) { return 1.0; }) == Approx(2.0).margin(1e-13));
    CHECK(r.integrate([](double x) { return x * x; }) ==
          Approx(2.0 / 3.0).margin(1e-13));
    CHECK(r.integrate([](double x) { return x * x * x; }) == Approx(0.0).margin(1e-13));
}

TEST_CASE("gauss-hermite rejects out-of-range node counts") {
    CHECK_THROWS_AS(num::gauss_hermite(1), ValidationError);
    CHECK_THROWS_AS(num::gauss_hermite(513), ValidationError);
}

TEST_CASE("sym_eig on identity and diagonal matrices") {
    const auto id = num::sym_eig(Matrix::identity(3));
    CHECK(id.eigenvalues == std::vector<double>{1.0, 1.0, 1.0});

    Matrix d3(3, 3);
    d3(0, 0) = 3.0;
    d3(1, 1) = 1.0;
    d3(2, 2) = -2.0;
    const auto de = num::sym_eig(d3);
    CHECK(de.eigenvalues[0] == Approx(3.0).margin(1e-12));
    CHECK(de.eigenvalues[1] == Approx(1.0).margin(1e-12));
    CHECK(de.eigenvalues[2] == Approx(-2.0).margin(1e-12));
    // signed unit basis, largest entry positive
    for (std::size_t j = 0; j < 3; ++j) {
        const auto v = de.eigenvector(j);
        double mx = 0.0;
        for (double x : v) mx = std::max(mx, std::abs(x));
        CHECK(mx == Approx(1.0).margin(1e-12));
    }
    CHECK(de.vectors(0, 0) == Approx(1.0).margin(1e-12));
    CHECK(de.vectors(1, 1) == Approx(1.0).margin(1e-12));
    CHECK(de.vectors(2, 2) == Approx(1.0).margin(1e-12));
}

namespace {
Matrix random_symmetric(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double v = rng.next_gaussian();
            a(i, j) = v;
            a(j, i) = v;
        }
    return a;
}
} // namespace

TEST_CASE("sym_eig matches jacobi oracle on a random 50x50 matrix") {
    const Matrix a = random_symmetric(50, 7);
    const auto e = num::sym_eig(a);
    const auto ref = oracles::jacobi_eigenvalues(a);
    REQUIRE(e.eigenvalues.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i)
        CHECK(e.eigenvalues[i] == Approx(ref[i]).margin(1e-8));
}

TEST_CASE("sym_eig reconstruction, orthonormality, trace and determinism") {
    for (std::uint64_t seed : {1ull, 2ull}) {
        const std::size_t n = 40;
        const Matrix a = random_symmetric(n, seed);
        const auto e = num::sym_eig(a);

        for (std::size_t i = 1; i < n; ++i)
            CHECK(e.eigenvalues[i - 1] >= e.eigenvalues[i]);

        // V^T V = I entrywise
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < n; ++k) s += e.vectors(k, i) * e.vectors(k, j);
                CHECK(s == Approx(i == j ? 1.0 : 0.0).margin(1e-10));
            }

        // ||A - V diag V^T||_F <= 1e-8 ||A||_F
        Matrix rec(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < n; ++k)
                    s += e.vectors(i, k) * e.eigenvalues[k] * e.vectors(j, k);
                rec(i, j) = a(i, j) - s;
            }
        CHECK(frobenius_norm(rec) <= 1e-8 * frobenius_norm(a));

        double tr = 0.0, ev_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            tr += a(i, i);
            ev_sum += e.eigenvalues[i];
        }
        CHECK(ev_sum == Approx(tr).epsilon(1e-8));

        const auto e2 = num::sym_eig(a);
        CHECK(e2.eigenvalues == e.eigenvalues);
        CHECK(e2.vectors == e.vectors);
    }
}

TEST_CASE("sym_eig rejects asymmetric input") {
    Matrix a(3, 3);
    a(0, 1) = 1.0;
    a(1, 0) = 1.0 + 1e-6;
    CHECK_THROWS_AS(num::sym_eig(a), ValidationError);
}

TEST_CASE("find_root_bracketed basics") {
    CHECK(num::find_root_bracketed([](double x) { return x - 2.0; }, 0.0, 5.0, 1e-12) ==
          Approx(2.0).margin(1e-10));
    CHECK(num::find_root_bracketed([](double x) { return x * x - 2.0; }, 1.0, 2.0,
                                   1e-10) == Approx(std::sqrt(2.0)).margin(1e-8));
    CHECK_THROWS_AS(
        num::find_root_bracketed([](double x) { return x * x + 1.0; }, -1.0, 1.0, 1e-8),
        ValidationError);
}

TEST_CASE("find_root_bracketed agrees with a fine grid scan on a spectral-edge "
          "derivative") {
    // zeta_alpha'(t) = 1 - alpha c^2/(t-c)^2 for a constant preprocessing c:
    // the same shape of equation the spectral-edge solver sees.
    const double alpha = 7.0, c = 0.35;
    auto f = [&](double t) { return 1.0 - alpha * c * c / ((t - c) * (t - c)); };

    const double lo = c + 1e-6, hi = c + 50.0;
    double best_x = lo, best = std::abs(f(lo));
    const int n = 100000;
    for (int i = 1; i < n; ++i) {
        const double x = lo + (hi - lo) * i / (n - 1.0);
        if (std::abs(f(x)) < best) {
            best = std::abs(f(x));
            best_x = x;
        }
    }
    const double root = num::find_root_bracketed(f, lo, hi, 1e-12);
    CHECK(root == Approx(best_x).margin((hi - lo) / n * 2));
    CHECK(root == Approx(c * (1.0 + std::sqrt(alpha))).epsilon(1e-9));
}

TEST_CASE("maximize_1d finds interior and boundary maxima") {
    auto r1 = num::maximize_1d([](double m) { return -(m - 0.3) * (m - 0.3); }, 0.0,
                               1.0, 1e-9);
    CHECK(r1.argmax == Approx(0.3).margin(1e-6));

    auto r2 = num::maximize_1d([](double m) { return m + std::log(1.0 - m); }, 0.0,
                               1.0 - 1e-9, 1e-9);
    CHECK(r2.argmax == Approx(0.0).margin(1e-5));
    CHECK(r2.max == Approx(0.0).margin(1e-9));
}

TEST_CASE("maximize_1d matches a dense grid oracle on a free-entropy shape") {
    // m + log(1-m) + s*m^2/2 with s = 2: nonzero maximizer at 1 - 1/s.
    const double s = 2.0;
    auto f = [&](double m) { return m + std::log(1.0 - m) + 0.5 * s * m * m; };
    const double hi = 1.0 - 1e-9;
    double best_x = 0.0, best = f(0.0);
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = hi * i / (n - 1.0);
        if (f(x) > best) {
            best = f(x);
            best_x = x;
        }
    }
    auto r = num::maximize_1d(f, 0.0, hi, 1e-10);
    CHECK(r.argmax == Approx(best_x).margin(1e-5));
    CHECK(r.argmax == Approx(1.0 - 1.0 / s).margin(1e-6));
}

TEST_CASE("maximize_1d propagates NaN as a numerical error") {
    CHECK_THROWS_AS(num::maximize_1d([](double) { return std::nan(""); }, 0.0, 1.0,
                                     1e-6),
                    NumericalError);
}

TEST_CASE("orthonormalize_rows on identity block and arbitrary input") {
    Matrix m(2, 3);
    m(0, 0) = 1.0;
    m(1, 1) = 1.0;
    const Matrix q = num::orthonormalize_rows(m, 3.0);
    CHECK(q(0, 0) == Approx(std::sqrt(3.0)));
    CHECK(q(1, 1) == Approx(std::sqrt(3.0)));
    CHECK(q(0, 1) == Approx(0.0).margin(1e-14));

    // already-orthogonal rows keep their direction
    Matrix o(2, 4);
    o(0, 0) = 2.0;
    o(0, 1) = 2.0;
    o(1, 2) = -1.0;
    const Matrix qo = num::orthonormalize_rows(o, 4.0);
    CHECK(qo(0, 0) == Approx(qo(0, 1)).margin(1e-12));
    CHECK(qo(1, 2) < 0.0);
    CHECK(norm2_sq(qo.row(0), 4) == Approx(4.0).margin(1e-12));
}

TEST_CASE("orthonormalize_rows gram matrix equals scale times identity") {
    Rng rng(11);
    Matrix m(10, 100);
    rng.fill_gaussian(m.data(), 10 * 100);
    const double scale = 100.0;
    const Matrix q = num::orthonormalize_rows(m, scale);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = i; j < 10; ++j) {
            const double g = dot(q.row(i), q.row(j), 100);
            CHECK(g == Approx(i == j ? scale : 0.0).margin(1e-9 * scale));
        }
}

TEST_CASE("orthonormalize_rows rejects rank-deficient input") {
    Matrix m(2, 3);
    m(0, 0) = 1.0;
    m(1, 0) = 1.0; // duplicate row
    CHECK_THROWS_AS(num::orthonormalize_rows(m, 1.0), ValidationError);
}

TEST_CASE("rng streams are deterministic and splittable") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());

    Rng s1 = Rng::stream(42, 0), s2 = Rng::stream(42, 1);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 100; ++i) {
        seen.insert(s1.next_u64());
        seen.insert(s2.next_u64());
    }
    CHECK(seen.size() == 200);

    Rng g1(7), g2(7);
    for (int i = 0; i < 1000; ++i) REQUIRE(g1.next_gaussian() == g2.next_gaussian());
}

TEST_CASE("rng gaussian moments") {
    Rng rng(123);
    const int n = 2'000'000;
    double m1 = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.next_gaussian();
        m1 += z;
        m2 += z * z;
        m3 += z * z * z;
        m4 += z * z * z * z;
    }
    m1 /= n;
    m2 /= n;
    m3 /= n;
    m4 /= n;
    CHECK(m1 == Approx(0.0).margin(0.005));
    CHECK(m2 == Approx(1.0).margin(0.01));
    CHECK(m3 == Approx(0.0).margin(0.02));
    CHECK(m4 == Approx(3.0).margin(0.05));
}

TEST_CASE("normal quantile inverts the gaussian cdf") {
    CHECK(num::normal_quantile(0.5) == Approx(0.0).margin(1e-14));
    CHECK(num::normal_quantile(0.975) == Approx(1.959963984540054).margin(1e-9));
    CHECK(num::normal_quantile(0.0013498980316300933) == Approx(-3.0).margin(1e-9));
}
