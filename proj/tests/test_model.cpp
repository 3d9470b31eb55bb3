#include <catch2/catch.hpp>

#include <cmath>

#include "hmlab/model.hpp"
#include "hmlab/numerics.hpp"
#include "hmlab/rng.hpp"

using namespace hmlab;
using namespace hmlab::model;

TEST_CASE("scale-free coefficients: single index and two-index hand values") {
    const auto one = make_scale_free_target(1, 0.7, link_he2(), 0.0, 8);
    REQUIRE(one.a_star.size() == 1);
    CHECK(one.a_star[0] == Approx(1.0).margin(1e-15));

    // (1, 1/2) normalized: (2/sqrt 5, 1/sqrt 5)
    const auto two = make_scale_free_target(2, 1.0, link_he2(), 0.0, 8);
    CHECK(two.a_star[0] == Approx(2.0 / std::sqrt(5.0)).margin(1e-12));
    CHECK(two.a_star[1] == Approx(1.0 / std::sqrt(5.0)).margin(1e-12));
}

TEST_CASE("crossover scale metadata m*^{2 gamma}") {
    const auto spec = make_scale_free_target(10, 1.3, link_he2(), 0.1, 64);
    CHECK(spec.crossover_alpha == Approx(std::pow(10.0, 2.6)).epsilon(1e-12));
    CHECK(spec.crossover_alpha == Approx(398.1).epsilon(0.01));
}

TEST_CASE("coefficient normalization is exact to 1e-12 even at m* = 10^4") {
    const auto spec = make_scale_free_target(10000, 0.8, link_he2(), 0.0, 10000);
    KahanSum s;
    for (double a : spec.a_star) s.add(a * a);
    CHECK(std::abs(s.value() - 1.0) <= 1e-12);
    for (std::size_t k = 1; k < spec.a_star.size(); ++k)
        CHECK(spec.a_star[k - 1] > spec.a_star[k]);
}

TEST_CASE("pure power-law profile: a_k k^gamma constant") {
    for (double gamma : {0.3, 0.8, 1.3, 2.0}) {
        const auto spec = make_scale_free_target(12, gamma, link_he2(), 0.0, 32);
        const double c0 = spec.a_star[0];
        for (std::size_t k = 0; k < spec.m_star; ++k) {
            const double v = spec.a_star[k] * std::pow(static_cast<double>(k + 1), gamma);
            CHECK(std::abs(v - c0) <= 1e-10);
        }
    }
}

TEST_CASE("constructor validation") {
    CHECK_THROWS_AS(make_scale_free_target(1, -1.0, link_he2(), 0.0, 4),
                    ValidationError);
    CHECK_THROWS_AS(make_scale_free_target(0, 1.0, link_he2(), 0.0, 4),
                    ValidationError);
    CHECK_THROWS_AS(make_scale_free_target(5, 1.0, link_he2(), 0.0, 4),
                    ValidationError);
    CHECK_THROWS_AS(make_scale_free_target(2, 1.0, link_he2(), -0.5, 4),
                    ValidationError);
}

TEST_CASE("preset links satisfy the evenness/centering/moment assumptions") {
    for (const char* name : {"he2", "he2_he4", "tanh_sq"}) {
        const auto g = link_preset(name);
        const auto chk = check_link_assumptions(g);
        INFO(name);
        CHECK(chk.even_ok);
        CHECK(chk.centered_ok);
        CHECK(chk.second_moment_ok);
        CHECK(chk.curvature_ok);
    }
    // an odd link is flagged, not rejected
    const auto odd = LinkFunction::custom([](double z) { return z; }, "odd");
    CHECK_FALSE(check_link_assumptions(odd).even_ok);
}

TEST_CASE("hermite coefficients of He_2/2 under the c_k = E[g He_k] convention") {
    const auto c = hermite_coefficients_of(link_he2(), 6);
    REQUIRE(c.size() == 7);
    CHECK(c[0] == Approx(0.0).margin(1e-10));
    CHECK(c[1] == Approx(0.0).margin(1e-10));
    CHECK(c[2] == Approx(1.0).margin(1e-10));
    for (int j : {3, 4, 5, 6}) CHECK(c[j] == Approx(0.0).margin(1e-8));
}

TEST_CASE("hermite coefficients of the he2_he4 mix") {
    // raw expansion He_2/2 + He_4/(2*4!): c_2 = 1, c_4 = 1/2
    const auto c = hermite_coefficients_of(link_he2_he4(), 6);
    CHECK(c[2] == Approx(1.0).margin(1e-10));
    CHECK(c[4] == Approx(0.5).margin(1e-9));
    CHECK(c[0] == Approx(0.0).margin(1e-10));
}

TEST_CASE("c_2 equals E[g''] for g = z^2 - 1 (Stein identity route)") {
    const auto g = LinkFunction::polynomial({-1.0, 0.0, 1.0}, "he2_raw");
    const auto c = hermite_coefficients_of(g, 4);
    // g'' = 2 analytically; under the module convention c_2 = E[g He_2] = E[g'']
    CHECK(c[2] == Approx(2.0).margin(1e-10));
    CHECK(link_mean_curvature(g) == Approx(2.0).margin(1e-10));
}

TEST_CASE("parseval: sum c_j^2/j! matches E[g^2] for polynomial links") {
    for (const auto& g : {link_he2(), link_he2_he4()}) {
        const auto c = hermite_coefficients_of(g, 8);
        double sum = 0.0, fact = 1.0;
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (j > 0) fact *= static_cast<double>(j);
            sum += c[j] * c[j] / fact;
        }
        const double eg2 = link_second_moment(g);
        CHECK(sum <= eg2 + 1e-6);
        CHECK(sum == Approx(eg2).margin(1e-4));
    }
    // truncated series of a non-polynomial link stays below E[g^2]
    const auto c = hermite_coefficients_of(link_tanh_sq(), 10);
    double sum = 0.0, fact = 1.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
        if (j > 0) fact *= static_cast<double>(j);
        sum += c[j] * c[j] / fact;
    }
    CHECK(sum <= link_second_moment(link_tanh_sq()) + 1e-6);
}

namespace {
PlantedWeights axis_weights(std::size_t m, std::size_t d) {
    PlantedWeights w;
    w.w_star = Matrix(m, d);
    for (std::size_t k = 0; k < m; ++k)
        w.w_star(k, k) = std::sqrt(static_cast<double>(d));
    return w;
}
} // namespace

TEST_CASE("evaluate_target closed forms") {
    // x = 0 with g = He_2/2 gives -1/2 sum a_k
    const auto spec = make_scale_free_target(3, 1.0, link_he2(), 0.0, 6);
    const auto w = axis_weights(3, 6);
    std::vector<double> x(6, 0.0);
    double sum_a = spec.a_star[0] + spec.a_star[1] + spec.a_star[2];
    CHECK(evaluate_target(spec, w, x) == Approx(-0.5 * sum_a).margin(1e-12));

    // m*=1, w* = sqrt(d) e_1, x = e_1: <w,x> = sqrt(d), f* = (d-1)/2
    const std::size_t d = 9;
    const auto s1 = make_scale_free_target(1, 1.0, link_he2(), 0.0, d);
    const auto w1 = axis_weights(1, d);
    std::vector<double> e1(d, 0.0);
    e1[0] = 1.0;
    CHECK(evaluate_target(s1, w1, e1) == Approx((d - 1.0) / 2.0).margin(1e-12));
}

TEST_CASE("evaluate_target matches a brute-force recomputation") {
    Rng rng(3);
    const std::size_t d = 24, m = 3;
    const auto spec = make_scale_free_target(m, 1.1, link_he2_he4(), 0.0, d);
    Matrix raw(m, d);
    rng.fill_gaussian(raw.data(), m * d);
    PlantedWeights w{numerics::orthonormalize_rows(raw, static_cast<double>(d))};

    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> x(d);
        rng.fill_gaussian(x.data(), d);
        // straight-line recomputation materializing z = W* x
        std::vector<double> z(m, 0.0);
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t c = 0; c < d; ++c) z[k] += w.w_star(k, c) * x[c];
        double expect = 0.0;
        for (std::size_t k = 0; k < m; ++k)
            expect += spec.a_star[k] * spec.links[k](z[k]);
        CHECK(evaluate_target(spec, w, x) == Approx(expect).margin(1e-12));
    }
}

TEST_CASE("evaluate_target dimension mismatch raises") {
    const auto spec = make_scale_free_target(1, 1.0, link_he2(), 0.0, 4);
    const auto w = axis_weights(1, 4);
    std::vector<double> x(3, 0.0);
    CHECK_THROWS_AS(evaluate_target(spec, w, x), ValidationError);
}

TEST_CASE("evaluate_target is invariant under simultaneous rotation") {
    Rng rng(9);
    const std::size_t d = 16, m = 2;
    const auto spec = make_scale_free_target(m, 1.3, link_he2(), 0.0, d);
    Matrix raw(m, d);
    rng.fill_gaussian(raw.data(), m * d);
    PlantedWeights w{numerics::orthonormalize_rows(raw, static_cast<double>(d))};

    // random orthogonal matrix from gram-schmidt on a gaussian square matrix
    Matrix sq(d, d);
    rng.fill_gaussian(sq.data(), d * d);
    const Matrix rot = numerics::orthonormalize_rows(sq, 1.0); // rows orthonormal

    std::vector<double> x(d);
    rng.fill_gaussian(x.data(), d);

    auto apply = [&](const double* v) {
        std::vector<double> out(d, 0.0);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) out[i] += rot(i, j) * v[j];
        return out;
    };

    PlantedWeights wr;
    wr.w_star = Matrix(m, d);
    for (std::size_t k = 0; k < m; ++k) {
        const auto r = apply(w.row(k));
        for (std::size_t j = 0; j < d; ++j) wr.w_star(k, j) = r[j];
    }
    const auto xr = apply(x.data());
    CHECK(evaluate_target(spec, w, x) ==
          Approx(evaluate_target(spec, wr, xr)).margin(1e-8));
}

TEST_CASE("target spec config block serializes presets") {
    const auto spec = make_scale_free_target(10, 1.3, link_he2_he4(), 0.1, 400);
    const std::string block = to_config_block(spec);
    CHECK(block.find("link = he2_he4") != std::string::npos);
    CHECK(block.find("gamma = 1.3") != std::string::npos);
    CHECK(block.find("m_star = 10") != std::string::npos);
}

TEST_CASE("hermite_coefficients_of flags non-convergence for wild links") {
    const auto wild = LinkFunction::custom(
        [](double z) { return std::exp(z * z * 0.45); }, "wild");
    CHECK_THROWS_AS(hermite_coefficients_of(wild, 24), NumericalError);
}
