#include <catch2/catch.hpp>

#include <cmath>
#include <cstdio>

#include "hmlab/datagen.hpp"
#include "hmlab/model.hpp"

using namespace hmlab;
using namespace hmlab::model;
using namespace hmlab::datagen;

TEST_CASE("planted weights: single row, full basis, and gram checks") {
    const auto s1 = make_scale_free_target(1, 1.0, link_he2(), 0.0, 64);
    const auto w1 = sample_planted_weights(s1, 5);
    CHECK(norm2_sq(w1.row(0), 64) == Approx(64.0).margin(1e-8 * 64));

    // m* = d: full orthogonal basis scaled by sqrt(d)
    const auto sfull = make_scale_free_target(16, 1.0, link_he2(), 0.0, 16);
    const auto wf = sample_planted_weights(sfull, 6);
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = i; j < 16; ++j)
            CHECK(dot(wf.row(i), wf.row(j), 16) ==
                  Approx(i == j ? 16.0 : 0.0).margin(1e-6 * 16));

    const auto s5 = make_scale_free_target(5, 1.2, link_he2(), 0.0, 100);
    const auto w5 = sample_planted_weights(s5, 7);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i; j < 5; ++j)
            CHECK(dot(w5.row(i), w5.row(j), 100) ==
                  Approx(i == j ? 100.0 : 0.0).margin(1e-8 * 100));
    CHECK_NOTHROW(validate_planted(w5));
}

TEST_CASE("covariate norms concentrate near one") {
    const std::size_t d = 50, n = 10000;
    const auto spec = make_scale_free_target(2, 1.0, link_he2(), 0.0, d);
    const auto w = sample_planted_weights(spec, 1);
    const auto ds = sample_dataset(spec, w, n, 99);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += norm2_sq(ds.x.row(i), d);
    mean /= n;
    CHECK(std::abs(mean - 1.0) <= 0.05);
}

TEST_CASE("label mean and variance match quadrature predictions") {
    const std::size_t d = 80, n = 100000;

    // Delta = 0, m* = 1, g = He_2/2: E[y] = 0
    const auto s0 = make_scale_free_target(1, 1.0, link_he2(), 0.0, d);
    const auto w0 = sample_planted_weights(s0, 2);
    const auto ds0 = sample_dataset(s0, w0, n, 3);
    double mean = 0.0, var = 0.0;
    for (double v : ds0.y) mean += v;
    mean /= n;
    for (double v : ds0.y) var += (v - mean) * (v - mean);
    var /= n;
    const double eg2 = link_second_moment(link_he2()); // Var He_2/2 = 1/2
    CHECK(std::abs(mean) <= 3.0 * std::sqrt(eg2 / n));
    CHECK(var == Approx(eg2).epsilon(0.05));

    // multi-index with noise: Var(y) = sum a_k^2 E[g_k^2] + Delta
    const double delta = 4.0;
    const auto s4 = make_scale_free_target(3, 1.3, link_he2(), delta, d);
    const auto w4 = sample_planted_weights(s4, 4);
    const auto ds4 = sample_dataset(s4, w4, n, 5);
    mean = 0.0;
    for (double v : ds4.y) mean += v;
    mean /= n;
    var = 0.0;
    for (double v : ds4.y) var += (v - mean) * (v - mean);
    var /= n;
    CHECK(var == Approx(s4.target_variance() + delta).epsilon(0.05));
}

TEST_CASE("streaming blocks agree with the materialized dataset") {
    const std::size_t d = 30, n = 1000;
    const auto spec = make_scale_free_target(2, 1.0, link_he2_he4(), 0.3, d);
    const auto w = sample_planted_weights(spec, 11);
    const auto ds = sample_dataset(spec, w, n, 17, kDefaultMemoryBudgetBytes, 128);

    SampleStream stream(spec, w, n, 17, 128);
    std::vector<double> xb(128 * d), yb(128);
    for (std::size_t b = 0; b < stream.block_count(); ++b) {
        const std::size_t rows = stream.rows_in_block(b);
        stream.generate_block(b, xb.data(), yb.data());
        for (std::size_t i = 0; i < rows; ++i) {
            const std::size_t gi = b * 128 + i;
            REQUIRE(yb[i] == ds.y[gi]);
            for (std::size_t c = 0; c < d; ++c) REQUIRE(xb[i * d + c] == ds.x(gi, c));
        }
    }
}

TEST_CASE("same seed gives bit-identical datasets; moments agree across seeds") {
    const std::size_t d = 40, n = 60000;
    const auto spec = make_scale_free_target(2, 0.8, link_he2(), 0.2, d);
    const auto w = sample_planted_weights(spec, 21);

    const auto a = sample_dataset(spec, w, 2000, 33);
    const auto b = sample_dataset(spec, w, 2000, 33);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);

    auto moments = [&](std::uint64_t seed) {
        const auto ds = sample_dataset(spec, w, n, seed);
        double m1 = 0, m2 = 0, m3 = 0, m4 = 0;
        for (double v : ds.y) {
            m1 += v;
            m2 += v * v;
            m3 += v * v * v;
            m4 += v * v * v * v;
        }
        return std::array<double, 4>{m1 / n, m2 / n, m3 / n, m4 / n};
    };
    const auto ma = moments(101), mb = moments(202);
    CHECK(std::abs(ma[0] - mb[0]) < 0.02);
    CHECK(std::abs(ma[1] - mb[1]) < 0.05);
    CHECK(std::abs(ma[2] - mb[2]) < 0.2);
    CHECK(std::abs(ma[3] - mb[3]) < 1.0);
}

TEST_CASE("index variables are jointly standard normal") {
    const std::size_t d = 60, m = 4, n = 100000;
    const auto spec = make_scale_free_target(m, 1.0, link_he2(), 0.0, d);
    const auto w = sample_planted_weights(spec, 8);
    const auto ds = sample_dataset(spec, w, n, 9);

    Matrix cov(m, m);
    std::vector<double> z(m);
    std::vector<double> zm(m, 0.0);
    std::vector<std::vector<double>> zs(m, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < m; ++k) {
            zs[k][i] = dot(w.row(k), ds.x.row(i), d);
            zm[k] += zs[k][i];
        }
    for (std::size_t k = 0; k < m; ++k) zm[k] /= n;
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a; b < m; ++b) {
            double c = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                c += (zs[a][i] - zm[a]) * (zs[b][i] - zm[b]);
            c /= n;
            CHECK(std::abs(c - (a == b ? 1.0 : 0.0)) <= 0.05);
        }
}

TEST_CASE("conditional mean of y given z matches the link at m* = 1") {
    const std::size_t d = 50, n = 200000;
    const auto spec = make_scale_free_target(1, 1.0, link_he2_he4(), 0.5, d);
    const auto w = sample_planted_weights(spec, 14);
    const auto ds = sample_dataset(spec, w, n, 15);

    for (double z0 : {-1.5, 0.0, 1.0}) {
        double sum = 0.0, sum2 = 0.0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = dot(w.row(0), ds.x.row(i), d);
            if (std::abs(z - z0) < 0.05) {
                sum += ds.y[i];
                sum2 += ds.y[i] * ds.y[i];
                ++cnt;
            }
        }
        REQUIRE(cnt > 50);
        const double mean = sum / cnt;
        const double sd = std::sqrt(std::max(0.0, sum2 / cnt - mean * mean) / cnt);
        const double expect = spec.a_star[0] * spec.links[0](z0);
        // window bias is O(0.05 * |g'|); allow it on top of 3 sigma
        CHECK(std::abs(mean - expect) <= 3.0 * sd + 0.02);
    }
}

TEST_CASE("parity split: documented row routing and label balance") {
    const std::size_t d = 10;
    const auto spec = make_scale_free_target(1, 1.0, link_he2(), 0.1, d);
    const auto w = sample_planted_weights(spec, 1);

    const auto ds4 = sample_dataset(spec, w, 4, 2);
    const auto [a4, b4] = split_dataset(ds4);
    REQUIRE(a4.n == 2);
    for (std::size_t c = 0; c < d; ++c) {
        CHECK(a4.x(0, c) == ds4.x(0, c));
        CHECK(a4.x(1, c) == ds4.x(2, c));
        CHECK(b4.x(0, c) == ds4.x(1, c));
        CHECK(b4.x(1, c) == ds4.x(3, c));
    }

    const auto ds2 = sample_dataset(spec, w, 2, 3);
    const auto [a2, b2] = split_dataset(ds2);
    CHECK(a2.n == 1);
    CHECK(b2.n == 1);

    const auto ds3 = sample_dataset(spec, w, 3, 4);
    CHECK_THROWS_AS(split_dataset(ds3), ValidationError);

    const auto big = sample_dataset(spec, w, 10000, 5);
    const auto [ba, bb] = split_dataset(big);
    auto var_of = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= v.size();
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return s / v.size();
    };
    const double va = var_of(ba.y), vb = var_of(bb.y);
    CHECK(std::abs(va - vb) <= 0.1 * std::max(va, vb));
}

TEST_CASE("memory budget rejection points to streaming") {
    const auto spec = make_scale_free_target(1, 1.0, link_he2(), 0.0, 1000);
    const auto w = sample_planted_weights(spec, 1);
    CHECK_THROWS_AS(sample_dataset(spec, w, 100000, 1, /*budget=*/1 << 20),
                    ResourceError);
}

TEST_CASE("binary dump round trip") {
    const std::size_t d = 12;
    const auto spec = make_scale_free_target(2, 1.0, link_he2(), 0.7, d);
    const auto w = sample_planted_weights(spec, 30);
    const auto ds = sample_dataset(spec, w, 64, 31);

    const std::string path = "hmix_roundtrip_test.bin";
    write_dataset(path, ds);
    const auto rt = read_dataset(path);
    CHECK(rt.n == ds.n);
    CHECK(rt.d == ds.d);
    CHECK(rt.seed == ds.seed);
    CHECK(rt.x == ds.x);
    CHECK(rt.y == ds.y);
    std::remove(path.c_str());
}
