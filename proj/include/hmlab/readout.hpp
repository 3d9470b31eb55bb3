// readout.hpp — two-stage network training: spectral initialization of the
// first layer from half the data, then a random-feature ridge readout on
// the other half. The ridge problem is solved in the p x p normal-equations
// form (p ~ sqrt(n) here, so the primal Gram never materializes).
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "hmlab/core.hpp"
#include "hmlab/datagen.hpp"
#include "hmlab/kernels.hpp"
#include "hmlab/model.hpp"
#include "hmlab/parallel.hpp"
#include "hmlab/spectral.hpp"
#include "hmlab/theory.hpp"

namespace hmlab::readout {

// ── Activations ──────────────────────────────────────────────────────────
struct Activation {
    std::string name;
    double bound = 1.0; // declared sup |sigma|
    std::function<double(double)> fn;

    double operator()(double z) const { return fn(z); }

    // logistic shifted to zero mean under N(0,1): bounded, continuous,
    // non-polynomial Hermite tail
    static Activation logistic_centered() {
        return {"logistic_centered", 0.5,
                [](double z) { return 1.0 / (1.0 + std::exp(-z)) - 0.5; }};
    }

    // diagnostic pass-through for linear-regression sanity paths
    static Activation identity() {
        return {"identity", std::numeric_limits<double>::infinity(),
                [](double z) { return z; }};
    }

    static Activation constant_one() {
        return {"constant_one", 1.0, [](double) { return 1.0; }};
    }

    static Activation preset(const std::string& name) {
        if (name == "logistic_centered") return logistic_centered();
        if (name == "identity") return identity();
        if (name == "constant_one") return constant_one();
        throw ValidationError("unknown activation preset: " + name);
    }

    // |sigma| <= bound on a dense grid
    void validate() const {
        for (int i = 0; i < 512; ++i) {
            const double z = -50.0 + 100.0 * i / 511.0;
            const double v = fn(z);
            if (std::isnan(v) || std::abs(v) > bound)
                throw ValidationError("activation exceeds its declared bound");
        }
    }
};

// ── Network ──────────────────────────────────────────────────────────────
struct TrainedNetwork {
    Matrix w;              // p x d first layer
    std::vector<double> b; // biases, frozen at init
    std::vector<double> a; // trained readout
    Activation activation;
    double ridge_lambda = 0.0;
    std::size_t p = 0, d = 0, r = 0;

    Matrix z_mix;  // p x r gaussian mixing matrix (kept for auditing W = Z W_sp)
    Matrix w_sp;   // r x d spectral rows used at init
    bool random_feature_fallback = false; // r = 0 path
    bool gram_jittered = false;
    double solve_residual = 0.0; // ||(G + n lam I)a - rhs|| / ||rhs||

    double predict(const double* x) const {
        KahanSum s;
        for (std::size_t j = 0; j < p; ++j)
            s.add(a[j] * activation(dot(w.row(j), x, d) + b[j]));
        return s.value();
    }
};

// ── Spectral initialization ──────────────────────────────────────────────
// W = Z W_sp with Z ~ N(0, 1/r) i.i.d.; rows of W lie in the span of the
// spectral estimate by construction. With no spikes the first layer falls
// back to p random N(0, I/d) directions and the report flags it.
struct SpectralInit {
    Matrix w;     // p x d
    Matrix z_mix; // p x r
    bool fallback = false;
};

inline SpectralInit spectral_init(const spectral::SpectralEstimate& est,
                                  std::size_t p, std::size_t d,
                                  std::uint64_t seed) {
    if (p < 1) throw ValidationError("spectral_init: p >= 1");
    const std::size_t r = est.spike_count;
    SpectralInit out;
    if (r == 0) {
        out.fallback = true;
        out.w = Matrix(p, d);
        Rng rng = Rng::stream(seed, 0x213u);
        rng.fill_gaussian(out.w.data(), p * d);
        const double s = 1.0 / std::sqrt(static_cast<double>(d));
        for (std::size_t i = 0; i < p * d; ++i) out.w.data()[i] *= s;
        return out;
    }
    if (est.w_hat.cols() != d) throw ValidationError("spectral_init: dim mismatch");
    out.z_mix = Matrix(p, r);
    Rng rng = Rng::stream(seed, 0x214u);
    rng.fill_gaussian(out.z_mix.data(), p * r);
    const double s = 1.0 / std::sqrt(static_cast<double>(r));
    for (std::size_t i = 0; i < p * r; ++i) out.z_mix.data()[i] *= s;

    // W = Z W_sp; r is small, so a straightforward p x r x d product is fine
    out.w = Matrix(p, d);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t k = 0; k < r; ++k) {
            const double zik = out.z_mix(i, k);
            const double* wk = est.w_hat.row(k);
            double* wi = out.w.row(i);
            for (std::size_t c = 0; c < d; ++c) wi[c] += zik * wk[c];
        }
    return out;
}

// ── Ridge readout ────────────────────────────────────────────────────────
namespace detail {

// in-place Cholesky of the SPD matrix stored row-major; returns false on a
// non-positive pivot
inline bool cholesky(Matrix& g) {
    const std::size_t n = g.rows();
    for (std::size_t j = 0; j < n; ++j) {
        double diag = g(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= g(j, k) * g(j, k);
        if (!(diag > 0.0)) return false;
        const double root = std::sqrt(diag);
        g(j, j) = root;
        const double inv = 1.0 / root;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = g(i, j);
            const double* gi = g.row(i);
            const double* gj = g.row(j);
            for (std::size_t k = 0; k < j; ++k) s -= gi[k] * gj[k];
            g(i, j) = s * inv;
        }
    }
    return true;
}

inline void cholesky_solve(const Matrix& l, std::vector<double>& x) {
    const std::size_t n = l.rows();
    for (std::size_t i = 0; i < n; ++i) {
        double s = x[i];
        for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x[k];
        x[i] = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = x[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
        x[ii] = s / l(ii, ii);
    }
}

struct GramSystem {
    Matrix gram;             // Psi^T Psi, p x p
    std::vector<double> rhs; // Psi^T y
};

// Accumulates the normal equations over row blocks of the feature matrix;
// slot reduction keeps the sums thread-count independent.
inline GramSystem feature_normal_equations(const Matrix& w,
                                           const std::vector<double>& b,
                                           const Activation& sigma,
                                           const datagen::Dataset& data,
                                           int threads) {
    const std::size_t p = w.rows(), d = w.cols(), n = data.n;
    const std::size_t block = 512;
    const std::size_t nblocks = (n + block - 1) / block;
    const std::size_t nslots = std::min<std::size_t>(spectral::kReductionSlots,
                                                     nblocks);

    std::vector<Matrix> slot_gram(nslots);
    std::vector<std::vector<double>> slot_rhs(nslots);

    parallel_for(nslots, threads, [&](std::size_t s) {
        Matrix gram(p, p);
        std::vector<double> rhs(p, 0.0);
        std::vector<double> psi(block * p), ones(block, 1.0), scratch;
        const std::size_t b_lo = s * nblocks / nslots;
        const std::size_t b_hi = (s + 1) * nblocks / nslots;
        for (std::size_t blk = b_lo; blk < b_hi; ++blk) {
            const std::size_t lo = blk * block;
            const std::size_t rows = std::min(block, n - lo);
            std::fill(psi.begin(), psi.begin() + rows * p, 0.0);
            kernels::gemm_abt(psi.data(), data.x.row(lo), w.data(), rows, p, d);
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < p; ++j)
                    psi[i * p + j] = sigma(psi[i * p + j] + b[j]);
            kernels::sym_rank_update(gram.data(), p, psi.data(), ones.data(), rows,
                                     scratch);
            for (std::size_t i = 0; i < rows; ++i) {
                const double yi = data.y[lo + i];
                const double* pi = psi.data() + i * p;
                for (std::size_t j = 0; j < p; ++j) rhs[j] += yi * pi[j];
            }
        }
        slot_gram[s] = std::move(gram);
        slot_rhs[s] = std::move(rhs);
    });

    GramSystem sys;
    sys.gram = std::move(slot_gram[0]);
    sys.rhs = std::move(slot_rhs[0]);
    for (std::size_t s = 1; s < nslots; ++s) {
        for (std::size_t i = 0; i < p * p; ++i)
            sys.gram.data()[i] += slot_gram[s].data()[i];
        for (std::size_t j = 0; j < p; ++j) sys.rhs[j] += slot_rhs[s][j];
    }
    kernels::mirror_upper_to_lower(sys.gram.data(), p);
    return sys;
}

} // namespace detail

// Solves a = (Psi^T Psi + n lambda I)^{-1} Psi^T y with biases b_j ~ N(0,1)
// frozen at entry. bias_scale = 0 is a diagnostic mode for linear paths.
inline TrainedNetwork train_readout(const Matrix& w, const datagen::Dataset& data2,
                                    const Activation& sigma, double ridge_lambda,
                                    std::uint64_t seed, int threads = 1,
                                    double bias_scale = 1.0) {
    if (!(ridge_lambda > 0.0))
        throw ValidationError("train_readout: ridge lambda must be positive");
    if (w.cols() != data2.d) throw ValidationError("train_readout: dim mismatch");
    sigma.validate();

    const std::size_t p = w.rows(), n = data2.n;
    TrainedNetwork net;
    net.w = w;
    net.p = p;
    net.d = data2.d;
    net.activation = sigma;
    net.ridge_lambda = ridge_lambda;

    net.b.resize(p);
    Rng rng = Rng::stream(seed, 0x21Bu);
    for (std::size_t j = 0; j < p; ++j) net.b[j] = bias_scale * rng.next_gaussian();

    auto sys = detail::feature_normal_equations(w, net.b, sigma, data2, threads);

    const double shift = static_cast<double>(n) * ridge_lambda;
    Matrix reg = sys.gram;
    for (std::size_t j = 0; j < p; ++j) reg(j, j) += shift;

    Matrix chol = reg;
    bool ok = detail::cholesky(chol);
    double cond_sq = 0.0;
    if (ok) {
        double dmin = chol(0, 0), dmax = chol(0, 0);
        for (std::size_t j = 1; j < p; ++j) {
            dmin = std::min(dmin, chol(j, j));
            dmax = std::max(dmax, chol(j, j));
        }
        cond_sq = (dmax / dmin) * (dmax / dmin);
    }
    if (!ok || cond_sq > 1e14) {
        // one round of diagonal jitter, then give up
        double trace = 0.0;
        for (std::size_t j = 0; j < p; ++j) trace += reg(j, j);
        const double jitter = 1e-10 * trace / static_cast<double>(p);
        for (std::size_t j = 0; j < p; ++j) reg(j, j) += jitter;
        chol = reg;
        ok = detail::cholesky(chol);
        net.gram_jittered = true;
        if (!ok) throw NumericalError("train_readout: gram factorization failed");
    }

    net.a = sys.rhs;
    detail::cholesky_solve(chol, net.a);

    // residual of the normal equations, relative to ||rhs||
    double res = 0.0, rhs_norm = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        double s = -sys.rhs[i];
        const double* gi = reg.row(i);
        for (std::size_t j = 0; j < p; ++j) s += gi[j] * net.a[j];
        res += s * s;
        rhs_norm += sys.rhs[i] * sys.rhs[i];
    }
    net.solve_residual = (rhs_norm > 0.0) ? std::sqrt(res / rhs_norm) : std::sqrt(res);
    if (net.solve_residual > 1e-6)
        throw NumericalError("train_readout: normal-equation residual too large");
    return net;
}

// ── Excess risk ──────────────────────────────────────────────────────────
// Monte Carlo estimate of E[(f*(x) - f(x; net))^2] over fresh covariates
// with noiseless targets.
struct RiskEstimate {
    double risk = 0.0;
    double std_err = 0.0;
};

inline RiskEstimate excess_risk(const TrainedNetwork& net,
                                const model::TargetSpec& spec,
                                const model::PlantedWeights& weights,
                                std::size_t n_test, std::uint64_t seed,
                                int threads = 1) {
    if (n_test < 1000) throw ValidationError("excess_risk: n_test >= 1000");
    const std::size_t d = spec.dim_d;
    if (net.d != d) throw ValidationError("excess_risk: dim mismatch");

    const std::size_t block = 512;
    const std::size_t nblocks = (n_test + block - 1) / block;
    const std::size_t nslots = std::min<std::size_t>(spectral::kReductionSlots,
                                                     nblocks);
    std::vector<double> slot_sum(nslots, 0.0), slot_sum2(nslots, 0.0);

    parallel_for(nslots, threads, [&](std::size_t s) {
        std::vector<double> x(block * d), pre(block * net.p);
        KahanSum sum, sum2;
        const std::size_t b_lo = s * nblocks / nslots;
        const std::size_t b_hi = (s + 1) * nblocks / nslots;
        for (std::size_t blk = b_lo; blk < b_hi; ++blk) {
            const std::size_t rows = std::min(block, n_test - blk * block);
            Rng rng = Rng::stream(seed, 0x7E57000ull + blk);
            rng.fill_gaussian(x.data(), rows * d);
            const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
            for (std::size_t i = 0; i < rows * d; ++i) x[i] *= inv_sqrt_d;

            std::fill(pre.begin(), pre.begin() + rows * net.p, 0.0);
            kernels::gemm_abt(pre.data(), x.data(), net.w.data(), rows, net.p, d);
            for (std::size_t i = 0; i < rows; ++i) {
                KahanSum acc;
                const double* pi = pre.data() + i * net.p;
                for (std::size_t j = 0; j < net.p; ++j)
                    acc.add(net.a[j] * net.activation(pi[j] + net.b[j]));
                const double f_net = acc.value();
                const double f_star =
                    model::evaluate_target(spec, weights, x.data() + i * d, d);
                const double e = f_star - f_net;
                sum.add(e * e);
                sum2.add(e * e * e * e);
            }
        }
        slot_sum[s] = sum.value();
        slot_sum2[s] = sum2.value();
    });

    double total = 0.0, total2 = 0.0;
    for (std::size_t s = 0; s < nslots; ++s) {
        total += slot_sum[s];
        total2 += slot_sum2[s];
    }
    const double mean = total / static_cast<double>(n_test);
    const double var =
        std::max(0.0, total2 / static_cast<double>(n_test) - mean * mean);
    return {mean, std::sqrt(var / static_cast<double>(n_test))};
}

// ── Algorithm: split, spectral stage, ridge stage ────────────────────────
struct Algorithm1Report {
    double alpha = 0.0;
    std::size_t p = 0;
    double ridge_lambda = 0.0;
    std::size_t spike_count = 0;
    bool fallback = false;
    double weighted_mse = 0.0; // spectral stage, rank-order assignment
    RiskEstimate risk;
    theory::RatePrediction rates; // theory join at the same (spec, alpha)
};

struct Algorithm1Result {
    TrainedNetwork net;
    Algorithm1Report report;
};

inline Algorithm1Result run_algorithm1(
    const model::TargetSpec& spec, const model::PlantedWeights& weights,
    std::size_t n, std::uint64_t seed, std::size_t p = 0, double ridge_lambda = 0.0,
    const spectral::Preprocessing& prep = spectral::Preprocessing::rational(),
    const Activation& sigma = Activation::logistic_centered(),
    double gap_constant = spectral::kDefaultGapConstant, std::size_t n_test = 20000,
    int threads = 1) {
    if (n % 2 != 0) throw ValidationError("run_algorithm1: n must be even");
    const double nd = static_cast<double>(n);
    if (p == 0)
        p = static_cast<std::size_t>(std::ceil(2.0 * std::sqrt(nd) * std::log(nd)));
    if (ridge_lambda == 0.0) ridge_lambda = 1.0 / std::sqrt(nd);

    const auto data = datagen::sample_dataset(spec, weights, n, seed);
    const auto [d1, d2] = datagen::split_dataset(data);

    const auto est = spectral::spectral_estimator(d1, prep, gap_constant,
                                                  spec.m_star, threads);
    const auto rep = spectral::recovery_report(est, spec, weights);
    const auto init = spectral_init(est, p, spec.dim_d, seed ^ 0xA11Cull);

    TrainedNetwork net =
        train_readout(init.w, d2, sigma, ridge_lambda, seed ^ 0xB22Dull, threads);
    net.r = est.spike_count;
    net.z_mix = init.z_mix;
    net.w_sp = est.w_hat;
    net.random_feature_fallback = init.fallback;

    Algorithm1Result out;
    out.report.alpha = nd / static_cast<double>(spec.dim_d);
    out.report.p = p;
    out.report.ridge_lambda = ridge_lambda;
    out.report.spike_count = est.spike_count;
    out.report.fallback = init.fallback;
    out.report.weighted_mse = rep.weighted_mse;
    out.report.risk =
        excess_risk(net, spec, weights, n_test, seed ^ 0xC33Eull, threads);
    out.report.rates = theory::predict_rates(spec, out.report.alpha);
    out.net = std::move(net);
    return out;
}

// ── Effective-noise diagnostic ───────────────────────────────────────────
// Residual label variance after explaining y with the recovered directions:
// Delta_eff = Var(y - sum_{k<=r} a_k g_k(s_k)), s_k = <w_hat_k, x>. Captures
// the intrinsic noise, the unlearned indices, and the spectral
// approximation error in one number.
inline double measure_effective_noise(const model::TargetSpec& spec,
                                      const spectral::SpectralEstimate& est,
                                      const datagen::Dataset& data) {
    if (data.d != spec.dim_d)
        throw ValidationError("measure_effective_noise: dim mismatch");
    const std::size_t r = std::min<std::size_t>(est.spike_count, spec.m_star);
    KahanSum sum, sum2;
    for (std::size_t i = 0; i < data.n; ++i) {
        double fitted = 0.0;
        for (std::size_t k = 0; k < r; ++k)
            fitted += spec.a_star[k] *
                      spec.links[k](dot(est.w_hat.row(k), data.x.row(i), data.d));
        const double resid = data.y[i] - fitted;
        sum.add(resid);
        sum2.add(resid * resid);
    }
    const double mean = sum.value() / static_cast<double>(data.n);
    return sum2.value() / static_cast<double>(data.n) - mean * mean;
}

// ── Serialization ────────────────────────────────────────────────────────
// binary: magic "HNET", version u32, p u64, d u64, r u64, W, b, a,
// activation tag (u32 length + bytes), lambda f64
inline void save_network(const std::string& path, const TrainedNetwork& net) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("save_network: cannot open " + path);
    const char magic[4] = {'H', 'N', 'E', 'T'};
    const std::uint32_t version = 1;
    const std::uint64_t p = net.p, d = net.d, r = net.r;
    f.write(magic, 4);
    f.write(reinterpret_cast<const char*>(&version), sizeof version);
    f.write(reinterpret_cast<const char*>(&p), sizeof p);
    f.write(reinterpret_cast<const char*>(&d), sizeof d);
    f.write(reinterpret_cast<const char*>(&r), sizeof r);
    f.write(reinterpret_cast<const char*>(net.w.data()),
            static_cast<std::streamsize>(p * d * sizeof(double)));
    f.write(reinterpret_cast<const char*>(net.b.data()),
            static_cast<std::streamsize>(p * sizeof(double)));
    f.write(reinterpret_cast<const char*>(net.a.data()),
            static_cast<std::streamsize>(p * sizeof(double)));
    const std::uint32_t tag_len = static_cast<std::uint32_t>(net.activation.name.size());
    f.write(reinterpret_cast<const char*>(&tag_len), sizeof tag_len);
    f.write(net.activation.name.data(), tag_len);
    f.write(reinterpret_cast<const char*>(&net.ridge_lambda),
            sizeof net.ridge_lambda);
    if (!f) throw DataError("save_network: short write");
}

inline TrainedNetwork load_network(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("load_network: cannot open " + path);
    char magic[4];
    std::uint32_t version = 0;
    std::uint64_t p = 0, d = 0, r = 0;
    f.read(magic, 4);
    if (std::memcmp(magic, "HNET", 4) != 0)
        throw DataError("load_network: bad magic");
    f.read(reinterpret_cast<char*>(&version), sizeof version);
    if (version != 1) throw DataError("load_network: unsupported version");
    f.read(reinterpret_cast<char*>(&p), sizeof p);
    f.read(reinterpret_cast<char*>(&d), sizeof d);
    f.read(reinterpret_cast<char*>(&r), sizeof r);
    TrainedNetwork net;
    net.p = p;
    net.d = d;
    net.r = r;
    net.w = Matrix(p, d);
    net.b.resize(p);
    net.a.resize(p);
    f.read(reinterpret_cast<char*>(net.w.data()),
           static_cast<std::streamsize>(p * d * sizeof(double)));
    f.read(reinterpret_cast<char*>(net.b.data()),
           static_cast<std::streamsize>(p * sizeof(double)));
    f.read(reinterpret_cast<char*>(net.a.data()),
           static_cast<std::streamsize>(p * sizeof(double)));
    std::uint32_t tag_len = 0;
    f.read(reinterpret_cast<char*>(&tag_len), sizeof tag_len);
    std::string tag(tag_len, '\0');
    f.read(tag.data(), tag_len);
    f.read(reinterpret_cast<char*>(&net.ridge_lambda), sizeof net.ridge_lambda);
    if (!f) throw DataError("load_network: truncated file");
    net.activation = Activation::preset(tag);
    return net;
}

} // namespace hmlab::readout
