// theory.hpp — closed-form rate laws, the random-matrix self-consistent
// spike solver, conditional label moments, and the single-index
// free-entropy threshold.
//
// Label expectations are taken against one fixed-seed Monte Carlo pool per
// (target, noise) pair so the bulk edge and the spike equations see a
// consistent empirical measure. The solver works on the scalar functions
//   zeta_a(t)  = t (1 + a E[T/(t-T)]),      zeta_a'(t) = 1 - a E[(T/(t-T))^2],
//   spike_k:     1/a = E[(z_k^2-1) T/(t-T)]          (solutions above the
//                bulk minimizer t_bar = argmin zeta_a),
//   overlap:     m_k^2 = zeta'(t_k) / (zeta'(t_k) + a E[z_k^2 T^2/(t_k-T)^2]).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hmlab/core.hpp"
#include "hmlab/model.hpp"
#include "hmlab/numerics.hpp"
#include "hmlab/parallel.hpp"
#include "hmlab/rng.hpp"
#include "hmlab/spectral.hpp"

namespace hmlab::theory {

// ── Rate-law predictions ─────────────────────────────────────────────────
enum class Regime { scarce_heavy, rich_heavy, scarce_light, rich_light };

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::scarce_heavy: return "scarce_heavy";
        case Regime::rich_heavy: return "rich_heavy";
        case Regime::scarce_light: return "scarce_light";
        case Regime::rich_light: return "rich_light";
    }
    return "?";
}

struct RatePrediction {
    Regime regime = Regime::scarce_heavy;
    bool crossover = false; // alpha within one decade of the regime boundary
    double mse_scaling_exponent = 0.0;
    std::string mse_prefactor_law;
    std::size_t k_alpha = 0;
    std::vector<double> alpha_k; // unit-prefactor thresholds, k = 1..m*
    double alpha = 0.0;
    bool constants_absorbed = true; // Theta(.) statements with unit prefactor
};

inline RatePrediction predict_rates(const model::TargetSpec& spec, double alpha) {
    if (!(alpha > 0.0)) throw ValidationError("predict_rates: alpha > 0");
    if (spec.gamma == 0.5)
        throw ValidationError("predict_rates: gamma = 1/2 is a boundary case the "
                              "rate table excludes");

    const double gamma = spec.gamma;
    const double m = static_cast<double>(spec.m_star);
    const bool heavy = gamma > 0.5;
    const double boundary = heavy ? std::pow(m, 2.0 * gamma) : m;

    RatePrediction out;
    out.alpha = alpha;
    out.crossover = std::abs(std::log10(alpha / boundary)) <= 0.5;
    const bool rich = alpha >= boundary;
    if (heavy) {
        out.regime = rich ? Regime::rich_heavy : Regime::scarce_heavy;
        out.mse_scaling_exponent = rich ? -1.0 : (-1.0 + 1.0 / (2.0 * gamma));
        out.mse_prefactor_law = rich ? "m_star/alpha" : "alpha^(-1+1/(2*gamma))";
    } else {
        out.regime = rich ? Regime::rich_light : Regime::scarce_light;
        out.mse_scaling_exponent = rich ? -1.0 : 0.0;
        out.mse_prefactor_law = rich ? "m_star/alpha" : "1";
    }

    const double k_raw = heavy
                             ? std::pow(alpha, 1.0 / (2.0 * gamma))
                             : std::pow(alpha, 1.0 / (2.0 * gamma)) *
                                   std::pow(m, 1.0 - 1.0 / (2.0 * gamma));
    out.k_alpha = static_cast<std::size_t>(
        std::min(m, std::max(0.0, std::round(k_raw))));

    out.alpha_k.resize(spec.m_star);
    const double m_factor = std::pow(m, std::max(0.0, 1.0 - 2.0 * gamma));
    for (std::size_t k = 1; k <= spec.m_star; ++k)
        out.alpha_k[k - 1] = std::pow(static_cast<double>(k), 2.0 * gamma) * m_factor;
    return out;
}

struct MseDecomposition {
    double learned_part = 0.0;  // k_alpha / alpha, unit prefactor
    double underfit_part = 0.0; // sum_{k > k_alpha} a_k^2
    Regime regime = Regime::scarce_heavy;
    bool crossover = false;
};

inline MseDecomposition predict_mse_decomposition(const model::TargetSpec& spec,
                                                  double alpha) {
    const auto rates = predict_rates(spec, alpha);
    MseDecomposition out;
    out.regime = rates.regime;
    out.crossover = rates.crossover;
    out.learned_part = static_cast<double>(rates.k_alpha) / alpha;
    KahanSum s;
    for (std::size_t k = rates.k_alpha; k < spec.m_star; ++k)
        s.add(spec.a_star[k] * spec.a_star[k]);
    out.underfit_part = s.value();
    return out;
}

// ── Monte Carlo label pool ───────────────────────────────────────────────
// Holds y ~ N(sum_k a_k g_k(z_k), Delta) together with z_k^2 - 1 per index,
// all drawn once from a fixed seed.
class LabelPool {
  public:
    static constexpr std::size_t kDefaultSize = 1'000'000;

    LabelPool(const model::TargetSpec& spec, std::size_t size = kDefaultSize,
              std::uint64_t seed = 0xFADEDCAFEull)
        : m_(spec.m_star) {
        if (size < 1000) throw ValidationError("LabelPool: size >= 1000");
        y_.resize(size);
        z2m1_.assign(m_, std::vector<double>(size));
        Rng rng = Rng::stream(seed, 0x9001u);
        const double sqrt_delta = std::sqrt(spec.noise_delta);
        for (std::size_t i = 0; i < size; ++i) {
            KahanSum f;
            for (std::size_t k = 0; k < m_; ++k) {
                const double z = rng.next_gaussian();
                z2m1_[k][i] = z * z - 1.0;
                f.add(spec.a_star[k] * spec.links[k](z));
            }
            y_[i] = f.value() + sqrt_delta * rng.next_gaussian();
        }
    }

    std::size_t size() const { return y_.size(); }
    std::size_t m() const { return m_; }
    const std::vector<double>& labels() const { return y_; }
    // z_k^2 - 1 for concept index k (1-based, matching the hierarchy order)
    const std::vector<double>& z2m1(std::size_t k) const {
        if (k < 1 || k > m_) throw ValidationError("LabelPool: index out of range");
        return z2m1_[k - 1];
    }

    std::vector<double> preprocessed(const spectral::Preprocessing& prep) const {
        std::vector<double> t(y_.size());
        for (std::size_t i = 0; i < y_.size(); ++i) t[i] = prep(y_[i]);
        return t;
    }

  private:
    std::size_t m_;
    std::vector<double> y_;
    std::vector<std::vector<double>> z2m1_;
};

// ── Bulk edge ────────────────────────────────────────────────────────────
struct BulkEdge {
    double t_bar = 0.0;
    double lambda_edge = 0.0;
};

namespace detail {

inline double mean_ratio(const std::vector<double>& t_vals, double t) {
    KahanSum s;
    for (double tv : t_vals) s.add(tv / (t - tv));
    return s.value() / static_cast<double>(t_vals.size());
}

inline double mean_ratio_sq(const std::vector<double>& t_vals, double t) {
    KahanSum s;
    for (double tv : t_vals) {
        const double r = tv / (t - tv);
        s.add(r * r);
    }
    return s.value() / static_cast<double>(t_vals.size());
}

inline double zeta(const std::vector<double>& t_vals, double alpha, double t) {
    return t * (1.0 + alpha * mean_ratio(t_vals, t));
}

inline double zeta_prime(const std::vector<double>& t_vals, double alpha, double t) {
    return 1.0 - alpha * mean_ratio_sq(t_vals, t);
}

// E[w * T/(t-T)] for a per-sample weight vector w (z_k^2-1 or z_k^2 terms).
inline double mean_weighted_ratio(const std::vector<double>& t_vals,
                                  const std::vector<double>& w, double t) {
    KahanSum s;
    for (std::size_t i = 0; i < t_vals.size(); ++i)
        s.add(w[i] * t_vals[i] / (t - t_vals[i]));
    return s.value() / static_cast<double>(t_vals.size());
}

inline double mean_weighted_ratio_sq(const std::vector<double>& t_vals,
                                     const std::vector<double>& w, double t) {
    KahanSum s;
    for (std::size_t i = 0; i < t_vals.size(); ++i) {
        const double r = t_vals[i] / (t - t_vals[i]);
        s.add(w[i] * r * r);
    }
    return s.value() / static_cast<double>(t_vals.size());
}

} // namespace detail

// Minimizes zeta_alpha on (tau, tau + span] by a log-spaced grid plus golden
// refinement. The base point is max(tau, pool max of T) so every empirical
// denominator stays positive.
inline BulkEdge bulk_edge(const std::vector<double>& t_vals, double tau, double alpha,
                          double search_span = 0.0) {
    if (!(alpha > 0.0)) throw ValidationError("bulk_edge: alpha > 0");
    const double max_t = *std::max_element(t_vals.begin(), t_vals.end());
    const double base = std::max(tau, max_t);
    const double scale = std::max({std::abs(tau), std::abs(max_t), 1e-3});
    double span = (search_span > 0.0)
                      ? search_span
                      : 8.0 * scale * (1.0 + 2.0 * std::sqrt(alpha));

    const double eps_min = 1e-9 * scale;
    for (int expansion = 0; expansion < 4; ++expansion) {
        const int grid = 512;
        std::vector<double> eps(grid);
        const double lr = std::log(span / eps_min);
        for (int i = 0; i < grid; ++i)
            eps[i] = eps_min * std::exp(lr * i / (grid - 1.0));

        int best = 0;
        double best_val = std::numeric_limits<double>::infinity();
        for (int i = 0; i < grid; ++i) {
            const double v = detail::zeta(t_vals, alpha, base + eps[i]);
            if (v < best_val) {
                best_val = v;
                best = i;
            }
        }
        if (best == grid - 1) {
            span *= 8.0; // no interior minimum yet; widen the bracket
            continue;
        }
        const double lo = base + eps[std::max(0, best - 1)];
        const double hi = base + eps[std::min(grid - 1, best + 1)];
        const auto refined = numerics::maximize_1d(
            [&](double t) { return -detail::zeta(t_vals, alpha, t); }, lo, hi,
            1e-10 * scale, 256);
        return BulkEdge{refined.argmax, -refined.max};
    }
    throw NumericalError("bulk_edge: no interior minimum found after bracket "
                         "expansion");
}

inline BulkEdge bulk_edge(const LabelPool& pool, const spectral::Preprocessing& prep,
                          double alpha, double search_span = 0.0) {
    return bulk_edge(pool.preprocessed(prep), prep.tau, alpha, search_span);
}

// ── Spike predictions ────────────────────────────────────────────────────
struct SpikePrediction {
    std::size_t k = 0;      // concept index, 1-based
    double t = 0.0;         // solution of the self-consistent equation
    double lambda = 0.0;    // predicted eigenvalue zeta_alpha(t)
    double overlap_sq = 0.0; // predicted squared overlap m_kk^2
    int extra_roots = 0;    // sign changes beyond the retained largest root
};

struct RmtPrediction {
    double alpha = 0.0;
    double bulk_edge_t = 0.0;
    double bulk_edge_lambda = 0.0;
    std::vector<SpikePrediction> spikes; // above-threshold indices only
    std::vector<std::size_t> below_threshold; // indices with no solution

    // optional tabulated conditional moments G_k(y) on a label grid
    std::vector<double> moment_grid;
    Matrix moment_table; // m* x grid.size()
};

inline RmtPrediction solve_spikes(const model::TargetSpec& spec,
                                  const spectral::Preprocessing& prep, double alpha,
                                  const LabelPool& pool, int threads = 1) {
    if (!(spec.noise_delta > 0.0))
        throw ValidationError("solve_spikes: requires Delta > 0 (rate predictions "
                              "remain available without noise)");
    if (pool.m() != spec.m_star)
        throw ValidationError("solve_spikes: pool does not match spec");

    const std::vector<double> t_vals = pool.preprocessed(prep);
    RmtPrediction out;
    out.alpha = alpha;
    const BulkEdge edge = bulk_edge(t_vals, prep.tau, alpha);
    out.bulk_edge_t = edge.t_bar;
    out.bulk_edge_lambda = edge.lambda_edge;

    std::vector<SpikePrediction> found(spec.m_star);
    std::vector<char> has_spike(spec.m_star, 0);

    parallel_for(spec.m_star, threads, [&](std::size_t idx) {
        const std::size_t k = idx + 1;
        const auto& w = pool.z2m1(k);
        const double inv_alpha = 1.0 / alpha;
        auto f = [&](double t) {
            return detail::mean_weighted_ratio(t_vals, w, t) - inv_alpha;
        };

        // asymptotically t* ~ alpha E[(z_k^2-1) T]; scan down from well above
        double corr = 0.0;
        {
            KahanSum s;
            for (std::size_t i = 0; i < t_vals.size(); ++i) s.add(w[i] * t_vals[i]);
            corr = s.value() / static_cast<double>(t_vals.size());
        }
        const double lo = edge.t_bar * (1.0 + 1e-9) + 1e-12;
        const double hi =
            std::max(edge.t_bar * 4.0, 8.0 * alpha * std::max(corr, 0.0)) + 1.0;

        const int grid = 200;
        std::vector<double> ts(grid);
        const double lr = std::log(hi / lo);
        for (int i = 0; i < grid; ++i)
            ts[i] = lo * std::exp(lr * i / (grid - 1.0));

        // walk downward; the first sign change brackets the largest root
        int root_hi = -1;
        int sign_changes = 0;
        double f_prev = f(ts[grid - 1]);
        for (int i = grid - 2; i >= 0; --i) {
            const double fi = f(ts[i]);
            if (fi * f_prev < 0.0) {
                ++sign_changes;
                if (root_hi < 0) root_hi = i + 1;
            }
            f_prev = fi;
        }
        if (root_hi < 0) return; // below threshold

        const double t_k =
            numerics::find_root_bracketed(f, ts[root_hi - 1], ts[root_hi], 1e-12);
        const double zp = detail::zeta_prime(t_vals, alpha, t_k);
        if (zp <= 0.0) return; // at or below the edge: not an isolated spike

        // overlap denominator uses z_k^2 = (z_k^2-1) + 1
        const double wr2 = detail::mean_weighted_ratio_sq(t_vals, w, t_k) +
                           detail::mean_ratio_sq(t_vals, t_k);
        SpikePrediction sp;
        sp.k = k;
        sp.t = t_k;
        sp.lambda = detail::zeta(t_vals, alpha, t_k);
        sp.overlap_sq = zp / (zp + alpha * wr2);
        sp.extra_roots = sign_changes - 1;
        found[idx] = sp;
        has_spike[idx] = 1;
    });

    for (std::size_t idx = 0; idx < spec.m_star; ++idx) {
        if (has_spike[idx])
            out.spikes.push_back(found[idx]);
        else
            out.below_threshold.push_back(idx + 1);
    }
    return out;
}

// ── Conditional moments G_k(y) = E[z_k^2 - 1 | Y = y] ────────────────────
struct ConditionalMoment {
    double value = 0.0;
    double std_err = 0.0;
    bool out_of_support = false;
};

namespace detail {

// Shared evaluation core: given per-point (f(z), z_k^2-1, weight) arrays,
// form the kernel-weighted ratio at one label with exponent stabilization.
struct GSamples {
    std::vector<double> f;    // sum_j a_j g_j(z_j)
    std::vector<double> z2m1; // z_k^2 - 1 for the probed index
    std::vector<double> w;    // quadrature weight or 1/N
};

inline ConditionalMoment g_ratio_at(const GSamples& s, double y, double delta) {
    const double inv2d = 1.0 / (2.0 * delta);
    double emin = std::numeric_limits<double>::infinity();
    for (double fv : s.f) {
        const double e = (y - fv) * (y - fv) * inv2d;
        emin = std::min(emin, e);
    }
    if (!(emin < 700.0)) return {0.0, 0.0, true}; // all kernels underflow

    KahanSum num, den;
    for (std::size_t i = 0; i < s.f.size(); ++i) {
        const double e = (y - s.f[i]) * (y - s.f[i]) * inv2d;
        const double kw = s.w[i] * std::exp(-(e - emin));
        den.add(kw);
        num.add(kw * s.z2m1[i]);
    }
    if (den.value() <= 0.0) return {0.0, 0.0, true};
    return {num.value() / den.value(), 0.0, false};
}

// generalized-golden-ratio additive QMC sequence in dim dims
inline std::vector<double> qmc_alphas(std::size_t dims) {
    double phi = 1.5;
    for (int it = 0; it < 64; ++it)
        phi = std::pow(1.0 + phi, 1.0 / (static_cast<double>(dims) + 1.0));
    std::vector<double> a(dims);
    double p = 1.0 / phi;
    for (std::size_t j = 0; j < dims; ++j) {
        a[j] = p;
        p /= phi;
    }
    return a;
}

} // namespace detail

// Tensorized Gauss-Hermite for m* <= 4; scrambled-shift quasi Monte Carlo
// (>= 2e5 points split over 8 replicates for a spread-based standard error)
// beyond that. k is 1-based. Requires Delta > 0.
inline ConditionalMoment conditional_moment_G(const model::TargetSpec& spec,
                                              std::size_t k, double y,
                                              std::size_t qmc_points = 200'000) {
    if (!(spec.noise_delta > 0.0))
        throw ValidationError("conditional_moment_G: requires Delta > 0");
    if (k < 1 || k > spec.m_star)
        throw ValidationError("conditional_moment_G: index out of range");
    const std::size_t m = spec.m_star;

    if (m <= 4) {
        static constexpr int kNodes[5] = {0, 200, 96, 48, 28};
        const int nn = kNodes[m];
        const auto& q = numerics::gauss_hermite(nn);
        std::vector<std::size_t> idx(m, 0);
        detail::GSamples s;
        const std::size_t total = static_cast<std::size_t>(std::pow(nn, m));
        s.f.reserve(total);
        s.z2m1.reserve(total);
        s.w.reserve(total);
        for (;;) {
            double f = 0.0, w = 1.0;
            for (std::size_t j = 0; j < m; ++j) {
                const double z = q.nodes[idx[j]];
                f += spec.a_star[j] * spec.links[j](z);
                w *= q.weights[idx[j]];
            }
            const double zk = q.nodes[idx[k - 1]];
            s.f.push_back(f);
            s.z2m1.push_back(zk * zk - 1.0);
            s.w.push_back(w);
            std::size_t j = 0;
            while (j < m && ++idx[j] == static_cast<std::size_t>(nn)) {
                idx[j] = 0;
                ++j;
            }
            if (j == m) break;
        }
        return detail::g_ratio_at(s, y, spec.noise_delta);
    }

    // QMC fallback with replicate-based standard error
    const std::size_t replicates = 8;
    const std::size_t per = std::max<std::size_t>(qmc_points / replicates, 1000);
    const auto alphas = detail::qmc_alphas(m);
    Rng shift_rng = Rng::stream(0x51D5EEDull, 1);
    std::vector<double> vals;
    vals.reserve(replicates);
    std::size_t oos = 0;
    for (std::size_t rep = 0; rep < replicates; ++rep) {
        detail::GSamples s;
        s.f.resize(per);
        s.z2m1.resize(per);
        s.w.assign(per, 1.0 / static_cast<double>(per));
        std::vector<double> shift(m);
        for (std::size_t j = 0; j < m; ++j) shift[j] = shift_rng.next_unit();
        for (std::size_t i = 0; i < per; ++i) {
            double f = 0.0, zk = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                double u = shift[j] + alphas[j] * static_cast<double>(i + 1);
                u -= std::floor(u);
                u = std::min(std::max(u, 1e-15), 1.0 - 1e-15);
                const double z = numerics::normal_quantile(u);
                f += spec.a_star[j] * spec.links[j](z);
                if (j == k - 1) zk = z;
            }
            s.f[i] = f;
            s.z2m1[i] = zk * zk - 1.0;
        }
        const auto r = detail::g_ratio_at(s, y, spec.noise_delta);
        if (r.out_of_support)
            ++oos;
        else
            vals.push_back(r.value);
    }
    if (vals.empty()) return {0.0, 0.0, true};
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= std::max<std::size_t>(vals.size() - 1, 1);
    return {mean, std::sqrt(var / static_cast<double>(vals.size())),
            oos == replicates};
}

// Tabulates G_k(y) for all indices on a uniform label grid.
inline void tabulate_conditional_moments(const model::TargetSpec& spec,
                                         RmtPrediction& pred, double y_max,
                                         std::size_t grid_points = 41) {
    pred.moment_grid.resize(grid_points);
    pred.moment_table = Matrix(spec.m_star, grid_points);
    for (std::size_t i = 0; i < grid_points; ++i)
        pred.moment_grid[i] =
            -y_max + 2.0 * y_max * static_cast<double>(i) /
                         static_cast<double>(grid_points - 1);
    for (std::size_t k = 1; k <= spec.m_star; ++k)
        for (std::size_t i = 0; i < grid_points; ++i)
            pred.moment_table(k - 1, i) =
                conditional_moment_G(spec, k, pred.moment_grid[i]).value;
}

// ── Single-index free entropy ────────────────────────────────────────────
// f_RS(m) = m + log(1-m) + alpha*lambda * sum_{k>=2} (c_k^2/k!) m^k with the
// library's Hermite convention c_k = E[g He_k].
struct FreeEntropyProblem {
    std::vector<double> hermite_c; // c_0..c_K
    double lambda_snr = 1.0;
    double alpha = 1.0;
    int truncation = 12;
};

struct FreeEntropyResult {
    double m_star_overlap = 0.0; // maximizer of f_RS at the given alpha
    std::pair<double, double> alpha_it_bracket{0.0, 0.0}; // [D/lambda, c_2^{-2}/lambda]
    double d_constant = 0.0; // inf_m (-m - log(1-m)) / series(m)
    double c2 = 0.0;
    double truncation_tail = 0.0; // sum_{k>K} c_k^2/k! when computable
};

namespace detail {

inline std::vector<double> series_coeffs(const FreeEntropyProblem& p) {
    if (p.hermite_c.size() < 3)
        throw ValidationError("free_entropy: need coefficients up to order 2");
    if (std::abs(p.hermite_c[0]) > 1e-8 || std::abs(p.hermite_c[1]) > 1e-8)
        throw ValidationError("free_entropy: link must be centered and even "
                              "(c_0 = c_1 = 0)");
    if (p.hermite_c[2] == 0.0)
        throw ValidationError("free_entropy: c_2 = 0 puts the link outside the "
                              "generative-exponent-2 class");
    const std::size_t kmax = std::min<std::size_t>(
        p.hermite_c.size() - 1, static_cast<std::size_t>(std::max(2, p.truncation)));
    // s_k = c_k^2/k! for k = 2..kmax
    std::vector<double> s(kmax + 1, 0.0);
    double fact = 2.0;
    for (std::size_t k = 2; k <= kmax; ++k) {
        if (k > 2) fact *= static_cast<double>(k);
        s[k] = p.hermite_c[k] * p.hermite_c[k] / fact;
    }
    return s;
}

inline double series_eval(const std::vector<double>& s, double m) {
    double acc = 0.0;
    for (std::size_t k = s.size(); k-- > 2;) acc = (acc + s[k]) * m;
    return acc * m; // sum s_k m^k with s starting at k=2
}

} // namespace detail

inline FreeEntropyResult free_entropy_threshold(const FreeEntropyProblem& p) {
    const auto s = detail::series_coeffs(p);
    const double al = p.alpha * p.lambda_snr;

    auto f_rs = [&](double m) {
        return m + std::log1p(-m) + al * detail::series_eval(s, m);
    };
    const auto max_res = numerics::maximize_1d(f_rs, 0.0, 1.0 - 1e-9, 1e-12, 2048);

    // D = inf_{m in (0,1]} (-m - log(1-m)) / series(m), by log-spaced scan;
    // the m -> 0 limit equals c_2^{-2}.
    const double c2 = p.hermite_c[2];
    double d_const = 1.0 / (c2 * c2);
    const int grid = 4096;
    for (int i = 0; i < grid; ++i) {
        const double m = std::exp(std::log(1e-8) +
                                  (std::log(1.0 - 1e-9) - std::log(1e-8)) * i /
                                      (grid - 1.0));
        const double num = -m - std::log1p(-m);
        const double den = detail::series_eval(s, m);
        if (den > 0.0) d_const = std::min(d_const, num / den);
    }

    FreeEntropyResult out;
    out.m_star_overlap = (f_rs(max_res.argmax) > f_rs(0.0)) ? max_res.argmax : 0.0;
    if (out.m_star_overlap < 1e-12) out.m_star_overlap = 0.0;
    out.c2 = c2;
    out.d_constant = d_const;
    out.alpha_it_bracket = {d_const / p.lambda_snr, 1.0 / (c2 * c2 * p.lambda_snr)};

    // tail bound from Parseval when the full second moment is known is the
    // caller's business; report the truncated-tail proxy from the provided
    // coefficients beyond the truncation order
    double tail = 0.0, fact = 1.0;
    for (std::size_t k = 1; k < p.hermite_c.size(); ++k) {
        fact *= static_cast<double>(k);
        if (k > static_cast<std::size_t>(p.truncation))
            tail += p.hermite_c[k] * p.hermite_c[k] / fact;
    }
    out.truncation_tail = tail;
    return out;
}

// Smallest alpha whose free-entropy maximizer is nonzero, located by
// bisection between the analytic bracket edges (expanded slightly so both
// endpoints classify cleanly).
inline double find_transition_alpha(const FreeEntropyProblem& base,
                                    double m_detect = 1e-6, double rel_tol = 1e-9) {
    FreeEntropyProblem p = base;
    auto detected = [&](double alpha) {
        p.alpha = alpha;
        return free_entropy_threshold(p).m_star_overlap > m_detect;
    };
    p.alpha = 1.0;
    const auto probe = free_entropy_threshold(p);
    double lo = 0.25 * probe.alpha_it_bracket.first;
    double hi = 4.0 * probe.alpha_it_bracket.second;
    if (detected(lo)) return lo;
    if (!detected(hi))
        throw NumericalError("find_transition_alpha: no transition below the "
                             "expanded upper bracket");
    while (hi - lo > rel_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        if (detected(mid))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

} // namespace hmlab::theory
