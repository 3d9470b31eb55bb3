// spectral.hpp — label-preprocessed spectral subspace estimation.
//
// T = sum_i T(y_i) x_i x_i^T is accumulated as blocked panel products
// X^T diag(T(y)) X. Blocks are assigned to a fixed number of reduction
// slots, each slot sums its blocks in index order, and slots merge in slot
// order, so the result is bitwise identical for any thread count (it depends
// only on the block size and slot count).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "hmlab/core.hpp"
#include "hmlab/datagen.hpp"
#include "hmlab/kernels.hpp"
#include "hmlab/model.hpp"
#include "hmlab/numerics.hpp"
#include "hmlab/parallel.hpp"

namespace hmlab::spectral {

inline constexpr std::size_t kReductionSlots = 8;

// ── Label preprocessing ──────────────────────────────────────────────────
enum class PreprocessingKind { rational, clipped_identity, custom };

class Preprocessing {
  public:
    PreprocessingKind kind = PreprocessingKind::custom;
    std::string name;
    double tau = 1.0; // sup of the support of T(Y)

    double operator()(double y) const { return fn_(y); }

    static Preprocessing rational() {
        Preprocessing p;
        p.kind = PreprocessingKind::rational;
        p.name = "rational";
        p.tau = 1.0;
        p.fn_ = [](double y) { return y / (1.0 + std::abs(y)); };
        return p;
    }

    static Preprocessing clipped_identity(double c = 1.0) {
        if (!(c > 0.0)) throw ValidationError("clipped_identity: c > 0");
        Preprocessing p;
        p.kind = PreprocessingKind::clipped_identity;
        p.name = "clipped_identity";
        p.tau = c;
        p.fn_ = [c](double y) { return std::clamp(y, -c, c); };
        return p;
    }

    static Preprocessing custom(std::function<double(double)> fn, double tau,
                                std::string name) {
        Preprocessing p;
        p.kind = PreprocessingKind::custom;
        p.name = std::move(name);
        p.tau = tau;
        p.fn_ = std::move(fn);
        return p;
    }

    static Preprocessing preset(const std::string& name, double clip_c = 1.0) {
        if (name == "rational") return rational();
        if (name == "clipped_identity") return clipped_identity(clip_c);
        throw ValidationError("unknown preprocessing preset: " + name);
    }

    // Same transform scaled by a positive constant; scales every eigenvalue
    // of T by the same constant.
    Preprocessing scaled(double c) const {
        if (!(c > 0.0)) throw ValidationError("Preprocessing::scaled: c > 0");
        Preprocessing p = *this;
        p.name = name + "*" + std::to_string(c);
        p.tau = tau * c;
        auto base = fn_;
        p.fn_ = [base, c](double y) { return c * base(y); };
        return p;
    }

    // Boundedness probe on a dense label grid.
    void validate(double grid_halfwidth = 50.0, double bound = 1e6) const {
        for (int i = 0; i < 4096; ++i) {
            const double y = -grid_halfwidth + 2.0 * grid_halfwidth * i / 4095.0;
            const double t = fn_(y);
            if (!std::isfinite(t) || std::abs(t) > bound)
                throw ValidationError("preprocessing is unbounded on the label grid");
        }
    }

  private:
    std::function<double(double)> fn_;
};

// ── T accumulation ───────────────────────────────────────────────────────
struct BuildStats {
    std::size_t n = 0;
    std::size_t nonzero = 0; // samples with |T(y)| > 1e-12
};

namespace detail {

// Generic over a block source: src(b, xbuf, ybuf) fills block b; the
// materialized overload passes views straight into the dataset.
template <typename BlockFn>
Matrix build_t_blocks(std::size_t n, std::size_t d, std::size_t block_rows,
                      const Preprocessing& prep, BlockFn&& fill, int threads,
                      BuildStats* stats) {
    const std::size_t nblocks = (n + block_rows - 1) / block_rows;
    const std::size_t nslots = std::min(kReductionSlots, nblocks);

    std::vector<Matrix> slot_acc(nslots);
    std::vector<std::size_t> slot_nonzero(nslots, 0);

    parallel_for(nslots, threads, [&](std::size_t s) {
        Matrix acc(d, d);
        std::vector<double> xbuf(block_rows * d), ybuf(block_rows), wbuf(block_rows);
        std::vector<double> scratch;
        const std::size_t b_lo = s * nblocks / nslots;
        const std::size_t b_hi = (s + 1) * nblocks / nslots;
        std::size_t nonzero = 0;
        for (std::size_t b = b_lo; b < b_hi; ++b) {
            const std::size_t rows = std::min(block_rows, n - b * block_rows);
            const double* xp = fill(b, xbuf.data(), ybuf.data(), rows);
            for (std::size_t i = 0; i < rows; ++i) {
                const double t = prep(ybuf[i]);
                if (!std::isfinite(t))
                    throw DataError("build_T: preprocessed label is not finite at row " +
                                    std::to_string(b * block_rows + i));
                wbuf[i] = t;
                if (std::abs(t) > 1e-12) ++nonzero;
            }
            kernels::sym_rank_update(acc.data(), d, xp, wbuf.data(), rows, scratch);
        }
        slot_acc[s] = std::move(acc);
        slot_nonzero[s] = nonzero;
    });

    Matrix t = std::move(slot_acc[0]);
    for (std::size_t s = 1; s < nslots; ++s) {
        const double* src = slot_acc[s].data();
        double* dst = t.data();
        for (std::size_t i = 0; i < d * d; ++i) dst[i] += src[i];
    }
    kernels::mirror_upper_to_lower(t.data(), d);

    if (stats) {
        stats->n = n;
        stats->nonzero = 0;
        for (std::size_t s = 0; s < nslots; ++s) stats->nonzero += slot_nonzero[s];
    }
    return t;
}

} // namespace detail

inline Matrix build_T(const datagen::SampleStream& stream, const Preprocessing& prep,
                      int threads = 1, BuildStats* stats = nullptr) {
    return detail::build_t_blocks(
        stream.n(), stream.d(), stream.block_rows(), prep,
        [&](std::size_t b, double* xbuf, double* ybuf, std::size_t) {
            stream.generate_block(b, xbuf, ybuf);
            return xbuf;
        },
        threads, stats);
}

inline Matrix build_T(const datagen::Dataset& ds, const Preprocessing& prep,
                      int threads = 1, BuildStats* stats = nullptr,
                      std::size_t block_rows = datagen::kDefaultBlockRows) {
    return detail::build_t_blocks(
        ds.n, ds.d, block_rows, prep,
        [&, block_rows](std::size_t b, double*, double* ybuf, std::size_t rows) {
            const std::size_t lo = b * block_rows;
            for (std::size_t i = 0; i < rows; ++i) ybuf[i] = ds.y[lo + i];
            return ds.x.row(lo); // panel points straight into the dataset
        },
        threads, stats);
}

// ── Spike detection ──────────────────────────────────────────────────────
// r = smallest i >= 0 with lambda_{i+1} - lambda_{i+2} < gap_constant/sqrt(d)
// (1-indexed eigenvalues, so i = 0 compares the top pair); capped at r_max.
inline std::size_t detect_spikes(const std::vector<double>& eigenvalues,
                                 std::size_t d, double gap_constant,
                                 std::size_t r_max) {
    if (eigenvalues.size() < 2)
        throw ValidationError("detect_spikes: need at least two eigenvalues");
    if (!(gap_constant > 0.0))
        throw ValidationError("detect_spikes: gap_constant > 0");
    const double thr = gap_constant / std::sqrt(static_cast<double>(d));
    const std::size_t cap = std::min(r_max, eigenvalues.size() - 2);
    for (std::size_t i = 0; i <= cap; ++i) {
        if (i + 1 >= eigenvalues.size()) break;
        if (eigenvalues[i] - eigenvalues[i + 1] < thr) return i;
    }
    // every checkable gap stayed above threshold: saturate at the cap,
    // never past the available eigenvector count
    return std::min(r_max, eigenvalues.size() - 1);
}

inline std::size_t detect_spikes(const numerics::EigenDecomposition& eig,
                                 std::size_t d, double gap_constant,
                                 std::size_t r_max) {
    return detect_spikes(eig.eigenvalues, d, gap_constant, r_max);
}

// ── Spectral estimate ────────────────────────────────────────────────────
inline constexpr double kDefaultGapConstant = 3.0;

struct SpectralEstimate {
    std::vector<double> eigenvalues; // all d, descending
    std::size_t spike_count = 0;
    Matrix w_hat; // spike_count x d, rows with ||w||^2 = d
    double gap_threshold_used = 0.0;

    // Raw consecutive gaps, for auditing the detection rule.
    std::vector<double> gaps() const {
        std::vector<double> g;
        if (eigenvalues.size() < 2) return g;
        g.resize(eigenvalues.size() - 1);
        for (std::size_t i = 0; i + 1 < eigenvalues.size(); ++i)
            g[i] = eigenvalues[i] - eigenvalues[i + 1];
        return g;
    }
};

namespace detail {

inline SpectralEstimate estimate_from_t(const Matrix& t, std::size_t n,
                                        const BuildStats& stats, double gap_constant,
                                        std::size_t r_max) {
    const std::size_t d = t.rows();
    if (stats.n > 0 &&
        static_cast<double>(stats.nonzero) < 0.01 * static_cast<double>(stats.n))
        throw ValidationError("preprocessing is degenerate: T(y) vanishes on more "
                              "than 99% of the sample");
    (void)n;
    const auto eig = numerics::sym_eig(t);
    const std::size_t r = detect_spikes(eig.eigenvalues, d, gap_constant, r_max);

    SpectralEstimate est;
    est.eigenvalues = eig.eigenvalues;
    est.spike_count = r;
    est.gap_threshold_used = gap_constant / std::sqrt(static_cast<double>(d));
    est.w_hat = Matrix(r, d);
    const double scale = std::sqrt(static_cast<double>(d));
    for (std::size_t k = 0; k < r; ++k)
        for (std::size_t i = 0; i < d; ++i) est.w_hat(k, i) = scale * eig.vectors(i, k);
    return est;
}

} // namespace detail

inline SpectralEstimate spectral_estimator(const datagen::SampleStream& stream,
                                           const Preprocessing& prep,
                                           double gap_constant = kDefaultGapConstant,
                                           std::size_t r_max = 0, int threads = 1) {
    if (r_max == 0) r_max = std::max<std::size_t>(1, stream.d() / 4);
    BuildStats stats;
    const Matrix t = build_T(stream, prep, threads, &stats);
    return detail::estimate_from_t(t, stream.n(), stats, gap_constant, r_max);
}

inline SpectralEstimate spectral_estimator(const datagen::Dataset& ds,
                                           const Preprocessing& prep,
                                           double gap_constant = kDefaultGapConstant,
                                           std::size_t r_max = 0, int threads = 1) {
    if (r_max == 0) r_max = std::max<std::size_t>(1, ds.d / 4);
    BuildStats stats;
    const Matrix t = build_T(ds, prep, threads, &stats);
    return detail::estimate_from_t(t, ds.n, stats, gap_constant, r_max);
}

// ── Recovery metrics ─────────────────────────────────────────────────────
// mse_k(w) = ||w w^T - w* w*^T||_F^2 / d^2, evaluated through the identity
// ||a a^T - b b^T||_F^2 = ||a||^4 + ||b||^4 - 2 <a,b>^2 (O(d) per pair).
// Estimator row j is assigned to target index j (hierarchy order); indices
// beyond the spike count are scored against the zero predictor (mse = 1).
struct RecoveryReport {
    Matrix overlaps;                   // r x m*, |<w_hat_j, w*_k>| / d
    std::vector<double> mse_per_index; // m*, in [0, 2]
    double weighted_mse = 0.0;
    std::vector<std::size_t> greedy_assignment; // row -> argmax-overlap index
};

inline double pair_mse(const double* a, const double* b, std::size_t d) {
    const double na = norm2_sq(a, d), nb = norm2_sq(b, d);
    const double ip = dot(a, b, d);
    const double dd = static_cast<double>(d) * static_cast<double>(d);
    return (na * na + nb * nb - 2.0 * ip * ip) / dd;
}

inline RecoveryReport recovery_report(const SpectralEstimate& est,
                                      const model::TargetSpec& spec,
                                      const model::PlantedWeights& weights) {
    if (weights.d() != spec.dim_d || weights.m() != spec.m_star)
        throw ValidationError("recovery_report: weights do not match spec");
    if (est.spike_count > 0 && est.w_hat.cols() != spec.dim_d)
        throw ValidationError("recovery_report: estimate dimension mismatch");

    const std::size_t r = est.spike_count, m = spec.m_star, d = spec.dim_d;
    RecoveryReport rep;
    rep.overlaps = Matrix(r, m);
    for (std::size_t j = 0; j < r; ++j)
        for (std::size_t k = 0; k < m; ++k)
            rep.overlaps(j, k) =
                std::abs(dot(est.w_hat.row(j), weights.row(k), d)) / d;

    rep.mse_per_index.resize(m);
    for (std::size_t k = 0; k < m; ++k)
        rep.mse_per_index[k] =
            (k < r) ? pair_mse(est.w_hat.row(k), weights.row(k), d) : 1.0;

    KahanSum s;
    for (std::size_t k = 0; k < m; ++k)
        s.add(spec.a_star[k] * spec.a_star[k] * rep.mse_per_index[k]);
    rep.weighted_mse = s.value();

    // diagnostic greedy max-overlap assignment
    rep.greedy_assignment.assign(r, m);
    std::vector<bool> row_used(r, false), col_used(m, false);
    for (std::size_t step = 0; step < std::min(r, m); ++step) {
        double best = -1.0;
        std::size_t bj = 0, bk = 0;
        for (std::size_t j = 0; j < r; ++j) {
            if (row_used[j]) continue;
            for (std::size_t k = 0; k < m; ++k) {
                if (col_used[k]) continue;
                if (rep.overlaps(j, k) > best) {
                    best = rep.overlaps(j, k);
                    bj = j;
                    bk = k;
                }
            }
        }
        row_used[bj] = true;
        col_used[bk] = true;
        rep.greedy_assignment[bj] = bk;
    }
    return rep;
}

// ── k-critical threshold measurement ─────────────────────────────────────
// Smallest grid alpha whose median (over seeds) squared overlap between the
// rank-assigned estimator row and w*_k exceeds overlap_floor; +inf if never.
// The batched form shares one sweep across all requested indices.
inline std::vector<double> measure_k_thresholds(
    const model::TargetSpec& spec, const model::PlantedWeights& weights,
    const Preprocessing& prep, const std::vector<std::size_t>& ks,
    const std::vector<double>& alpha_grid, double overlap_floor, int seeds,
    std::uint64_t base_seed = 1, double gap_constant = kDefaultGapConstant,
    int threads = 1) {
    if (alpha_grid.empty()) throw ValidationError("measure_k_thresholds: empty grid");
    for (std::size_t i = 1; i < alpha_grid.size(); ++i)
        if (!(alpha_grid[i] > alpha_grid[i - 1]))
            throw ValidationError("measure_k_thresholds: grid must be increasing");
    if (seeds < 1) throw ValidationError("measure_k_thresholds: seeds >= 1");
    for (std::size_t k : ks)
        if (k < 1 || k > spec.m_star)
            throw ValidationError("measure_k_thresholds: index out of range");

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> thresholds(ks.size(), inf);

    for (std::size_t ai = 0; ai < alpha_grid.size(); ++ai) {
        bool all_found = true;
        for (double t : thresholds) all_found = all_found && (t < inf);
        if (all_found) break;

        const std::size_t n =
            std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(
                                         alpha_grid[ai] * spec.dim_d)));
        // median over seeds of squared overlap, per requested k
        std::vector<std::vector<double>> ov(ks.size(),
                                            std::vector<double>(seeds, 0.0));
        for (int s = 0; s < seeds; ++s) {
            const std::uint64_t cell =
                hmlab::detail::mix64(base_seed ^ (0x9E3779B97F4A7C15ull * (ai + 1)) ^
                              (0xC2B2AE3D27D4EB4Full * (s + 1)));
            datagen::SampleStream stream(spec, weights, n, cell);
            const auto est =
                spectral_estimator(stream, prep, gap_constant, spec.m_star, threads);
            for (std::size_t q = 0; q < ks.size(); ++q) {
                const std::size_t k = ks[q];
                if (est.spike_count >= k) {
                    const double o =
                        dot(est.w_hat.row(k - 1), weights.row(k - 1), spec.dim_d) /
                        static_cast<double>(spec.dim_d);
                    ov[q][s] = o * o;
                }
            }
        }
        for (std::size_t q = 0; q < ks.size(); ++q) {
            if (thresholds[q] < inf) continue;
            std::vector<double> v = ov[q];
            std::sort(v.begin(), v.end());
            const double med = (seeds % 2 == 1)
                                   ? v[seeds / 2]
                                   : 0.5 * (v[seeds / 2 - 1] + v[seeds / 2]);
            if (med > overlap_floor) thresholds[q] = alpha_grid[ai];
        }
    }
    return thresholds;
}

inline double measure_k_threshold(const model::TargetSpec& spec,
                                  const model::PlantedWeights& weights,
                                  const Preprocessing& prep, std::size_t k,
                                  const std::vector<double>& alpha_grid,
                                  double overlap_floor, int seeds,
                                  std::uint64_t base_seed = 1,
                                  double gap_constant = kDefaultGapConstant,
                                  int threads = 1) {
    return measure_k_thresholds(spec, weights, prep, {k}, alpha_grid, overlap_floor,
                                seeds, base_seed, gap_constant, threads)[0];
}

// ── Gradient-descent power iteration ─────────────────────────────────────
// Orthogonalized simultaneous iteration with per-step QR on M = I + s T/g,
// where g is a Gershgorin bound on |lambda|(T); with s > 0 the iteration
// amplifies the top of the spectrum, matching the early GD dynamics on the
// first-layer weights. Rows of the returned frame have ||row||^2 = d.
inline Matrix gd_power_iteration_on(const Matrix& t, std::size_t k_dirs, int steps,
                                    double step_sign, std::uint64_t seed) {
    const std::size_t d = t.rows();
    if (k_dirs < 1 || k_dirs > d)
        throw ValidationError("gd_power_iteration: bad direction count");
    if (steps < 0) throw ValidationError("gd_power_iteration: steps >= 0");

    double gersh = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += std::abs(t(i, j));
        gersh = std::max(gersh, s);
    }
    if (gersh == 0.0) gersh = 1.0;
    const double scale = (step_sign >= 0.0 ? 1.0 : -1.0) / gersh;

    Rng rng = Rng::stream(seed, 0x6Du);
    Matrix q(k_dirs, d);
    rng.fill_gaussian(q.data(), k_dirs * d);
    q = numerics::orthonormalize_rows(q, static_cast<double>(d));

    Matrix tq(k_dirs, d);
    for (int it = 0; it < steps; ++it) {
        std::fill(tq.data(), tq.data() + k_dirs * d, 0.0);
        kernels::gemm_abt(tq.data(), q.data(), t.data(), k_dirs, d, d);
        for (std::size_t i = 0; i < k_dirs * d; ++i)
            q.data()[i] += scale * tq.data()[i];
        q = numerics::orthonormalize_rows(q, static_cast<double>(d));
    }
    return q;
}

inline Matrix gd_power_iteration(const datagen::SampleStream& stream,
                                 const Preprocessing& prep, std::size_t k_dirs,
                                 int steps, double step_sign, std::uint64_t seed,
                                 int threads = 1) {
    const Matrix t = build_T(stream, prep, threads);
    return gd_power_iteration_on(t, k_dirs, steps, step_sign, seed);
}

// ── Spectrum histogram export ────────────────────────────────────────────
// CSV columns (bin_left, bin_right, density) plus a sidecar list with the
// top eigenvalues.
inline void write_spectrum_csv(const std::string& path,
                               const std::vector<double>& eigenvalues,
                               std::size_t bins = 100) {
    if (eigenvalues.empty()) throw ValidationError("write_spectrum_csv: empty input");
    std::ofstream f(path);
    if (!f) throw DataError("write_spectrum_csv: cannot open " + path);
    const auto [mn_it, mx_it] =
        std::minmax_element(eigenvalues.begin(), eigenvalues.end());
    double lo = *mn_it, hi = *mx_it;
    if (hi == lo) hi = lo + 1.0;
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<std::size_t> count(bins, 0);
    for (double v : eigenvalues) {
        auto b = static_cast<std::size_t>((v - lo) / width);
        if (b >= bins) b = bins - 1;
        ++count[b];
    }
    f.precision(17);
    f << "bin_left,bin_right,density\n";
    const double norm = 1.0 / (static_cast<double>(eigenvalues.size()) * width);
    for (std::size_t b = 0; b < bins; ++b)
        f << lo + b * width << "," << lo + (b + 1) * width << ","
          << static_cast<double>(count[b]) * norm << "\n";
}

inline void write_top_eigenvalues_csv(const std::string& path,
                                      const std::vector<double>& eigenvalues,
                                      std::size_t top) {
    std::ofstream f(path);
    if (!f) throw DataError("write_top_eigenvalues_csv: cannot open " + path);
    f.precision(17);
    f << "rank,eigenvalue\n";
    for (std::size_t i = 0; i < std::min(top, eigenvalues.size()); ++i)
        f << (i + 1) << "," << eigenvalues[i] << "\n";
}

} // namespace hmlab::spectral
