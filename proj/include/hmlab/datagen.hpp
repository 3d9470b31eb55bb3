// datagen.hpp — planted weights, covariate/label sampling, dataset splits.
//
// Covariates are x_i ~ N(0, I_d/d) and labels y_i = f*(x_i) + sqrt(Delta) xi.
// Generation is blocked: block b of a run with seed s draws its covariates
// from Rng::stream(s, 2b) and its label noise from Rng::stream(s, 2b+1), so
// blocks can be produced independently, in any order, on any thread, with
// results that depend only on (seed, block size).
#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "hmlab/core.hpp"
#include "hmlab/model.hpp"
#include "hmlab/rng.hpp"

namespace hmlab::datagen {

inline constexpr std::size_t kDefaultBlockRows = 4096;

struct Dataset {
    std::size_t n = 0, d = 0;
    Matrix x; // n x d
    std::vector<double> y;
    std::uint64_t seed = 0;
    std::uint64_t spec_fingerprint = 0;
};

// ── Planted weights ──────────────────────────────────────────────────────
inline model::PlantedWeights sample_planted_weights(const model::TargetSpec& spec,
                                                    std::uint64_t seed) {
    if (spec.m_star > spec.dim_d)
        throw ValidationError("sample_planted_weights: m_star <= d required");
    const double scale = static_cast<double>(spec.dim_d);
    for (int attempt = 0; attempt < 2; ++attempt) {
        Rng rng = Rng::stream(seed + static_cast<std::uint64_t>(attempt), 0x57u);
        Matrix raw(spec.m_star, spec.dim_d);
        rng.fill_gaussian(raw.data(), spec.m_star * spec.dim_d);
        try {
            return model::PlantedWeights{numerics::orthonormalize_rows(raw, scale)};
        } catch (const ValidationError&) {
            if (attempt == 1) throw;
        }
    }
    throw NumericalError("sample_planted_weights: unreachable");
}

// ── Streaming block source ───────────────────────────────────────────────
class SampleStream {
  public:
    SampleStream(const model::TargetSpec& spec, const model::PlantedWeights& weights,
                 std::size_t n, std::uint64_t seed,
                 std::size_t block_rows = kDefaultBlockRows)
        : spec_(&spec), weights_(&weights), n_(n), seed_(seed),
          block_rows_(block_rows == 0 ? kDefaultBlockRows : block_rows) {
        if (n < 1) throw ValidationError("SampleStream: n >= 1");
        if (weights.d() != spec.dim_d || weights.m() != spec.m_star)
            throw ValidationError("SampleStream: weights do not match spec");
    }

    std::size_t n() const { return n_; }
    std::size_t d() const { return spec_->dim_d; }
    std::size_t block_rows() const { return block_rows_; }
    std::size_t block_count() const { return (n_ + block_rows_ - 1) / block_rows_; }
    std::size_t rows_in_block(std::size_t b) const {
        const std::size_t lo = b * block_rows_;
        return std::min(block_rows_, n_ - lo);
    }
    std::uint64_t seed() const { return seed_; }
    const model::TargetSpec& spec() const { return *spec_; }

    // Fills xbuf (rows x d, row-major) and ybuf (rows) for block b.
    void generate_block(std::size_t b, double* xbuf, double* ybuf) const {
        const std::size_t rows = rows_in_block(b);
        const std::size_t d = spec_->dim_d;
        Rng rx = Rng::stream(seed_, 2 * b);
        Rng rn = Rng::stream(seed_, 2 * b + 1);
        rx.fill_gaussian(xbuf, rows * d);
        const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
        for (std::size_t i = 0; i < rows * d; ++i) xbuf[i] *= inv_sqrt_d;

        const double sqrt_delta = std::sqrt(spec_->noise_delta);
        for (std::size_t i = 0; i < rows; ++i) {
            const double* xi = xbuf + i * d;
            KahanSum s;
            for (std::size_t k = 0; k < spec_->m_star; ++k)
                s.add(spec_->a_star[k] * spec_->links[k](dot(weights_->row(k), xi, d)));
            ybuf[i] = s.value() + sqrt_delta * rn.next_gaussian();
        }
    }

  private:
    const model::TargetSpec* spec_;
    const model::PlantedWeights* weights_;
    std::size_t n_;
    std::uint64_t seed_;
    std::size_t block_rows_;
};

// ── Materialized sampling ────────────────────────────────────────────────
inline constexpr std::size_t kDefaultMemoryBudgetBytes = 2ull << 30;

inline Dataset sample_dataset(const model::TargetSpec& spec,
                              const model::PlantedWeights& weights, std::size_t n,
                              std::uint64_t seed,
                              std::size_t memory_budget = kDefaultMemoryBudgetBytes,
                              std::size_t block_rows = kDefaultBlockRows) {
    if (n < 1) throw ValidationError("sample_dataset: n >= 1");
    const std::size_t bytes = n * spec.dim_d * sizeof(double);
    if (bytes > memory_budget)
        throw ResourceError("sample_dataset: n*d exceeds the memory budget; use "
                            "SampleStream for out-of-core consumption");

    Dataset ds;
    ds.n = n;
    ds.d = spec.dim_d;
    ds.x = Matrix(n, spec.dim_d);
    ds.y.resize(n);
    ds.seed = seed;
    ds.spec_fingerprint = spec.fingerprint();

    SampleStream stream(spec, weights, n, seed, block_rows);
    for (std::size_t b = 0; b < stream.block_count(); ++b)
        stream.generate_block(b, ds.x.row(b * stream.block_rows()),
                              ds.y.data() + b * stream.block_rows());
    return ds;
}

// ── Splits ───────────────────────────────────────────────────────────────
// Parity split: rows {0,2,...} and {1,3,...}, order preserving.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds) {
    if (ds.n % 2 != 0)
        throw ValidationError("split_dataset: n must be even (pad-or-reject: reject)");
    const std::size_t half = ds.n / 2;
    Dataset a, b;
    for (Dataset* part : {&a, &b}) {
        part->n = half;
        part->d = ds.d;
        part->x = Matrix(half, ds.d);
        part->y.resize(half);
        part->seed = ds.seed;
        part->spec_fingerprint = ds.spec_fingerprint;
    }
    for (std::size_t i = 0; i < half; ++i) {
        std::memcpy(a.x.row(i), ds.x.row(2 * i), ds.d * sizeof(double));
        std::memcpy(b.x.row(i), ds.x.row(2 * i + 1), ds.d * sizeof(double));
        a.y[i] = ds.y[2 * i];
        b.y[i] = ds.y[2 * i + 1];
    }
    return {std::move(a), std::move(b)};
}

// Seeded-shuffle variant for robustness studies.
inline std::pair<Dataset, Dataset> split_dataset_shuffled(const Dataset& ds,
                                                          std::uint64_t seed) {
    if (ds.n % 2 != 0) throw ValidationError("split_dataset_shuffled: n must be even");
    std::vector<std::size_t> perm(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) perm[i] = i;
    Rng rng = Rng::stream(seed, 0x5Au);
    for (std::size_t i = ds.n; i > 1; --i) {
        const std::size_t j = rng.next_u64() % i;
        std::swap(perm[i - 1], perm[j]);
    }
    const std::size_t half = ds.n / 2;
    Dataset a, b;
    for (Dataset* part : {&a, &b}) {
        part->n = half;
        part->d = ds.d;
        part->x = Matrix(half, ds.d);
        part->y.resize(half);
        part->seed = ds.seed;
        part->spec_fingerprint = ds.spec_fingerprint;
    }
    for (std::size_t i = 0; i < half; ++i) {
        std::memcpy(a.x.row(i), ds.x.row(perm[2 * i]), ds.d * sizeof(double));
        std::memcpy(b.x.row(i), ds.x.row(perm[2 * i + 1]), ds.d * sizeof(double));
        a.y[i] = ds.y[perm[2 * i]];
        b.y[i] = ds.y[perm[2 * i + 1]];
    }
    return {std::move(a), std::move(b)};
}

// ── Binary dump ──────────────────────────────────────────────────────────
// Little-endian file: magic "HMIX", version u32, n u64, d u64, seed u64,
// then row-major f64 X, then f64 y.
static_assert(std::endian::native == std::endian::little,
              "dataset dump assumes a little-endian host");

inline void write_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("write_dataset: cannot open " + path);
    const char magic[4] = {'H', 'M', 'I', 'X'};
    const std::uint32_t version = 1;
    const std::uint64_t n = ds.n, d = ds.d, seed = ds.seed;
    f.write(magic, 4);
    f.write(reinterpret_cast<const char*>(&version), sizeof version);
    f.write(reinterpret_cast<const char*>(&n), sizeof n);
    f.write(reinterpret_cast<const char*>(&d), sizeof d);
    f.write(reinterpret_cast<const char*>(&seed), sizeof seed);
    f.write(reinterpret_cast<const char*>(ds.x.data()),
            static_cast<std::streamsize>(ds.n * ds.d * sizeof(double)));
    f.write(reinterpret_cast<const char*>(ds.y.data()),
            static_cast<std::streamsize>(ds.n * sizeof(double)));
    if (!f) throw DataError("write_dataset: short write to " + path);
}

inline Dataset read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("read_dataset: cannot open " + path);
    char magic[4];
    std::uint32_t version = 0;
    std::uint64_t n = 0, d = 0, seed = 0;
    f.read(magic, 4);
    if (std::memcmp(magic, "HMIX", 4) != 0)
        throw DataError("read_dataset: bad magic in " + path);
    f.read(reinterpret_cast<char*>(&version), sizeof version);
    if (version != 1) throw DataError("read_dataset: unsupported version");
    f.read(reinterpret_cast<char*>(&n), sizeof n);
    f.read(reinterpret_cast<char*>(&d), sizeof d);
    f.read(reinterpret_cast<char*>(&seed), sizeof seed);
    Dataset ds;
    ds.n = n;
    ds.d = d;
    ds.seed = seed;
    ds.x = Matrix(n, d);
    ds.y.resize(n);
    f.read(reinterpret_cast<char*>(ds.x.data()),
           static_cast<std::streamsize>(n * d * sizeof(double)));
    f.read(reinterpret_cast<char*>(ds.y.data()),
           static_cast<std::streamsize>(n * sizeof(double)));
    if (!f) throw DataError("read_dataset: truncated file " + path);
    return ds;
}

} // namespace hmlab::datagen
