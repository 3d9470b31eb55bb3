// harness.hpp — experiment orchestration: plain-text config blocks, sweeps
// over (alpha, seed) cells, scaling-law fits, and CSV/JSON emission with a
// manifest carrying the config hash and a determinism hash.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmlab/core.hpp"
#include "hmlab/datagen.hpp"
#include "hmlab/model.hpp"
#include "hmlab/readout.hpp"
#include "hmlab/spectral.hpp"
#include "hmlab/theory.hpp"

namespace hmlab::harness {

inline constexpr const char* kArtifactVersion = "0.1.0";

// ── Config file format ───────────────────────────────────────────────────
// Nested blocks of key = value pairs; '#' starts a comment:
//   target { gamma = 1.3  m_star = 10  d = 400  delta = 0.1  link = he2 }
using RawConfig = std::map<std::string, std::map<std::string, std::string>>;

inline RawConfig parse_config_text(const std::string& text) {
    RawConfig cfg;
    std::istringstream in(text);
    std::string line, block;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) {
            if (tok == "}") {
                if (block.empty())
                    throw ValidationError("config: stray '}' at line " +
                                          std::to_string(lineno));
                block.clear();
            } else if (tok == "{") {
                throw ValidationError("config: '{' without a block name at line " +
                                      std::to_string(lineno));
            } else {
                std::string next;
                if (!(ls >> next))
                    throw ValidationError("config: dangling token '" + tok +
                                          "' at line " + std::to_string(lineno));
                if (next == "{") {
                    if (!block.empty())
                        throw ValidationError("config: nested block at line " +
                                              std::to_string(lineno));
                    block = tok;
                } else if (next == "=") {
                    if (block.empty())
                        throw ValidationError("config: key outside a block at line " +
                                              std::to_string(lineno));
                    std::string value;
                    if (!(ls >> value))
                        throw ValidationError("config: missing value for '" + tok +
                                              "' at line " + std::to_string(lineno));
                    cfg[block][tok] = value;
                } else {
                    throw ValidationError("config: expected '{' or '=' after '" +
                                          tok + "' at line " +
                                          std::to_string(lineno));
                }
            }
        }
    }
    if (!block.empty()) throw ValidationError("config: unterminated block");
    return cfg;
}

inline RawConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("config: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

namespace detail {

inline std::string get_str(const RawConfig& c, const std::string& block,
                           const std::string& key, const std::string& dflt) {
    auto b = c.find(block);
    if (b == c.end()) return dflt;
    auto k = b->second.find(key);
    return k == b->second.end() ? dflt : k->second;
}

inline double get_num(const RawConfig& c, const std::string& block,
                      const std::string& key, double dflt) {
    const std::string s = get_str(c, block, key, "");
    if (s.empty()) return dflt;
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config: bad numeric value '" + s + "' for " + block +
                              "." + key);
    }
}

} // namespace detail

struct ExperimentConfig {
    // target block
    double gamma = 1.3;
    std::size_t m_star = 10;
    std::size_t d = 400;
    double delta = 0.1;
    std::string link = "he2";
    std::uint64_t seed = 1;
    // estimator block
    std::string preprocessing = "rational";
    double clip_c = 1.0;
    double gap_constant = spectral::kDefaultGapConstant;
    std::size_t r_max = 0; // 0 -> m_star
    // sweep block
    double alpha_start = 10.0;
    double alpha_stop = 300.0;
    std::size_t alpha_points = 8;
    int seeds = 10;
    // network block
    bool network_enabled = false;
    std::size_t p = 0;       // 0 -> ceil(2 sqrt(n) log n)
    double ridge_lambda = 0; // 0 -> 1/sqrt(n)
    std::string activation = "logistic_centered";
    std::size_t n_test = 20000;
    // theory block
    bool rmt = false;
    std::size_t pool_size = theory::LabelPool::kDefaultSize;
    std::size_t moment_grid = 0; // label-grid points for tabulated G_k (0 = off)
    // output block
    std::string out_dir = "out";
    bool spectra = false;
    std::size_t histogram_bins = 100;

    model::TargetSpec target_spec() const {
        return model::make_scale_free_target(m_star, gamma, model::link_preset(link),
                                             delta, d);
    }
    spectral::Preprocessing prep() const {
        return spectral::Preprocessing::preset(preprocessing, clip_c);
    }
    std::size_t effective_r_max() const { return r_max == 0 ? m_star : r_max; }

    std::vector<double> alpha_grid() const {
        std::vector<double> g(alpha_points);
        if (alpha_points == 1) {
            g[0] = alpha_start;
            return g;
        }
        const double lr = std::log(alpha_stop / alpha_start);
        for (std::size_t i = 0; i < alpha_points; ++i)
            g[i] = alpha_start *
                   std::exp(lr * static_cast<double>(i) /
                            static_cast<double>(alpha_points - 1));
        return g;
    }

    // canonical serialization of result-affecting fields only
    std::string canonical() const {
        std::ostringstream os;
        os.precision(17);
        os << "gamma=" << gamma << ";m_star=" << m_star << ";d=" << d
           << ";delta=" << delta << ";link=" << link << ";seed=" << seed
           << ";prep=" << preprocessing << ";clip_c=" << clip_c
           << ";gap=" << gap_constant << ";r_max=" << r_max
           << ";a0=" << alpha_start << ";a1=" << alpha_stop
           << ";ap=" << alpha_points << ";seeds=" << seeds
           << ";net=" << network_enabled << ";p=" << p << ";lam=" << ridge_lambda
           << ";act=" << activation << ";n_test=" << n_test << ";rmt=" << rmt
           << ";pool=" << pool_size << ";mgrid=" << moment_grid;
        return os.str();
    }
    std::uint64_t config_hash() const { return fnv1a(canonical()); }
};

inline ExperimentConfig load_config(const RawConfig& raw) {
    ExperimentConfig c;
    // the noise level is never guessed: configs must state it
    if (detail::get_str(raw, "target", "delta", "").empty())
        throw ValidationError("config: target.delta is required");
    c.gamma = detail::get_num(raw, "target", "gamma", c.gamma);
    c.m_star = static_cast<std::size_t>(detail::get_num(raw, "target", "m_star",
                                                        static_cast<double>(c.m_star)));
    c.d = static_cast<std::size_t>(
        detail::get_num(raw, "target", "d", static_cast<double>(c.d)));
    c.delta = detail::get_num(raw, "target", "delta", c.delta);
    c.link = detail::get_str(raw, "target", "link", c.link);
    c.seed = static_cast<std::uint64_t>(
        detail::get_num(raw, "target", "seed", static_cast<double>(c.seed)));

    c.preprocessing = detail::get_str(raw, "estimator", "preprocessing",
                                      c.preprocessing);
    c.clip_c = detail::get_num(raw, "estimator", "clip_c", c.clip_c);
    c.gap_constant = detail::get_num(raw, "estimator", "gap_constant", c.gap_constant);
    c.r_max = static_cast<std::size_t>(
        detail::get_num(raw, "estimator", "r_max", static_cast<double>(c.r_max)));

    c.alpha_start = detail::get_num(raw, "sweep", "alpha_start", c.alpha_start);
    c.alpha_stop = detail::get_num(raw, "sweep", "alpha_stop", c.alpha_stop);
    c.alpha_points = static_cast<std::size_t>(detail::get_num(
        raw, "sweep", "alpha_points", static_cast<double>(c.alpha_points)));
    c.seeds = static_cast<int>(
        detail::get_num(raw, "sweep", "seeds", static_cast<double>(c.seeds)));

    c.network_enabled =
        detail::get_str(raw, "network", "enabled", "false") == "true";
    c.p = static_cast<std::size_t>(
        detail::get_num(raw, "network", "p", static_cast<double>(c.p)));
    c.ridge_lambda = detail::get_num(raw, "network", "lambda", c.ridge_lambda);
    c.activation = detail::get_str(raw, "network", "activation", c.activation);
    c.n_test = static_cast<std::size_t>(
        detail::get_num(raw, "network", "n_test", static_cast<double>(c.n_test)));

    c.rmt = detail::get_str(raw, "theory", "rmt", "false") == "true";
    c.pool_size = static_cast<std::size_t>(detail::get_num(
        raw, "theory", "pool_size", static_cast<double>(c.pool_size)));
    c.moment_grid = static_cast<std::size_t>(detail::get_num(
        raw, "theory", "moment_grid", static_cast<double>(c.moment_grid)));

    c.out_dir = detail::get_str(raw, "output", "dir", c.out_dir);
    c.spectra = detail::get_str(raw, "output", "spectra", "false") == "true";
    c.histogram_bins = static_cast<std::size_t>(detail::get_num(
        raw, "output", "histogram_bins", static_cast<double>(c.histogram_bins)));

    // validation
    if (c.alpha_points < 1) throw ValidationError("config: alpha_points >= 1");
    if (c.alpha_points > 1 && !(c.alpha_stop > c.alpha_start))
        throw ValidationError("config: alpha grid must be strictly increasing");
    if (c.seeds < 1) throw ValidationError("config: seeds >= 1");
    model::link_preset(c.link);            // resolves or throws
    spectral::Preprocessing::preset(c.preprocessing, c.clip_c);
    readout::Activation::preset(c.activation);
    return c;
}

inline ExperimentConfig load_config_file(const std::string& path,
                                         bool paper_scale = false) {
    ExperimentConfig c = load_config(parse_config_file(path));
    if (paper_scale) {
        c.d = 1000;
        c.seeds = 70;
    }
    return c;
}

// ── Sweep rows ───────────────────────────────────────────────────────────
struct SweepRow {
    double alpha = 0.0;
    int seed_index = 0;
    std::size_t spike_count = 0;
    std::vector<double> overlap;  // m*: rank-assigned |<w_hat_k, w*_k>|/d
    std::vector<double> mse;      // m*
    double weighted_mse = std::numeric_limits<double>::quiet_NaN();
    double excess_risk = std::numeric_limits<double>::quiet_NaN();
    double risk_stderr = std::numeric_limits<double>::quiet_NaN();
    std::string regime;
    double predicted_exponent = std::numeric_limits<double>::quiet_NaN();
    std::size_t k_alpha = 0;
    double predicted_spike_count = std::numeric_limits<double>::quiet_NaN();
    double predicted_lambda_edge = std::numeric_limits<double>::quiet_NaN();
    double wall_time_ms = 0.0;
    std::string error;
};

inline std::uint64_t cell_seed(std::uint64_t base, std::size_t alpha_index,
                               int seed_index) {
    return hmlab::detail::mix64(base ^ (0x9E3779B97F4A7C15ull * (alpha_index + 1)) ^
                                (0xC2B2AE3D27D4EB4Full *
                                 static_cast<std::uint64_t>(seed_index + 1)));
}

struct SweepOutput {
    std::vector<SweepRow> rows;
    // per-alpha side artifacts
    std::vector<double> alphas;
    std::vector<theory::RmtPrediction> rmt; // empty unless cfg.rmt
    std::vector<std::vector<double>> spectra; // first-seed eigenvalues per alpha
};

// One row per (alpha, seed) cell. Data per cell is generated from a seed
// mixed from (target.seed, alpha index, seed index); reruns of the same
// config are bit-identical apart from wall_time_ms.
inline SweepOutput run_sweep(const ExperimentConfig& cfg, int threads = 1) {
    const auto spec = cfg.target_spec();
    const auto weights = datagen::sample_planted_weights(spec, cfg.seed);
    const auto prep = cfg.prep();
    const auto alphas = cfg.alpha_grid();

    SweepOutput out;
    out.alphas = alphas;
    if (cfg.rmt) out.rmt.resize(alphas.size());
    if (cfg.spectra) out.spectra.resize(alphas.size());

    std::optional<theory::LabelPool> pool;
    if (cfg.rmt) {
        pool.emplace(spec, cfg.pool_size, 0xFADEDCAFEull);
        for (std::size_t ai = 0; ai < alphas.size(); ++ai)
            out.rmt[ai] = theory::solve_spikes(spec, prep, alphas[ai], *pool, threads);
    }

    // cells on a worker pool; each cell is independent and writes its own
    // row slot, so ordering and values never depend on the worker count
    const std::size_t n_cells = alphas.size() * static_cast<std::size_t>(cfg.seeds);
    out.rows.resize(n_cells);
    const int cell_threads = threads;
    const int inner_threads = 1;

    parallel_for(n_cells, cell_threads, [&](std::size_t cell) {
        const std::size_t ai = cell / static_cast<std::size_t>(cfg.seeds);
        const int si = static_cast<int>(cell % static_cast<std::size_t>(cfg.seeds));
        const double alpha = alphas[ai];
        {
            SweepRow row;
            row.alpha = alpha;
            row.seed_index = si;
            row.overlap.assign(spec.m_star, 0.0);
            row.mse.assign(spec.m_star, 1.0);
            const auto t0 = std::chrono::steady_clock::now();
            try {
                const auto rates = theory::predict_rates(spec, alpha);
                row.regime = theory::regime_name(rates.regime);
                row.predicted_exponent = rates.mse_scaling_exponent;
                row.k_alpha = rates.k_alpha;
                if (cfg.rmt) {
                    row.predicted_spike_count =
                        static_cast<double>(out.rmt[ai].spikes.size());
                    row.predicted_lambda_edge = out.rmt[ai].bulk_edge_lambda;
                }

                const std::uint64_t ds_seed = cell_seed(cfg.seed, ai, si);
                if (cfg.network_enabled) {
                    std::size_t n = static_cast<std::size_t>(
                        std::llround(alpha * static_cast<double>(cfg.d)));
                    if (n % 2 != 0) ++n;
                    const auto res = readout::run_algorithm1(
                        spec, weights, n, ds_seed, cfg.p, cfg.ridge_lambda, prep,
                        readout::Activation::preset(cfg.activation),
                        cfg.gap_constant, cfg.n_test, inner_threads);
                    row.spike_count = res.report.spike_count;
                    row.weighted_mse = res.report.weighted_mse;
                    row.excess_risk = res.report.risk.risk;
                    row.risk_stderr = res.report.risk.std_err;
                    for (std::size_t k = 0; k < res.report.spike_count; ++k) {
                        const double o = dot(res.net.w_sp.row(k), weights.row(k),
                                             cfg.d) /
                                         static_cast<double>(cfg.d);
                        row.overlap[k] = std::abs(o);
                    }
                    // mse columns from the spectral stage
                    for (std::size_t k = 0; k < spec.m_star; ++k)
                        row.mse[k] =
                            (k < res.report.spike_count)
                                ? spectral::pair_mse(res.net.w_sp.row(k),
                                                     weights.row(k), cfg.d)
                                : 1.0;
                } else {
                    const std::size_t n = std::max<std::size_t>(
                        2, static_cast<std::size_t>(std::llround(
                               alpha * static_cast<double>(cfg.d))));
                    datagen::SampleStream stream(spec, weights, n, ds_seed);
                    const auto est = spectral::spectral_estimator(
                        stream, prep, cfg.gap_constant, cfg.effective_r_max(),
                        inner_threads);
                    const auto rep = spectral::recovery_report(est, spec, weights);
                    row.spike_count = est.spike_count;
                    row.weighted_mse = rep.weighted_mse;
                    row.mse = rep.mse_per_index;
                    for (std::size_t k = 0;
                         k < std::min<std::size_t>(est.spike_count, spec.m_star); ++k)
                        row.overlap[k] = rep.overlaps(k, k);
                    if (cfg.spectra && si == 0) out.spectra[ai] = est.eigenvalues;
                }
            } catch (const std::exception& e) {
                row.error = e.what();
            }
            const auto t1 = std::chrono::steady_clock::now();
            row.wall_time_ms =
                std::chrono::duration<double, std::milli>(t1 - t0).count();
            out.rows[cell] = std::move(row);
        }
    });
    return out;
}

// ── Scaling fits ─────────────────────────────────────────────────────────
struct ScalingFit {
    double slope = 0.0;
    double stderr_slope = 0.0;
    double intercept = 0.0;
    std::size_t points = 0;
};

// OLS of log(mean weighted mse over seeds) against log(alpha), restricted
// to the window [lo, hi].
inline ScalingFit fit_scaling(const std::vector<SweepRow>& rows, double lo,
                              double hi) {
    std::map<double, std::pair<double, std::size_t>> by_alpha;
    for (const auto& r : rows) {
        if (!r.error.empty() || std::isnan(r.weighted_mse)) continue;
        if (r.alpha < lo || r.alpha > hi) continue;
        auto& acc = by_alpha[r.alpha];
        acc.first += r.weighted_mse;
        acc.second += 1;
    }
    if (by_alpha.size() < 4)
        throw ValidationError("fit_scaling: need at least 4 distinct alphas in the "
                              "window");
    std::vector<double> xs, ys;
    for (const auto& [alpha, acc] : by_alpha) {
        const double mean = acc.first / static_cast<double>(acc.second);
        if (!(mean > 0.0))
            throw NumericalError("fit_scaling: nonpositive mean mse at alpha");
        xs.push_back(std::log(alpha));
        ys.push_back(std::log(mean));
    }
    const std::size_t n = xs.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    ScalingFit fit;
    fit.points = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = ys[i] - (fit.intercept + fit.slope * xs[i]);
        sse += e * e;
    }
    fit.stderr_slope = (n > 2) ? std::sqrt(sse / ((n - 2) * sxx)) : 0.0;
    return fit;
}

// ── Emission ─────────────────────────────────────────────────────────────
namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline std::string row_csv(const SweepRow& r, std::size_t m_star,
                           bool include_walltime) {
    std::ostringstream os;
    os.precision(17);
    os << r.alpha << "," << r.seed_index << "," << r.spike_count;
    for (std::size_t k = 0; k < m_star; ++k) os << "," << r.overlap[k];
    for (std::size_t k = 0; k < m_star; ++k) os << "," << r.mse[k];
    os << "," << r.weighted_mse << "," << r.excess_risk << "," << r.risk_stderr
       << "," << r.regime << "," << r.predicted_exponent << "," << r.k_alpha << ","
       << r.predicted_spike_count << "," << r.predicted_lambda_edge;
    if (include_walltime) os << "," << r.wall_time_ms;
    os << "," << (r.error.empty() ? "ok" : r.error);
    return os.str();
}

} // namespace detail

inline std::string sweep_csv_header(std::size_t m_star) {
    std::ostringstream os;
    os << "alpha,seed,spike_count";
    for (std::size_t k = 1; k <= m_star; ++k) os << ",overlap_" << k;
    for (std::size_t k = 1; k <= m_star; ++k) os << ",mse_" << k;
    os << ",weighted_mse,excess_risk,risk_stderr,regime,predicted_exponent,"
          "k_alpha,predicted_spike_count,predicted_lambda_edge,wall_time_ms,status";
    return os.str();
}

// determinism hash excludes the wall_time_ms column
inline std::uint64_t determinism_hash(const std::vector<SweepRow>& rows,
                                      std::size_t m_star) {
    Fnv1a h;
    for (const auto& r : rows) h.update(detail::row_csv(r, m_star, false));
    return h.digest();
}

inline nlohmann::json rmt_to_json(const theory::RmtPrediction& p) {
    nlohmann::json spikes = nlohmann::json::array();
    for (const auto& s : p.spikes)
        spikes.push_back({{"k", s.k},
                          {"t", s.t},
                          {"lambda", s.lambda},
                          {"overlap_sq", s.overlap_sq},
                          {"extra_roots", s.extra_roots}});
    nlohmann::json j = {{"alpha", p.alpha},
                        {"bulk_edge_t", p.bulk_edge_t},
                        {"bulk_edge_lambda", p.bulk_edge_lambda},
                        {"spikes", spikes},
                        {"below_threshold", p.below_threshold}};
    if (!p.moment_grid.empty()) {
        j["moment_grid"] = p.moment_grid;
        nlohmann::json table = nlohmann::json::array();
        for (std::size_t k = 0; k < p.moment_table.rows(); ++k) {
            std::vector<double> row(p.moment_table.row(k),
                                    p.moment_table.row(k) + p.moment_grid.size());
            table.push_back(row);
        }
        j["conditional_moments"] = table;
    }
    return j;
}

inline nlohmann::json theory_json(const ExperimentConfig& cfg,
                                  const SweepOutput& sweep) {
    const auto spec = cfg.target_spec();
    nlohmann::json per_alpha = nlohmann::json::array();
    for (std::size_t ai = 0; ai < sweep.alphas.size(); ++ai) {
        const double alpha = sweep.alphas[ai];
        const auto rates = theory::predict_rates(spec, alpha);
        const auto dec = theory::predict_mse_decomposition(spec, alpha);
        nlohmann::json j = {
            {"alpha", alpha},
            {"regime", theory::regime_name(rates.regime)},
            {"crossover", rates.crossover},
            {"exponent", rates.mse_scaling_exponent},
            {"prefactor_law", rates.mse_prefactor_law},
            {"k_alpha", rates.k_alpha},
            {"thresholds", rates.alpha_k},
            {"decomposition",
             {{"learned_part", dec.learned_part},
              {"underfit_part", dec.underfit_part}}},
            {"constants_absorbed", true}};
        if (cfg.rmt && ai < sweep.rmt.size()) j["rmt"] = rmt_to_json(sweep.rmt[ai]);
        per_alpha.push_back(std::move(j));
    }
    return {{"spec_fingerprint", spec.fingerprint()},
            {"crossover_alpha", spec.crossover_alpha},
            {"per_alpha", per_alpha}};
}

struct EmitResult {
    std::filesystem::path sweep_csv;
    std::filesystem::path theory_json_path;
    std::filesystem::path manifest;
    std::vector<std::filesystem::path> spectra;
};

inline EmitResult emit_outputs(const SweepOutput& sweep,
                               const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const auto spec = cfg.target_spec();
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    EmitResult out;

    out.sweep_csv = dir / "sweep.csv";
    {
        std::ofstream f(out.sweep_csv);
        if (!f) throw DataError("emit_outputs: cannot write " +
                                out.sweep_csv.string());
        f << sweep_csv_header(spec.m_star) << "\n";
        for (const auto& r : sweep.rows)
            f << detail::row_csv(r, spec.m_star, true) << "\n";
    }

    out.theory_json_path = dir / "theory.json";
    {
        std::ofstream f(out.theory_json_path);
        f << theory_json(cfg, sweep).dump(2) << "\n";
    }

    if (cfg.spectra && !sweep.spectra.empty()) {
        fs::create_directories(dir / "spectra");
        for (std::size_t ai = 0; ai < sweep.alphas.size(); ++ai) {
            if (sweep.spectra[ai].empty()) continue;
            std::ostringstream tag;
            tag << "alpha_" << sweep.alphas[ai];
            const fs::path hist = dir / "spectra" / (tag.str() + ".csv");
            spectral::write_spectrum_csv(hist.string(), sweep.spectra[ai],
                                         cfg.histogram_bins);
            spectral::write_top_eigenvalues_csv(
                (dir / "spectra" / (tag.str() + "_top.csv")).string(),
                sweep.spectra[ai], spec.m_star);
            out.spectra.push_back(hist);
        }
    }

    out.manifest = dir / "manifest.json";
    {
        nlohmann::json m = {
            {"artifact_version", kArtifactVersion},
            {"config_hash", cfg.config_hash()},
            {"config_canonical", cfg.canonical()},
            {"spec_fingerprint", spec.fingerprint()},
            {"determinism_hash", determinism_hash(sweep.rows, spec.m_star)},
            {"rows", sweep.rows.size()},
            {"columns", sweep_csv_header(spec.m_star)},
            {"delta", cfg.delta},
            {"notes",
             "determinism_hash covers all columns except wall_time_ms"}};
        std::ofstream f(out.manifest);
        f << m.dump(2) << "\n";
    }
    return out;
}

// Internal schema check for emitted file sets: header shape, column counts,
// parseable rows, manifest keys.
inline void validate_output_schema(const EmitResult& files,
                                   const ExperimentConfig& cfg) {
    const auto spec = cfg.target_spec();
    std::ifstream f(files.sweep_csv);
    if (!f) throw DataError("schema: missing sweep.csv");
    std::string header;
    std::getline(f, header);
    if (header != sweep_csv_header(spec.m_star))
        throw DataError("schema: sweep.csv header mismatch");
    const std::size_t want_cols =
        std::count(header.begin(), header.end(), ',') + 1;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const std::size_t cols = std::count(line.begin(), line.end(), ',') + 1;
        if (cols != want_cols) throw DataError("schema: sweep.csv column count");
    }
    std::ifstream mf(files.manifest);
    if (!mf) throw DataError("schema: missing manifest.json");
    nlohmann::json m;
    mf >> m;
    for (const char* key : {"artifact_version", "config_hash", "determinism_hash",
                            "rows", "columns"})
        if (!m.contains(key)) throw DataError(std::string("schema: manifest missing ") + key);
    std::ifstream tf(files.theory_json_path);
    if (!tf) throw DataError("schema: missing theory.json");
    nlohmann::json t;
    tf >> t;
    if (!t.contains("per_alpha")) throw DataError("schema: theory.json missing per_alpha");
}

} // namespace hmlab::harness
