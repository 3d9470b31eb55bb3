// lab — command-line front end for the scaling-law laboratory.
//
//   lab sweep    --config <file> [--out <dir>] [--paper-scale] [--threads N]
//   lab predict  --config <file> [--out <dir>]
//   lab spectrum --config <file> --alpha <v> [--out <dir>] [--threads N]
//   lab train    --config <file> --alpha <v> [--seed s] [--out <dir>]
//
// Exit codes: 0 success, 2 config/validation error, 3 numerical failure.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hmlab/harness.hpp"

namespace {

using namespace hmlab;

int cmd_sweep(const std::string& config_path, const std::string& out_override,
              bool paper_scale, int threads) {
    auto cfg = harness::load_config_file(config_path, paper_scale);
    if (!out_override.empty()) cfg.out_dir = out_override;
    const auto sweep = harness::run_sweep(cfg, threads);
    const auto files = harness::emit_outputs(sweep, cfg);
    harness::validate_output_schema(files, cfg);
    std::size_t failures = 0;
    for (const auto& r : sweep.rows)
        if (!r.error.empty()) ++failures;
    std::cout << "wrote " << files.sweep_csv.string() << " (" << sweep.rows.size()
              << " rows, " << failures << " failed cells)\n";
    return 0;
}

int cmd_predict(const std::string& config_path, const std::string& out_override) {
    auto cfg = harness::load_config_file(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    harness::SweepOutput sweep;
    sweep.alphas = cfg.alpha_grid();
    if (cfg.rmt) {
        const auto spec = cfg.target_spec();
        theory::LabelPool pool(spec, cfg.pool_size);
        for (double a : sweep.alphas) {
            auto pred = theory::solve_spikes(spec, cfg.prep(), a, pool);
            if (cfg.moment_grid > 0) {
                const double y_span =
                    4.0 * std::sqrt(spec.target_variance() + spec.noise_delta);
                theory::tabulate_conditional_moments(spec, pred, y_span,
                                                     cfg.moment_grid);
            }
            sweep.rmt.push_back(std::move(pred));
        }
    }
    std::filesystem::create_directories(cfg.out_dir);
    const auto path = std::filesystem::path(cfg.out_dir) / "theory.json";
    std::ofstream f(path);
    f << harness::theory_json(cfg, sweep).dump(2) << "\n";
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

int cmd_spectrum(const std::string& config_path, double alpha,
                 const std::string& out_override, int threads) {
    auto cfg = harness::load_config_file(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    const auto spec = cfg.target_spec();
    const auto weights = datagen::sample_planted_weights(spec, cfg.seed);
    const std::size_t n = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::llround(alpha * double(cfg.d))));
    datagen::SampleStream stream(spec, weights, n, harness::cell_seed(cfg.seed, 0, 0));
    const auto est = spectral::spectral_estimator(stream, cfg.prep(),
                                                  cfg.gap_constant,
                                                  cfg.effective_r_max(), threads);
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(cfg.out_dir) / "spectra");
    std::ostringstream tag;
    tag << "alpha_" << alpha;
    const auto hist = fs::path(cfg.out_dir) / "spectra" / (tag.str() + ".csv");
    const auto top = fs::path(cfg.out_dir) / "spectra" / (tag.str() + "_top.csv");
    spectral::write_spectrum_csv(hist.string(), est.eigenvalues, cfg.histogram_bins);
    spectral::write_top_eigenvalues_csv(top.string(), est.eigenvalues, spec.m_star);
    std::cout << "alpha " << alpha << ": " << est.spike_count
              << " spikes; wrote " << hist.string() << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, double alpha, std::uint64_t seed,
              const std::string& out_override, int threads) {
    auto cfg = harness::load_config_file(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    const auto spec = cfg.target_spec();
    const auto weights = datagen::sample_planted_weights(spec, cfg.seed);
    std::size_t n = static_cast<std::size_t>(std::llround(alpha * double(cfg.d)));
    if (n % 2 != 0) ++n;
    const auto res = readout::run_algorithm1(
        spec, weights, n, seed, cfg.p, cfg.ridge_lambda, cfg.prep(),
        readout::Activation::preset(cfg.activation), cfg.gap_constant, cfg.n_test,
        threads);
    nlohmann::json report = {
        {"spec_fingerprint", spec.fingerprint()},
        {"alpha", res.report.alpha},
        {"seed", seed},
        {"n", n},
        {"p", res.report.p},
        {"ridge_lambda", res.report.ridge_lambda},
        {"spike_count", res.report.spike_count},
        {"random_feature_fallback", res.report.fallback},
        {"weighted_mse", res.report.weighted_mse},
        {"excess_risk", res.report.risk.risk},
        {"risk_stderr", res.report.risk.std_err},
        {"regime", theory::regime_name(res.report.rates.regime)},
        {"predicted_exponent", res.report.rates.mse_scaling_exponent},
        {"k_alpha", res.report.rates.k_alpha}};
    std::filesystem::create_directories(cfg.out_dir);
    const auto path = std::filesystem::path(cfg.out_dir) / "risk_report.json";
    std::ofstream f(path);
    f << report.dump(2) << "\n";
    std::cout << report.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"scaling-law laboratory for spectral multi-index learning"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    bool paper_scale = false;
    int threads = 1;
    double alpha = 0.0;
    std::uint64_t seed = 1;

    auto add_common = [&](CLI::App* sub, bool needs_alpha) {
        sub->add_option("--config", config_path, "config file")->required();
        sub->add_option("--out", out_dir, "output directory override");
        sub->add_option("--threads", threads, "worker threads");
        if (needs_alpha)
            sub->add_option("--alpha", alpha, "sample complexity n/d")->required();
    };

    auto* sweep = app.add_subcommand("sweep", "run the (alpha, seed) sweep");
    add_common(sweep, false);
    sweep->add_flag("--paper-scale", paper_scale,
                    "use full-scale settings (d = 1000, 70 seeds)");

    auto* predict = app.add_subcommand("predict", "theory predictions only");
    add_common(predict, false);

    auto* spectrum = app.add_subcommand("spectrum", "one spectrum histogram");
    add_common(spectrum, true);

    auto* train = app.add_subcommand("train", "single two-stage training run");
    add_common(train, true);
    train->add_option("--seed", seed, "dataset seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sweep->parsed()) return cmd_sweep(config_path, out_dir, paper_scale, threads);
        if (predict->parsed()) return cmd_predict(config_path, out_dir);
        if (spectrum->parsed()) return cmd_spectrum(config_path, alpha, out_dir, threads);
        if (train->parsed()) return cmd_train(config_path, alpha, seed, out_dir, threads);
    } catch (const hmlab::ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const hmlab::ResourceError& e) {
        std::cerr << "resource error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
