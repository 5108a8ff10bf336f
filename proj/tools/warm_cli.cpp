// Experiment driver: sweeps, training, sampling and spectral analysis from a key-value config.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

#include "image_io.hpp"
#include "plot.hpp"
#include "warm/experiment.hpp"

namespace fs = std::filesystem;
using namespace warm;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

ExperimentConfig load(const Options& o) {
    std::optional<fs::path> out;
    if (o.out) out = *o.out;
    ExperimentConfig c = load_experiment(o.config, o.seed, out);
    fs::create_directories(c.out);
    return c;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << text;
    std::cout << "wrote " << path.string() << '\n';
}

double column_value(const std::vector<std::string>& row, std::size_t i) { return std::stod(row.at(i)); }

// Re-reads our own CSV text so plots are drawn from exactly what was written.
std::vector<std::vector<std::string>> rows_of(const std::string& csv) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(csv);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

int cmd_sweep_bnr(const Options& o) {
    const ExperimentConfig c = load(o);
    const std::string csv = run_bnr_sweep(c).str();
    write_text(c.out / "sweep_bnr.csv", csv);
    plot::Series s{"energy_distance", {}, {}};
    for (const auto& r : rows_of(csv)) {
        s.x.push_back(column_value(r, 0));
        s.y.push_back(column_value(r, 2));
    }
    plot::write_line_chart(c.out / "sweep_bnr.png", {false, true, {s}});
    return kOk;
}

int cmd_sweep_variant(const Options& o) {
    const ExperimentConfig c = load(o);
    write_text(c.out / "sweep_variant.csv", run_variant_sweep(c).str());
    return kOk;
}

int cmd_sweep_nfe(const Options& o) {
    const ExperimentConfig c = load(o);
    const std::string csv = run_nfe_sweep(c).str();
    write_text(c.out / "sweep_nfe.csv", csv);
    std::map<std::string, plot::Series> by_bnr;
    for (const auto& r : rows_of(csv)) {
        auto& s = by_bnr[r[0]];
        s.label = r[0];
        s.x.push_back(column_value(r, 2));
        s.y.push_back(column_value(r, 4));
    }
    plot::Chart chart{true, true, {}};
    for (auto& [k, s] : by_bnr) chart.series.push_back(s);
    plot::write_line_chart(c.out / "sweep_nfe.png", chart);
    return kOk;
}

std::size_t steps_of(const ExperimentConfig& c) {
    return c.sampler.nfe ? steps_for_nfe(*c.sampler.nfe, c.sampler.step_mode) : c.schedule.T;
}

int cmd_train(const Options& o) {
    ExperimentConfig c = load(o);
    const GaussianMixture& gm = require_mixture(c);
    TwoHeadPredictor p(c.predictor.shape);
    p.initialize(derive_seed(c.seed, 1));
    TrainingOptions opts = c.predictor.training;
    opts.seed = derive_seed(c.seed, 2);
    opts.objective = objective_for(c.sampler.variant);
    opts.record_every = std::max<std::size_t>(1, opts.steps / 200);
    const auto history = train(p, [&gm](NoiseSource& r) { return gm.draw(r); },
                               build_schedule(c, c.predictor.train_T, c.schedule.bnr), opts);
    CsvTable losses({"step", "denoiser_loss", "residual_loss"});
    losses.add_comment("train config_hash=" + c.hash + " seed=" + std::to_string(c.seed) +
                       " variant=" + std::string(1, to_char(c.sampler.variant)));
    for (std::size_t i = 0; i < history.size(); ++i)
        losses.add_row({std::to_string(i * opts.record_every), format_double(history[i].denoiser),
                        format_double(history[i].residual)});
    write_text(c.out / "losses.csv", losses.str());
    save_checkpoint(p, c.out / "predictor");
    std::cout << "wrote " << (c.out / "predictor").string() << ".{bin,json}\n";
    return kOk;
}

template <Predictor P>
int emit_samples(const ExperimentConfig& c, const P& predictor, const DiffusionSchedule& s) {
    SamplerConfig cfg;
    cfg.variant = c.sampler.variant;
    cfg.step_mode = c.sampler.step_mode;
    cfg.schedule = s;
    cfg.dc_guard = c.sampler.dc_guard;
    std::optional<ExcursionMeter> meter;
    if (c.data.mixture) {
        check_prior(*c.data.mixture, s);
        meter.emplace(*c.data.mixture, s);
    }
    SampleOptions opts;
    opts.workers = c.sampler.workers;
    opts.excursion = meter ? &*meter : nullptr;
    NoiseSource rng(derive_seed(c.seed, 3));
    const SampleResult r = sample(cfg, predictor, rng, c.sampler.chains, c.data.height, c.data.width, opts);

    std::vector<std::string> cols{"index"};
    for (std::size_t k = 0; k < c.data.height * c.data.width; ++k) cols.push_back("x" + std::to_string(k));
    CsvTable samples(cols);
    samples.add_comment("sample config_hash=" + c.hash + " seed=" + std::to_string(c.seed) +
                        " nfe=" + std::to_string(r.nfe));
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
        std::vector<std::string> row{std::to_string(i)};
        for (double v : r.samples[i].values()) row.push_back(format_double(v));
        samples.add_row(row);
    }
    write_text(c.out / "samples.csv", samples.str());

    if (c.data.mixture) {
        const QualityReport q = quality_report(r.samples, reference_samples(c));
        CsvTable t({"energy_distance", "noise_floor", "wasserstein_mean", "manifold_excursion_max",
                    "nfe", "samples"});
        stamp(t, c, "sample");
        t.add_row({format_double(q.energy_distance), format_double(q.noise_floor),
                   format_double(mean_of(q.wasserstein)), format_double(mean_of(r.max_excursion)),
                   std::to_string(r.nfe), std::to_string(q.sample_count)});
        write_text(c.out / "quality.csv", t.str());
    }
    if (c.data.height * c.data.width > 1 && c.data.height * c.data.width <= 4096 &&
        c.data.height > 1) {
        const std::size_t n = std::min<std::size_t>(16, r.samples.size());
        for (std::size_t i = 0; i < n; ++i)
            io::write_pgm(c.out / ("sample_" + std::to_string(i) + ".pgm"), r.samples[i]);
    }
    return kOk;
}

int cmd_sample(const Options& o) {
    const ExperimentConfig c = load(o);
    const DiffusionSchedule s = build_schedule(c, steps_of(c), c.schedule.bnr);
    write_text(c.out / "schedule.csv", schedule_csv(s).str());
    if (c.predictor.checkpoint) {
        const TwoHeadPredictor p = load_checkpoint(*c.predictor.checkpoint);
        if (p.shape().height != c.data.height || p.shape().width != c.data.width)
            throw ConfigError("predictor.checkpoint was trained on a different grid size");
        return emit_samples(c, p, s);
    }
    if (c.predictor.kind == PredictorKind::trained)
        return emit_samples(c, train_predictor(c, c.schedule.bnr, c.sampler.variant, c.seed), s);
    const OracleDenoiser oracle(require_mixture(c), {s});
    if (objective_for(c.sampler.variant).residual_is_clean)
        return emit_samples(c, CleanResidualHead<OracleDenoiser>{oracle}, s);
    return emit_samples(c, oracle, s);
}

std::vector<Grid> psd_data(const ExperimentConfig& c) {
    switch (c.data.kind) {
        case DataKind::images: return io::read_gray_folder(c.data.images);
        case DataKind::power_law: {
            NoiseSource rng(derive_seed(c.seed, 4));
            const double amp = unit_power_amplitude(c.data.height, c.data.width, c.data.exponent);
            std::vector<Grid> out;
            for (std::size_t i = 0; i < c.data.count; ++i)
                out.push_back(power_law_field(c.data.height, c.data.width, c.data.exponent, rng, amp));
            return out;
        }
        case DataKind::mixture: {
            NoiseSource rng(derive_seed(c.seed, 4));
            return c.data.mixture->draw(c.reference_samples, rng);
        }
    }
    return {};
}

CsvTable psd_table(const ExperimentConfig& c, const RadialPSD& psd) {
    CsvTable t({"frequency", "power", "count"});
    stamp(t, c, "psd");
    try {
        const PowerLawFit fit = fit_power_law(psd);
        t.add_comment("power_law exponent=" + format_double(fit.exponent) +
                      " intercept=" + format_double(fit.intercept));
    } catch (const DomainError& e) {
        t.add_comment(std::string("power_law fit unavailable: ") + e.what());
    }
    for (std::size_t i = 0; i < psd.power.size(); ++i)
        t.add_row({format_double(psd.frequency[i]), format_double(psd.power[i]),
                   std::to_string(psd.count[i])});
    return t;
}

int cmd_psd(const Options& o) {
    const ExperimentConfig c = load(o);
    const auto data = psd_data(c);
    const RadialPSD psd = radial_psd(data);
    write_text(c.out / "psd.csv", psd_table(c, psd).str());
    plot::write_line_chart(c.out / "psd.png", {true, true, {{"psd", psd.frequency, psd.power}}});
    return kOk;
}

int cmd_select_bnr(const Options& o) {
    const ExperimentConfig c = load(o);
    const auto data = psd_data(c);
    const RadialPSD psd = radial_psd(data);
    const BnrSelection sel = select_bnr(psd, c.selection);

    CsvTable t({"bnr", "feasible", "delta", "beta_min", "beta_max"});
    stamp(t, c, "select-bnr");
    if (!sel.diagnostic.empty()) t.add_comment(sel.diagnostic);
    t.add_row({format_double(sel.bnr), sel.feasible ? "1" : "0", format_double(c.selection.delta),
               format_double(c.selection.beta_min), format_double(c.selection.beta_max)});
    write_text(c.out / "select_bnr.csv", t.str());
    std::cout << "bnr=" << format_double(sel.bnr) << '\n';

    // Per-band SNR psd * m^2 / beta^2 under the selected BNR at a few noise levels.
    CsvTable snr({"beta", "frequency", "mask", "snr"});
    stamp(snr, c, "select-bnr snr");
    plot::Chart chart{true, true, {}};
    const int levels = 7;
    for (int i = 0; i < levels; ++i) {
        const double beta = c.selection.beta_min *
                            std::pow(c.selection.beta_max / c.selection.beta_min, i / double(levels - 1));
        plot::Series s{format_double(beta), {}, {}};
        for (std::size_t k = 0; k < psd.power.size(); ++k) {
            const double a = sel.bnr * beta, f = psd.frequency[k];
            const double m = std::exp(-0.5 * std::numbers::pi * std::numbers::pi * a * a * f * f);
            const double r = psd.power[k] * m * m / (beta * beta);
            snr.add_row({format_double(beta), format_double(f), format_double(m), format_double(r)});
            s.x.push_back(f);
            s.y.push_back(r);
        }
        chart.series.push_back(s);
    }
    write_text(c.out / "snr_bands.csv", snr.str());
    plot::write_line_chart(c.out / "snr_bands.png", chart);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"warm: blur-noise mixture diffusion experiments"};
    app.require_subcommand(1);
    Options o;
    std::uint64_t seed = 0;
    std::string out;

    struct Command {
        const char* name;
        const char* help;
        int (*run)(const Options&);
    };
    const Command commands[] = {
        {"sweep-bnr", "sample quality per BNR at a fixed NFE", cmd_sweep_bnr},
        {"sweep-variant", "sample quality per parameterization variant", cmd_sweep_variant},
        {"sweep-nfe", "sample quality over a BNR x NFE grid", cmd_sweep_nfe},
        {"train", "train a two-head predictor and write a checkpoint", cmd_train},
        {"sample", "draw samples and report their quality", cmd_sample},
        {"psd", "radial power spectrum and power-law fit of a dataset", cmd_psd},
        {"select-bnr", "choose a BNR from the dataset spectrum", cmd_select_bnr},
    };
    std::map<CLI::App*, const Command*> lookup;
    for (const Command& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", o.config, "key-value experiment config")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "overrides the config seed");
        sub->add_option("--out", out, "output directory (overrides the config)");
        lookup[sub] = &c;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    for (auto& [sub, cmd] : lookup) {
        if (!sub->parsed()) continue;
        if (sub->count("--seed")) o.seed = seed;
        if (sub->count("--out")) o.out = out;
        try {
            return cmd->run(o);
        } catch (const ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return kConfigError;
        } catch (const NumericalError& e) {
            std::cerr << "numerical failure: " << e.what() << '\n';
            return kNumericalError;
        } catch (const Error& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kConfigError;
        }
    }
    return kConfigError;
}
