#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "warm/analysis.hpp"
#include "warm/config.hpp"
#include "warm/csv.hpp"
#include "warm/mixture.hpp"
#include "warm/noise.hpp"
#include "warm/predictor.hpp"
#include "warm/sampler.hpp"
#include "warm/schedule.hpp"

namespace warm {

enum class ScheduleFamily { constant_bnr, blurring };
enum class DataKind { mixture, images, power_law };
enum class PredictorKind { oracle, trained };

struct DataSpec {
    DataKind kind = DataKind::mixture;
    std::size_t height = 1;
    std::size_t width = 2;
    std::optional<GaussianMixture> mixture;
    std::filesystem::path images;  // directory of PGM/PNG files
    double exponent = 2.0;         // power_law fields
    std::size_t count = 1000;      // power_law fields
};

struct PredictorSpec {
    PredictorKind kind = PredictorKind::oracle;
    PredictorShape shape;
    TrainingOptions training;
    std::size_t train_T = 1000;  // dense schedule the training levels are drawn from
    std::optional<std::filesystem::path> checkpoint;
};

struct SamplerSpec {
    Variant variant = Variant::d;
    StepMode step_mode = StepMode::heun;
    std::optional<std::size_t> nfe;
    std::size_t chains = 10000;
    double dc_guard = 1e-6;
    unsigned workers = 1;
};

struct ExperimentConfig {
    ScheduleFamily family = ScheduleFamily::constant_bnr;
    ScheduleParams schedule;
    DataSpec data;
    PredictorSpec predictor;
    SamplerSpec sampler;
    std::vector<double> sweep_bnr;
    std::vector<Variant> sweep_variants;
    std::vector<std::size_t> sweep_nfe;
    std::size_t reference_samples = 10000;
    BnrSelectionParams selection;
    std::uint64_t seed = 0;
    std::filesystem::path out = "out";
    std::string hash;  // of the canonical key-value text, seed included
};

/// Steps T that give at most `nfe` predictor calls in `mode` (Heun: 2T - 1).
inline std::size_t steps_for_nfe(std::size_t nfe, StepMode mode) {
    if (nfe < 1) throw ConfigError("nfe must be >= 1");
    return mode == StepMode::heun ? (nfe + 1) / 2 : nfe;
}

namespace detail {

inline Eigen::MatrixXd parse_covariance(const std::vector<double>& v, std::size_t d,
                                        const std::string& key) {
    const auto n = static_cast<Eigen::Index>(d);
    if (v.size() == 1) return v[0] * Eigen::MatrixXd::Identity(n, n);
    if (v.size() == d) return Eigen::VectorXd::Map(v.data(), n).asDiagonal();
    if (v.size() == d * d) return Eigen::MatrixXd::Map(v.data(), n, n).transpose();
    throw ConfigError("config key '" + key + "': expected 1, d or d*d values");
}

// Covariance diagonal in the DCT basis: AC coefficient (k1, k2) has variance proportional to
// f^-exponent, scaled so the AC part carries `ac_variance` per pixel; DC gets `dc_variance`.
inline Eigen::MatrixXd spectral_covariance(std::size_t h, std::size_t w, double exponent,
                                           double ac_variance, double dc_variance) {
    const auto n = static_cast<Eigen::Index>(h * w);
    const double amp = h * w > 1 ? unit_power_amplitude(h, w, exponent) : 0.0;
    Eigen::MatrixXd basis(n, n);
    Eigen::VectorXd var(n);
    for (std::size_t k1 = 0; k1 < h; ++k1)
        for (std::size_t k2 = 0; k2 < w; ++k2) {
            SpectralGrid e(h, w);
            e(k1, k2) = 1.0;
            const auto j = static_cast<Eigen::Index>(k1 * w + k2);
            basis.col(j) = to_vector(dct_inverse(e));
            var[j] = (k1 || k2) ? ac_variance * amp * amp *
                                      std::pow(radial_frequency(k1, k2, h, w), -exponent)
                                : dc_variance;
        }
    Eigen::MatrixXd c = basis * var.asDiagonal() * basis.transpose();
    return 0.5 * (c + c.transpose());
}

inline GaussianMixture parse_mixture(const KeyValueConfig& kv, std::size_t h, std::size_t w) {
    const std::size_t k = kv.integer("mixture.components");
    const std::size_t d = h * w;
    if (k == 0) throw ConfigError("mixture.components must be >= 1");
    std::vector<double> weights;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    for (std::size_t i = 0; i < k; ++i) {
        const std::string p = "mixture." + std::to_string(i) + ".";
        weights.push_back(kv.real(p + "weight", 1.0 / static_cast<double>(k)));
        const auto m = kv.reals(p + "mean");
        if (m.size() == 1)
            means.push_back(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d), m[0]));
        else if (m.size() == d)
            means.push_back(Eigen::VectorXd::Map(m.data(), static_cast<Eigen::Index>(d)));
        else
            throw ConfigError("config key '" + p + "mean': expected 1 or " + std::to_string(d) +
                              " values");
        if (kv.has(p + "cov") == kv.has(p + "spectrum"))
            throw ConfigError("component " + std::to_string(i) + ": give exactly one of cov, spectrum");
        if (kv.has(p + "cov")) {
            covs.push_back(parse_covariance(kv.reals(p + "cov"), d, p + "cov"));
        } else {
            const auto sp = kv.reals(p + "spectrum");
            if (sp.size() != 3 || !(sp[1] > 0.0) || !(sp[2] > 0.0))
                throw ConfigError("config key '" + p +
                                  "spectrum': expected exponent, ac_variance > 0, dc_variance > 0");
            covs.push_back(spectral_covariance(h, w, sp[0], sp[1], sp[2]));
        }
    }
    double total = 0.0;
    for (double x : weights) total += x;
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("mixture weights must sum to 1");
    for (double& x : weights) x /= total;
    try {
        return GaussianMixture(h, w, std::move(weights), std::move(means), std::move(covs));
    } catch (const Error& e) {
        throw ConfigError(std::string("mixture: ") + e.what());
    }
}

}  // namespace detail

/// Reads an experiment from key-value text. `seed` and `out` override the file. See
/// configs/README for the key reference.
inline ExperimentConfig load_experiment(KeyValueConfig kv, std::optional<std::uint64_t> seed = {},
                                        std::optional<std::filesystem::path> out = {}) {
    if (seed) kv.set("seed", std::to_string(*seed));
    if (!kv.has("seed")) throw ConfigError("config: 'seed' is mandatory (or pass --seed)");

    ExperimentConfig c;
    c.seed = kv.integer("seed");
    c.hash = kv.hash();
    c.out = out ? *out : std::filesystem::path(kv.text("out", "out"));

    const std::string family = kv.text("schedule.family", "bnr");
    if (family == "bnr") c.family = ScheduleFamily::constant_bnr;
    else if (family == "blurring") c.family = ScheduleFamily::blurring;
    else throw ConfigError("schedule.family must be 'bnr' or 'blurring'");
    c.schedule.T = kv.integer("schedule.T", c.schedule.T);
    c.schedule.beta_min = kv.real("schedule.beta_min", c.schedule.beta_min);
    c.schedule.beta_max = kv.real("schedule.beta_max", c.schedule.beta_max);
    c.schedule.rho = kv.real("schedule.rho", c.schedule.rho);
    c.schedule.bnr = kv.real("schedule.bnr", c.schedule.bnr);
    c.schedule.eta = kv.real("schedule.eta", c.schedule.eta);
    try {
        detail::validate_params(c.schedule);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }

    const std::string data = kv.text("data.kind", "mixture");
    c.data.height = kv.integer("data.height", 1);
    c.data.width = kv.integer("data.width", 2);
    if (c.data.height == 0 || c.data.width == 0) throw ConfigError("data grid must be non-empty");
    if (data == "mixture") {
        c.data.kind = DataKind::mixture;
        c.data.mixture = detail::parse_mixture(kv, c.data.height, c.data.width);
    } else if (data == "images") {
        c.data.kind = DataKind::images;
        c.data.images = kv.text("data.images");
        if (!std::filesystem::is_directory(c.data.images))
            throw ConfigError("data.images: no such directory " + c.data.images.string());
    } else if (data == "power_law") {
        c.data.kind = DataKind::power_law;
        c.data.exponent = kv.real("data.exponent", 2.0);
        c.data.count = kv.integer("data.count", 1000);
    } else {
        throw ConfigError("data.kind must be mixture, images or power_law");
    }

    const std::string pred = kv.text("predictor.kind", "oracle");
    if (pred == "oracle") c.predictor.kind = PredictorKind::oracle;
    else if (pred == "trained") c.predictor.kind = PredictorKind::trained;
    else throw ConfigError("predictor.kind must be 'oracle' or 'trained'");
    c.predictor.shape.height = c.data.height;
    c.predictor.shape.width = c.data.width;
    c.predictor.shape.hidden = kv.integer("predictor.hidden", 64);
    c.predictor.shape.skip = kv.boolean("predictor.skip", true);
    c.predictor.shape.sigma_data = kv.real("predictor.sigma_data", 1.0);
    c.predictor.training.steps = kv.integer("predictor.steps", 20000);
    c.predictor.training.batch = kv.integer("predictor.batch", 64);
    c.predictor.training.lr = kv.real("predictor.lr", 0.02);
    c.predictor.train_T = kv.integer("predictor.train_T", 1000);
    if (kv.has("predictor.checkpoint")) {
        c.predictor.checkpoint = kv.text("predictor.checkpoint");
        if (!std::filesystem::exists(c.predictor.checkpoint->string() + ".bin"))
            throw ConfigError("predictor.checkpoint: missing " + c.predictor.checkpoint->string() +
                              ".bin");
    }

    try {
        c.sampler.variant = parse_variant(kv.text("sampler.variant", "d"));
        c.sampler.step_mode = parse_step_mode(kv.text("sampler.step_mode", "heun"));
        if (kv.has("sweep.variants"))
            for (const auto& v : kv.list("sweep.variants")) c.sweep_variants.push_back(parse_variant(v));
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    if (kv.has("sampler.nfe")) c.sampler.nfe = kv.integer("sampler.nfe");
    c.sampler.chains = kv.integer("sampler.chains", 10000);
    c.sampler.dc_guard = kv.real("sampler.dc_guard", 1e-6);
    c.sampler.workers = static_cast<unsigned>(kv.integer("sampler.workers", 1));
    if (!(c.sampler.dc_guard > 0.0 && c.sampler.dc_guard < 1.0))
        throw ConfigError("sampler.dc_guard must lie in (0, 1)");
    if (c.sampler.chains == 0) throw ConfigError("sampler.chains must be >= 1");

    if (kv.has("sweep.bnr")) c.sweep_bnr = kv.reals("sweep.bnr");
    if (kv.has("sweep.nfe"))
        for (auto n : kv.integers("sweep.nfe")) c.sweep_nfe.push_back(n);
    for (double b : c.sweep_bnr)
        if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError("sweep.bnr values must be >= 0");
    c.reference_samples = kv.integer("reference.samples", c.sampler.chains);

    c.selection.beta_min = kv.real("select.beta_min", c.schedule.beta_min);
    c.selection.beta_max = kv.real("select.beta_max", c.schedule.beta_max);
    c.selection.delta = kv.real("select.delta", 0.1);
    c.selection.grid_step = kv.real("select.grid_step", 0.05);
    c.selection.grid_count = kv.integer("select.grid_count", 200);
    return c;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path,
                                        std::optional<std::uint64_t> seed = {},
                                        std::optional<std::filesystem::path> out = {}) {
    return load_experiment(KeyValueConfig::load(path), seed, out);
}

/// Schedule of the configured family with T steps and the given BNR.
inline DiffusionSchedule build_schedule(const ExperimentConfig& c, std::size_t T, double bnr) {
    ScheduleParams p = c.schedule;
    p.T = T;
    p.bnr = bnr;
    return c.family == ScheduleFamily::blurring ? make_blurring_diffusion_schedule(p)
                                                : make_bnr_schedule(p);
}

/// Training targets for each parameterization variant.
inline TrainingObjective objective_for(Variant v) {
    switch (v) {
        case Variant::a: return {false, true, true};
        case Variant::b: return {true, false, false};
        case Variant::c: return {true, true, true};
        case Variant::d: return {true, true, false};
    }
    return {};
}

inline const GaussianMixture& require_mixture(const ExperimentConfig& c) {
    if (!c.data.mixture) throw ConfigError("this command needs mixture data (data.kind = mixture)");
    return *c.data.mixture;
}

/// The reverse process starts from N(0, beta_T^2 I); refuse schedules whose blurred data still
/// carries 1% or more of that energy.
inline void check_prior(const GaussianMixture& gm, const DiffusionSchedule& s) {
    const double energy = blurred_signal_energy(gm, s.alpha[s.T]);
    const double budget = 0.01 * s.beta[s.T] * s.beta[s.T];
    if (!(energy < budget))
        throw ConfigError("schedule.beta_max too small: blurred data energy " + format_double(energy) +
                          " is not below 1% of beta_T^2 (" + format_double(budget) + ")");
}

/// Trains a predictor for one (schedule family, BNR, variant) cell.
inline TwoHeadPredictor train_predictor(const ExperimentConfig& c, double bnr, Variant variant,
                                        std::uint64_t seed) {
    const GaussianMixture& gm = require_mixture(c);
    TwoHeadPredictor p(c.predictor.shape);
    p.initialize(derive_seed(seed, 1));
    TrainingOptions opts = c.predictor.training;
    opts.seed = derive_seed(seed, 2);
    opts.objective = objective_for(variant);
    train(p, [&gm](NoiseSource& r) { return gm.draw(r); }, build_schedule(c, c.predictor.train_T, bnr),
          opts);
    return p;
}

/// Ground-truth draws shared by every cell of a sweep.
inline std::vector<Grid> reference_samples(const ExperimentConfig& c) {
    NoiseSource rng(derive_seed(c.seed, 0x7265666572656e63ULL));
    return require_mixture(c).draw(c.reference_samples, rng);
}

struct CellResult {
    QualityReport quality;
    double excursion = 0.0;  // mean over chains of the largest per-step Mahalanobis excursion
    std::size_t nfe = 0;
    std::vector<Grid> samples;
};

template <Predictor P>
CellResult run_cell(const ExperimentConfig& c, const P& predictor, const DiffusionSchedule& s,
                    Variant variant, std::uint64_t seed, const std::vector<Grid>& reference) {
    const GaussianMixture& gm = require_mixture(c);
    check_prior(gm, s);
    SamplerConfig cfg;
    cfg.variant = variant;
    cfg.step_mode = c.sampler.step_mode;
    cfg.schedule = s;
    cfg.dc_guard = c.sampler.dc_guard;
    const ExcursionMeter meter(gm, s);
    SampleOptions opts;
    opts.excursion = &meter;
    opts.workers = c.sampler.workers;
    NoiseSource rng(seed);
    SampleResult r = sample(cfg, predictor, rng, c.sampler.chains, c.data.height, c.data.width, opts);
    CellResult out;
    out.quality = quality_report(r.samples, reference);
    for (double e : r.max_excursion) out.excursion += e;
    out.excursion /= static_cast<double>(r.max_excursion.size());
    out.nfe = r.nfe;
    out.samples = std::move(r.samples);
    return out;
}

/// Oracle pairs carry the residual in the second head; variants a and c train that head on the
/// clean image instead, so their oracle is presented with denoised + residual there.
template <Predictor P>
struct CleanResidualHead {
    const P& inner;
    PredictionPair operator()(const Grid& x, double alpha, double beta) const {
        PredictionPair p = inner(x, alpha, beta);
        p.residual = p.denoised + p.residual;
        return p;
    }
};

/// Runs one cell with either the oracle or a freshly trained predictor.
inline CellResult run_configured_cell(const ExperimentConfig& c, const DiffusionSchedule& s,
                                      double bnr, Variant variant, std::uint64_t cell_seed,
                                      const std::vector<Grid>& reference,
                                      const TwoHeadPredictor* trained = nullptr) {
    if (c.predictor.kind == PredictorKind::oracle) {
        const OracleDenoiser oracle(require_mixture(c), {s});
        if (objective_for(variant).residual_is_clean)
            return run_cell(c, CleanResidualHead<OracleDenoiser>{oracle}, s, variant,
                            derive_seed(cell_seed, 3), reference);
        return run_cell(c, oracle, s, variant, derive_seed(cell_seed, 3), reference);
    }
    if (trained) return run_cell(c, *trained, s, variant, derive_seed(cell_seed, 3), reference);
    const TwoHeadPredictor p = train_predictor(c, bnr, variant, cell_seed);
    return run_cell(c, p, s, variant, derive_seed(cell_seed, 3), reference);
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline void stamp(CsvTable& t, const ExperimentConfig& c, const std::string& what) {
    t.add_comment(what + " config_hash=" + c.hash + " seed=" + std::to_string(c.seed));
}

inline std::size_t fixed_steps(const ExperimentConfig& c) {
    if (!c.sampler.nfe) throw ConfigError("this sweep needs a fixed sampler.nfe");
    return steps_for_nfe(*c.sampler.nfe, c.sampler.step_mode);
}

/// Quality per BNR at a fixed NFE.
inline CsvTable run_bnr_sweep(const ExperimentConfig& c) {
    if (c.sweep_bnr.empty()) throw ConfigError("sweep-bnr: set sweep.bnr = b1, b2, ...");
    const std::size_t T = fixed_steps(c);
    const auto reference = reference_samples(c);
    CsvTable table({"bnr", "nfe", "energy_distance", "noise_floor", "wasserstein_mean",
                    "manifold_excursion_max"});
    stamp(table, c, "sweep-bnr");
    for (std::size_t i = 0; i < c.sweep_bnr.size(); ++i) {
        const double bnr = c.sweep_bnr[i];
        const DiffusionSchedule s = build_schedule(c, T, bnr);
        const CellResult r = run_configured_cell(c, s, bnr, c.sampler.variant,
                                                 derive_seed(c.seed, 100 + i), reference);
        table.add_row({format_double(bnr), std::to_string(r.nfe),
                       format_double(r.quality.energy_distance),
                       format_double(r.quality.noise_floor),
                       format_double(mean_of(r.quality.wasserstein)), format_double(r.excursion)});
    }
    return table;
}

/// Quality per parameterization variant at a fixed NFE and the configured BNR.
inline CsvTable run_variant_sweep(const ExperimentConfig& c) {
    if (c.sweep_variants.empty())
        throw ConfigError("sweep-variant: no variants given; usage: sweep.variants = a, b, c, d");
    const std::size_t T = fixed_steps(c);
    const auto reference = reference_samples(c);
    const DiffusionSchedule s = build_schedule(c, T, c.schedule.bnr);
    CsvTable table({"variant", "bnr", "nfe", "energy_distance", "noise_floor", "wasserstein_mean",
                    "manifold_excursion_max"});
    stamp(table, c, "sweep-variant");
    for (std::size_t i = 0; i < c.sweep_variants.size(); ++i) {
        const Variant v = c.sweep_variants[i];
        const CellResult r = run_configured_cell(c, s, c.schedule.bnr, v,
                                                 derive_seed(c.seed, 200 + i), reference);
        table.add_row({std::string(1, to_char(v)), format_double(c.schedule.bnr),
                       std::to_string(r.nfe), format_double(r.quality.energy_distance),
                       format_double(r.quality.noise_floor),
                       format_double(mean_of(r.quality.wasserstein)), format_double(r.excursion)});
    }
    return table;
}

/// Quality over a BNR x NFE grid. One predictor per BNR serves every NFE.
inline CsvTable run_nfe_sweep(const ExperimentConfig& c) {
    std::vector<double> bnrs = c.sweep_bnr.empty() ? std::vector<double>{c.schedule.bnr} : c.sweep_bnr;
    std::vector<std::size_t> nfes = c.sweep_nfe;
    if (nfes.empty()) nfes.push_back(c.sampler.nfe ? *c.sampler.nfe : nfe_for(c.schedule.T, c.sampler.step_mode));
    const auto reference = reference_samples(c);
    CsvTable table({"bnr", "nfe_requested", "nfe", "steps", "energy_distance", "noise_floor",
                    "floor_ratio"});
    stamp(table, c, "sweep-nfe");
    for (std::size_t i = 0; i < bnrs.size(); ++i) {
        const double bnr = bnrs[i];
        const std::uint64_t cell_seed = derive_seed(c.seed, 300 + i);
        std::optional<TwoHeadPredictor> trained;
        if (c.predictor.kind == PredictorKind::trained)
            trained = train_predictor(c, bnr, c.sampler.variant, cell_seed);
        for (std::size_t j = 0; j < nfes.size(); ++j) {
            const std::size_t T = steps_for_nfe(nfes[j], c.sampler.step_mode);
            const DiffusionSchedule s = build_schedule(c, T, bnr);
            const CellResult r = run_configured_cell(c, s, bnr, c.sampler.variant,
                                                     derive_seed(cell_seed, 1000 + j), reference,
                                                     trained ? &*trained : nullptr);
            table.add_row({format_double(bnr), std::to_string(nfes[j]), std::to_string(r.nfe),
                           std::to_string(T), format_double(r.quality.energy_distance),
                           format_double(r.quality.noise_floor),
                           format_double(r.quality.energy_distance / r.quality.noise_floor)});
        }
    }
    return table;
}

}  // namespace warm
