#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "warm/blur.hpp"
#include "warm/error.hpp"
#include "warm/forward.hpp"
#include "warm/grid.hpp"
#include "warm/noise.hpp"
#include "warm/prediction.hpp"
#include "warm/schedule.hpp"

namespace warm {

struct PredictorShape {
    std::size_t height = 1;
    std::size_t width = 2;
    std::size_t hidden = 64;
    bool skip = true;          // D = c_skip x_t + c_out head_D; otherwise D = head_D
    double sigma_data = 1.0;   // data scale used by the input/output conditioning
};

/// Named slice of the flat parameter vector.
struct ParamTensor {
    std::string name;
    std::size_t rows;
    std::size_t cols;
    std::size_t offset;
    std::size_t size() const noexcept { return rows * cols; }
};

/// Shared two-layer SiLU trunk over (c_in x_t, log1p(alpha), log(beta) / 4) with a denoiser head
/// D and a residual head R, each producing one value per grid cell.
class TwoHeadPredictor {
public:
    explicit TwoHeadPredictor(const PredictorShape& shape) : shape_(shape) {
        if (shape.height == 0 || shape.width == 0 || shape.hidden == 0)
            throw DomainError("predictor: empty shape");
        if (!(shape.sigma_data > 0.0)) throw DomainError("predictor: sigma_data must be > 0");
        const std::size_t d = dim(), in = d + 2, h = shape.hidden;
        std::size_t off = 0;
        auto add = [&](const char* name, std::size_t r, std::size_t c) {
            tensors_.push_back({name, r, c, off});
            off += r * c;
        };
        add("trunk1.weight", h, in);
        add("trunk1.bias", h, 1);
        add("trunk2.weight", h, h);
        add("trunk2.bias", h, 1);
        add("denoise.weight", d, h);
        add("denoise.bias", d, 1);
        add("residual.weight", d, h);
        add("residual.bias", d, 1);
        params_.assign(off, 0.0);
    }

    /// Gaussian init with std 1/sqrt(fan_in); heads are scaled by `head_scale` (0 zeroes them).
    void initialize(std::uint64_t seed, double head_scale = 0.1) {
        NoiseSource rng(seed);
        for (const auto& t : tensors_) {
            const bool bias = t.cols == 1;
            const bool head = t.name.rfind("trunk", 0) != 0;
            const double scale = (head ? head_scale : 1.0) / std::sqrt(static_cast<double>(t.cols));
            for (std::size_t i = 0; i < t.size(); ++i)
                params_[t.offset + i] = bias ? 0.0 : scale * rng.normal();
        }
    }

    const PredictorShape& shape() const noexcept { return shape_; }
    std::size_t dim() const noexcept { return shape_.height * shape_.width; }
    const std::vector<ParamTensor>& tensors() const noexcept { return tensors_; }
    std::vector<double>& parameters() noexcept { return params_; }
    const std::vector<double>& parameters() const noexcept { return params_; }

    const ParamTensor& tensor(const std::string& name) const {
        for (const auto& t : tensors_)
            if (t.name == name) return t;
        throw DomainError("predictor: no tensor named " + name);
    }

    PredictionPair operator()(const Grid& x_t, double alpha, double beta) const {
        return predict(x_t, alpha, beta);
    }

    PredictionPair predict(const Grid& x_t, double alpha, double beta) const {
        Activations act;
        forward(x_t, alpha, beta, act);
        return {Grid(shape_.height, shape_.width, std::move(act.out_d)),
                Grid(shape_.height, shape_.width, std::move(act.out_r))};
    }

    // Intermediate values kept for the backward pass.
    struct Activations {
        std::vector<double> z, a1, h1, a2, h2, head_d, head_r, out_d, out_r;
        double c_skip = 0.0, c_out = 0.0;
    };

    void forward(const Grid& x_t, double alpha, double beta, Activations& act) const {
        const std::size_t d = dim(), in = d + 2;
        if (x_t.height() != shape_.height || x_t.width() != shape_.width)
            throw ShapeError("predictor: input grid shape mismatch");
        if (!(beta > 0.0) || !(alpha >= 0.0))
            throw DomainError("predictor: need beta > 0 and alpha >= 0");
        const double sd2 = shape_.sigma_data * shape_.sigma_data;
        const double norm = std::sqrt(sd2 + beta * beta);
        act.c_skip = shape_.skip ? sd2 / (sd2 + beta * beta) : 0.0;
        act.c_out = shape_.skip ? beta * shape_.sigma_data / norm : 1.0;

        act.z.resize(in);
        for (std::size_t i = 0; i < d; ++i) act.z[i] = x_t[i] / norm;
        act.z[d] = std::log1p(alpha);
        act.z[d + 1] = 0.25 * std::log(beta);

        affine(tensor_at(0), tensor_at(1), act.z, act.a1);
        silu(act.a1, act.h1);
        affine(tensor_at(2), tensor_at(3), act.h1, act.a2);
        silu(act.a2, act.h2);
        affine(tensor_at(4), tensor_at(5), act.h2, act.head_d);
        affine(tensor_at(6), tensor_at(7), act.h2, act.head_r);

        act.out_d.resize(d);
        act.out_r.resize(d);
        for (std::size_t i = 0; i < d; ++i) {
            act.out_d[i] = act.c_skip * x_t[i] + act.c_out * act.head_d[i];
            act.out_r[i] = shape_.sigma_data * act.head_r[i];
        }
    }

    /// Accumulates dLoss/dparams into `grad` given dLoss/dD and dLoss/dR for one example.
    void backward(const Activations& act, const std::vector<double>& g_d,
                  const std::vector<double>& g_r, std::vector<double>& grad) const {
        const std::size_t d = dim(), h = shape_.hidden;
        std::vector<double> dhead_d(d), dhead_r(d), dh2(h, 0.0), da2(h), dh1(h, 0.0), da1(h);
        for (std::size_t i = 0; i < d; ++i) {
            dhead_d[i] = act.c_out * g_d[i];
            dhead_r[i] = shape_.sigma_data * g_r[i];
        }
        affine_backward(tensor_at(4), tensor_at(5), act.h2, dhead_d, dh2, grad);
        affine_backward(tensor_at(6), tensor_at(7), act.h2, dhead_r, dh2, grad);
        for (std::size_t j = 0; j < h; ++j) da2[j] = dh2[j] * silu_grad(act.a2[j]);
        affine_backward(tensor_at(2), tensor_at(3), act.h1, da2, dh1, grad);
        for (std::size_t j = 0; j < h; ++j) da1[j] = dh1[j] * silu_grad(act.a1[j]);
        std::vector<double> dz(act.z.size(), 0.0);
        affine_backward(tensor_at(0), tensor_at(1), act.z, da1, dz, grad);
    }

private:
    const ParamTensor& tensor_at(std::size_t i) const noexcept { return tensors_[i]; }

    void affine(const ParamTensor& w, const ParamTensor& b, const std::vector<double>& in,
                std::vector<double>& out) const {
        out.resize(w.rows);
        const double* wp = params_.data() + w.offset;
        const double* bp = params_.data() + b.offset;
        for (std::size_t r = 0; r < w.rows; ++r) {
            double acc = bp[r];
            const double* row = wp + r * w.cols;
            for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * in[c];
            out[r] = acc;
        }
    }

    // grad_in += W^T g; grad[W] += g in^T; grad[b] += g
    void affine_backward(const ParamTensor& w, const ParamTensor& b, const std::vector<double>& in,
                         const std::vector<double>& g, std::vector<double>& grad_in,
                         std::vector<double>& grad) const {
        const double* wp = params_.data() + w.offset;
        double* gw = grad.data() + w.offset;
        double* gb = grad.data() + b.offset;
        for (std::size_t r = 0; r < w.rows; ++r) {
            const double gr = g[r];
            if (gr == 0.0) continue;
            gb[r] += gr;
            const double* row = wp + r * w.cols;
            double* grow = gw + r * w.cols;
            for (std::size_t c = 0; c < w.cols; ++c) {
                grow[c] += gr * in[c];
                grad_in[c] += gr * row[c];
            }
        }
    }

    static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

    static void silu(const std::vector<double>& a, std::vector<double>& out) {
        out.resize(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * sigmoid(a[i]);
    }

    static double silu_grad(double x) {
        const double s = sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
    }

    PredictorShape shape_;
    std::vector<ParamTensor> tensors_;
    std::vector<double> params_;
};

/// Which heads are trained and what the residual head regresses onto.
struct TrainingObjective {
    bool train_denoiser = true;
    bool train_residual = true;
    bool residual_is_clean = false;  // R -> x0 instead of R -> x0 - blur(x0)
};

struct TrainExample {
    Grid x0;
    std::size_t t;
    double alpha;
    double beta;
    Grid x_t;
    Grid target_d;  // blur(x0, alpha_t)
    Grid target_r;  // x0 - blur(x0, alpha_t), or x0 for clean-target objectives
};

using TrainBatch = std::vector<TrainExample>;

inline TrainExample make_example(Grid x0, const DiffusionSchedule& s, std::size_t t,
                                 NoiseSource& rng, const TrainingObjective& obj = {}) {
    if (t < 1 || t > s.T) throw DomainError("training example: t out of range 1..T");
    TrainExample ex{std::move(x0), t, s.alpha[t], s.beta[t], Grid(), Grid(), Grid()};
    ex.target_d = blur(ex.x0, ex.alpha);
    ex.target_r = obj.residual_is_clean ? ex.x0 : ex.x0 - ex.target_d;
    ex.x_t = ex.target_d;
    for (auto& v : ex.x_t.values()) v += ex.beta * rng.normal();
    return ex;
}

/// Draws `n` examples with x0 from `draw_x0` and t uniform over 1..T.
inline TrainBatch make_batch(const std::function<Grid(NoiseSource&)>& draw_x0,
                             const DiffusionSchedule& s, std::size_t n, NoiseSource& rng,
                             const TrainingObjective& obj = {}) {
    TrainBatch batch;
    batch.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Grid x0 = draw_x0(rng);
        const std::size_t t = 1 + rng.index(s.T);
        batch.push_back(make_example(std::move(x0), s, t, rng, obj));
    }
    return batch;
}

struct LossPair {
    double denoiser = 0.0;
    double residual = 0.0;
    double total() const noexcept { return denoiser + residual; }
};

/// Mean squared error of each head over batch and grid cells. Heads not trained by `obj`
/// report 0.
inline LossPair loss(const TwoHeadPredictor& p, const TrainBatch& batch,
                     const TrainingObjective& obj = {}) {
    if (batch.empty()) throw DomainError("loss: empty batch");
    LossPair out;
    TwoHeadPredictor::Activations act;
    for (const auto& ex : batch) {
        p.forward(ex.x_t, ex.alpha, ex.beta, act);
        for (std::size_t i = 0; i < p.dim(); ++i) {
            const double ed = act.out_d[i] - ex.target_d[i];
            const double er = act.out_r[i] - ex.target_r[i];
            if (obj.train_denoiser) out.denoiser += ed * ed;
            if (obj.train_residual) out.residual += er * er;
        }
    }
    const double n = static_cast<double>(batch.size() * p.dim());
    out.denoiser /= n;
    out.residual /= n;
    return out;
}

/// Analytic gradient of loss().total() with respect to the flat parameter vector.
inline std::vector<double> gradient(const TwoHeadPredictor& p, const TrainBatch& batch,
                                    const TrainingObjective& obj = {}) {
    if (batch.empty()) throw DomainError("gradient: empty batch");
    std::vector<double> grad(p.parameters().size(), 0.0);
    const std::size_t d = p.dim();
    const double scale = 2.0 / static_cast<double>(batch.size() * d);
    TwoHeadPredictor::Activations act;
    std::vector<double> g_d(d), g_r(d);
    for (const auto& ex : batch) {
        p.forward(ex.x_t, ex.alpha, ex.beta, act);
        for (std::size_t i = 0; i < d; ++i) {
            g_d[i] = obj.train_denoiser ? scale * (act.out_d[i] - ex.target_d[i]) : 0.0;
            g_r[i] = obj.train_residual ? scale * (act.out_r[i] - ex.target_r[i]) : 0.0;
        }
        p.backward(act, g_d, g_r, grad);
    }
    return grad;
}

/// One plain SGD step. Returns the loss before the update; non-finite loss throws.
inline LossPair train_step(TwoHeadPredictor& p, const TrainBatch& batch, double lr,
                           const TrainingObjective& obj = {}) {
    const LossPair before = loss(p, batch, obj);
    if (!std::isfinite(before.total())) throw NumericalError("train_step: non-finite loss");
    if (lr == 0.0) return before;
    const std::vector<double> grad = gradient(p, batch, obj);
    auto& w = p.parameters();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * grad[i];
    for (double v : w)
        if (!std::isfinite(v)) throw NumericalError("train_step: parameters became non-finite");
    return before;
}

struct TrainingOptions {
    std::size_t steps = 20000;
    std::size_t batch = 64;
    double lr = 0.02;
    std::uint64_t seed = 0;
    TrainingObjective objective;
    std::size_t record_every = 0;  // 0: no loss history
};

/// Plain SGD over fresh batches drawn from `draw_x0` and the steps of `s`. Returns the loss
/// history sampled every `record_every` steps.
inline std::vector<LossPair> train(TwoHeadPredictor& p,
                                   const std::function<Grid(NoiseSource&)>& draw_x0,
                                   const DiffusionSchedule& s, const TrainingOptions& opts) {
    NoiseSource rng(opts.seed);
    std::vector<LossPair> history;
    for (std::size_t step = 0; step < opts.steps; ++step) {
        const TrainBatch batch = make_batch(draw_x0, s, opts.batch, rng, opts.objective);
        const LossPair l = train_step(p, batch, opts.lr, opts.objective);
        if (opts.record_every && step % opts.record_every == 0) history.push_back(l);
    }
    return history;
}

// Checkpoints: <prefix>.bin holds the parameters as little-endian float64; <prefix>.json
// describes the shape and tensor layout.

namespace detail {

inline std::uint64_t to_little_endian(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xff);
    return r;
}

}  // namespace detail

inline void save_checkpoint(const TwoHeadPredictor& p, const std::filesystem::path& prefix) {
    nlohmann::json meta;
    meta["format"] = "warm-two-head-v1";
    meta["dtype"] = "float64-le";
    meta["height"] = p.shape().height;
    meta["width"] = p.shape().width;
    meta["hidden"] = p.shape().hidden;
    meta["skip"] = p.shape().skip;
    meta["sigma_data"] = p.shape().sigma_data;
    meta["activation"] = "silu";
    meta["parameter_count"] = p.parameters().size();
    for (const auto& t : p.tensors())
        meta["tensors"].push_back(
            {{"name", t.name}, {"shape", {t.rows, t.cols}}, {"offset", t.offset}});

    std::ofstream bin(prefix.string() + ".bin", std::ios::binary);
    for (double v : p.parameters()) {
        std::uint64_t bits = detail::to_little_endian(std::bit_cast<std::uint64_t>(v));
        bin.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    std::ofstream js(prefix.string() + ".json");
    js << meta.dump(2) << '\n';
    if (!bin || !js) throw Error("checkpoint: failed to write " + prefix.string());
}

inline TwoHeadPredictor load_checkpoint(const std::filesystem::path& prefix) {
    std::ifstream js(prefix.string() + ".json");
    if (!js) throw ConfigError("checkpoint: cannot open " + prefix.string() + ".json");
    nlohmann::json meta;
    try {
        js >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint: bad sidecar: ") + e.what());
    }
    if (meta.value("format", "") != "warm-two-head-v1")
        throw ConfigError("checkpoint: unsupported format");
    PredictorShape shape;
    shape.height = meta.at("height");
    shape.width = meta.at("width");
    shape.hidden = meta.at("hidden");
    shape.skip = meta.at("skip");
    shape.sigma_data = meta.at("sigma_data");
    TwoHeadPredictor p(shape);
    if (meta.at("parameter_count").get<std::size_t>() != p.parameters().size())
        throw ConfigError("checkpoint: parameter count does not match the shape");

    std::ifstream bin(prefix.string() + ".bin", std::ios::binary);
    if (!bin) throw ConfigError("checkpoint: cannot open " + prefix.string() + ".bin");
    for (double& v : p.parameters()) {
        std::uint64_t bits = 0;
        if (!bin.read(reinterpret_cast<char*>(&bits), sizeof bits))
            throw ConfigError("checkpoint: parameter file truncated");
        v = std::bit_cast<double>(detail::to_little_endian(bits));
    }
    return p;
}

}  // namespace warm
