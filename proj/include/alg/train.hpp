#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "alg/model.hpp"
#include "alg/rng.hpp"
#include "alg/synthetic.hpp"
#include "alg/tensor.hpp"

namespace alg {

struct TrainConfig {
    int steps = 4000;
    int batch_size = 16;
    double lr = 2e-3;
    double p_drop = 0.1;  // probability of replacing the class label with null
    uint64_t seed = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void validate() const {
        if (steps < 0) throw std::invalid_argument("train: steps must be >= 0");
        if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
        if (!(lr > 0)) throw std::invalid_argument("train: lr must be > 0");
        if (p_drop < 0 || p_drop > 1) throw std::invalid_argument("train: p_drop must be in [0,1]");
    }
};

// Flow-matching regression loss at one (x0, x1, t): the model sees the
// interpolation x_t = (1-t) x0 + t x1 and should predict x1 - x0.
template <typename T>
double fm_loss(const VelocityEvaluator<T>& model, const Video<T>& x1, const Video<T>* x_init,
               CondLabel c, double t, const Video<T>& x0) {
    if (!x0.same_shape(x1)) throw std::invalid_argument("fm_loss: x0/x1 shape mismatch");
    if (t < 0 || t > 1) throw std::invalid_argument("fm_loss: t must be in [0,1]");
    Video<T> x_t = Video<T>::zeros_like(x0);
    for (size_t i = 0; i < x_t.data.size(); ++i)
        x_t.data[i] = static_cast<T>((1.0 - t) * x0.data[i] + t * x1.data[i]);
    Video<T> v = model.velocity(x_t, x_init, t, c);
    double acc = 0;
    for (size_t i = 0; i < v.data.size(); ++i) {
        double d = static_cast<double>(v.data[i]) - (static_cast<double>(x1.data[i]) - x0.data[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(v.data.size());
}

// Same loss on a concrete model, accumulating parameter gradients (scaled by
// `grad_scale`) into the model's grad buffers.  Used by the trainer and by the
// finite-difference gradient tests.
template <typename T>
double fm_loss_grad(VelocityModel<T>& model, const Video<T>& x1, const Video<T>* x_init,
                    CondLabel c, double t, const Video<T>& x0, detail::ModelTape<T>& tape,
                    double grad_scale = 1.0) {
    if (!x0.same_shape(x1)) throw std::invalid_argument("fm_loss_grad: x0/x1 shape mismatch");
    Video<T> x_t = Video<T>::zeros_like(x0);
    for (size_t i = 0; i < x_t.data.size(); ++i)
        x_t.data[i] = static_cast<T>((1.0 - t) * x0.data[i] + t * x1.data[i]);
    Video<T> v = model.forward(x_t, x_init, t, c, tape);
    const double n = static_cast<double>(v.data.size());
    Video<T> dv = Video<T>::zeros_like(v);
    double acc = 0;
    for (size_t i = 0; i < v.data.size(); ++i) {
        double d = static_cast<double>(v.data[i]) - (static_cast<double>(x1.data[i]) - x0.data[i]);
        acc += d * d;
        dv.data[i] = static_cast<T>(2.0 * d / n * grad_scale);
    }
    model.backward(dv, x_t, t, c, tape);
    return acc / n;
}

struct TrainStats {
    std::vector<double> loss_curve;  // mean batch loss per step
};

namespace detail {

// One optimization run over either mode; batch draws use one sequential stream
// so results are reproducible bit-for-bit given (seed, config, dataset).
template <typename T>
TrainStats run_training(VelocityModel<T>& model, const std::vector<LabeledClip>& dataset,
                        const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train: dataset must be non-empty");
    const ArchConfig& arch = model.arch();
    TrainStats stats;
    stats.loss_curve.reserve(cfg.steps);
    Rng rng = fork_rng(cfg.seed, 0x747261696eull);
    ModelTape<T> tape;
    const bool i2v = model.mode() == ModelMode::I2V;
    for (int step = 1; step <= cfg.steps; ++step) {
        model.zero_grad();
        double batch_loss = 0;
        for (int bi = 0; bi < cfg.batch_size; ++bi) {
            const LabeledClip& clip = dataset[rng.uniform_int(static_cast<int>(dataset.size()))];
            double t = rng.uniform();
            CondLabel c = clip.label;
            if (rng.uniform() < cfg.p_drop) c = CondLabel::null_label();
            Video<T> x0 =
                rng.normal_video<T>(arch.frames, arch.data_channels, arch.height, arch.width);
            Video<T> x1 = clip.video.template cast<T>();
            Video<T> x_init;
            if (i2v) x_init = x1.frame(0);
            batch_loss += fm_loss_grad(model, x1, i2v ? &x_init : nullptr, c, t, x0, tape,
                                       1.0 / cfg.batch_size);
        }
        model.adam_step(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, step);
        stats.loss_curve.push_back(batch_loss / cfg.batch_size);
    }
    return stats;
}

}  // namespace detail

template <typename T = float>
VelocityModel<T> train_t2v(const std::vector<LabeledClip>& dataset, const TrainConfig& cfg,
                           const ArchConfig& arch = ArchConfig{}, TrainStats* stats = nullptr) {
    VelocityModel<T> model(arch, ModelMode::T2V, cfg.seed);
    TrainStats s = detail::run_training(model, dataset, cfg);
    if (stats) *stats = std::move(s);
    return model;
}

template <typename T>
VelocityModel<T> finetune_i2v(const VelocityModel<T>& t2v, const std::vector<LabeledClip>& dataset,
                              const TrainConfig& cfg, TrainStats* stats = nullptr) {
    VelocityModel<T> model = VelocityModel<T>::inflate_to_i2v(t2v);
    TrainStats s = detail::run_training(model, dataset, cfg);
    if (stats) *stats = std::move(s);
    return model;
}

}  // namespace alg
