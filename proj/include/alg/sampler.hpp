#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "alg/evaluator.hpp"
#include "alg/guidance.hpp"
#include "alg/rng.hpp"
#include "alg/tensor.hpp"

namespace alg {

struct SampleConfig {
    int n_steps = 50;
    GuidanceConfig guidance;
    int delay_steps = 2;          // initial steps forced to unfiltered conditioning
    bool first_frame_override = true;
    uint64_t seed = 0;
    bool record_trajectory = false;  // store state snapshots
    int snapshot_stride = 5;
    int feature_layer = -1;  // >= 0: capture hidden features each step
    int feature_frame = 4;
};

struct TrajectoryStep {
    int index;       // 1-based step number
    double t;        // time the velocity was evaluated at ((index-1)/N)
    double strength; // filter strength actually applied
    int model_evals;
};

template <typename T>
struct Trajectory {
    std::vector<TrajectoryStep> steps;
    std::vector<std::pair<double, Video<T>>> snapshots;  // (t after step, state)
    std::vector<Eigen::MatrixXd> features;               // per step, when enabled
    long total_model_evals = 0;
};

template <typename T>
Video<T> euler_step(const Video<T>& x, const Video<T>& v, double dt) {
    if (!x.same_shape(v)) throw std::invalid_argument("euler_step: shape mismatch");
    if (!(dt > 0)) throw std::invalid_argument("euler_step: dt must be > 0");
    Video<T> out = x;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] += static_cast<T>(dt * static_cast<double>(v.data[i]));
    return out;
}

// Hidden-activation snapshot of one frame at one block, tokens x dims.
template <typename T>
Eigen::MatrixXd capture_features(const VelocityEvaluator<T>& model, const Video<T>& x_t,
                                 const Video<T>* x_init, double t, CondLabel c, int layer,
                                 int frame = 4) {
    return model.features(x_t, x_init, t, c, layer, frame);
}

// Forward-Euler integration of the probability-flow ODE from seeded noise at
// t=0 to data at t=1 on the uniform N-step grid.  Step i transports the state
// from (i-1)/N to i/N, evaluating velocity and filter schedule at the step's
// start time; the first delay_steps steps always see the unfiltered image.
// After the loop, frame 0 is optionally overridden with the clean image.
template <typename T>
std::pair<Video<T>, Trajectory<T>> sample(const VelocityEvaluator<T>& model,
                                          const Video<T>* image, CondLabel c,
                                          const SampleConfig& cfg, int f = 16, int ch = 1,
                                          int h = 16, int w = 16) {
    if (cfg.n_steps < 1) throw std::invalid_argument("sample: n_steps must be >= 1");
    if (cfg.delay_steps < 0 || cfg.delay_steps >= cfg.n_steps)
        throw std::invalid_argument("sample: delay_steps must be in [0, n_steps)");
    if (model.mode() == ModelMode::I2V && image == nullptr)
        throw std::invalid_argument("sample: I2V model requires a conditioning image");
    if (image != nullptr && (image->f != 1 || image->c != ch || image->h != h || image->w != w))
        throw std::invalid_argument("sample: image incompatible with clip shape");

    const GuidanceConfig& g = cfg.guidance;
    const bool filtered_variant =
        g.variant == GuidanceVariant::ALG || g.variant == GuidanceVariant::LPAll;
    const double dt = 1.0 / cfg.n_steps;

    Rng rng = fork_rng(cfg.seed, 0x73616d706c65ull);
    Video<T> x = rng.normal_video<T>(f, ch, h, w);

    Trajectory<T> traj;
    traj.steps.reserve(cfg.n_steps);
    for (int i = 1; i <= cfg.n_steps; ++i) {
        const double t = static_cast<double>(i - 1) / cfg.n_steps;
        double strength = 0.0;
        if (filtered_variant && i > cfg.delay_steps) strength = eval_strength(g.schedule, t);
        GuidanceOutput<T> gv =
            guided_velocity(model, x, image, t, c, g.variant, g.w, g.filter, strength);
        if (cfg.feature_layer >= 0) {
            // Diagnostic capture of the conditional branch's activations under
            // the conditioning actually in effect this step (extra forward
            // pass, not counted in the guidance eval budget).
            if (image != nullptr && filtered_variant && strength > 0) {
                Video<T> x_lp = low_pass(*image, g.filter, strength);
                traj.features.push_back(
                    model.features(x, &x_lp, t, c, cfg.feature_layer, cfg.feature_frame));
            } else {
                traj.features.push_back(
                    model.features(x, image, t, c, cfg.feature_layer, cfg.feature_frame));
            }
        }
        x = euler_step(x, gv.velocity, dt);
        traj.steps.push_back(TrajectoryStep{i, t, strength, gv.model_evals});
        traj.total_model_evals += gv.model_evals;
        if (cfg.record_trajectory && (i % cfg.snapshot_stride == 0 || i == cfg.n_steps))
            traj.snapshots.emplace_back(static_cast<double>(i) / cfg.n_steps, x);
    }

    if (cfg.first_frame_override && image != nullptr) x.set_frame(0, *image);
    return {std::move(x), std::move(traj)};
}

}  // namespace alg
