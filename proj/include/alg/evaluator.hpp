#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>

#include "alg/tensor.hpp"

namespace alg {

enum class ModelMode { T2V, I2V };

// Anything that can predict a velocity field.  Guidance, sampling and the
// flow-matching loss are written against this interface so that closed-form
// scripted models can stand in for trained weights in tests.
template <typename T>
struct VelocityEvaluator {
    virtual ~VelocityEvaluator() = default;
    virtual ModelMode mode() const = 0;
    // x_init may be null in T2V mode; I2V implementations must reject null.
    virtual Video<T> velocity(const Video<T>& x_t, const Video<T>* x_init, double t,
                              CondLabel c) const = 0;
    // Hidden-activation capture for diagnostics; optional.
    virtual Eigen::MatrixXd features(const Video<T>& /*x_t*/, const Video<T>* /*x_init*/,
                                     double /*t*/, CondLabel /*c*/, int /*layer*/,
                                     int /*frame*/) const {
        throw std::invalid_argument("features: not supported by this evaluator");
    }
};

// Test double: velocity defined by an arbitrary function.
template <typename T>
struct ScriptedEvaluator : VelocityEvaluator<T> {
    using Fn = std::function<Video<T>(const Video<T>&, const Video<T>*, double, CondLabel)>;
    Fn fn;
    ModelMode mode_ = ModelMode::I2V;

    ScriptedEvaluator() = default;
    ScriptedEvaluator(Fn f, ModelMode m = ModelMode::I2V) : fn(std::move(f)), mode_(m) {}

    ModelMode mode() const override { return mode_; }
    Video<T> velocity(const Video<T>& x_t, const Video<T>* x_init, double t,
                      CondLabel c) const override {
        return fn(x_t, x_init, t, c);
    }
};

}  // namespace alg
