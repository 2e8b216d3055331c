#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "alg/evaluator.hpp"
#include "alg/filters.hpp"
#include "alg/schedule.hpp"
#include "alg/tensor.hpp"

namespace alg {

enum class GuidanceVariant { PlainCond, CFG, ALG, LPAll };

inline const char* variant_name(GuidanceVariant v) {
    switch (v) {
        case GuidanceVariant::PlainCond: return "plain";
        case GuidanceVariant::CFG: return "cfg";
        case GuidanceVariant::ALG: return "alg";
        case GuidanceVariant::LPAll: return "lpall";
    }
    return "?";
}

struct GuidanceConfig {
    double w = 5.0;
    FilterSpec filter;
    StrengthSchedule schedule;
    GuidanceVariant variant = GuidanceVariant::ALG;
};

template <typename T>
struct GuidanceOutput {
    Video<T> velocity;
    int model_evals = 0;
    // Named intermediate velocities, filled on request for diagnostics/tests.
    std::map<std::string, Video<T>> terms;
};

// Core combination with the filter strength already resolved (the sampler
// applies its delay rule before calling).  Identical (conditioning, label)
// evaluations are computed once and shared, which makes the strength-0 case
// bit-identical to CFG and keeps the decomposition identity exact.
template <typename T>
GuidanceOutput<T> guided_velocity(const VelocityEvaluator<T>& model, const Video<T>& x_t,
                                  const Video<T>* x_init, double t, CondLabel c,
                                  GuidanceVariant variant, double w, const FilterSpec& filter,
                                  double strength, bool want_terms = false) {
    if (w < 0) throw std::invalid_argument("guidance: w must be >= 0");
    GuidanceOutput<T> out;
    const CondLabel null_c = CondLabel::null_label();

    if (variant == GuidanceVariant::PlainCond) {
        out.velocity = model.velocity(x_t, x_init, t, c);
        out.model_evals = 1;
        if (want_terms) out.terms["cond"] = out.velocity;
        return out;
    }

    // All combinations use the form v_c + (w-1)(v_c - v_u), algebraically the
    // usual extrapolation from the unconditional branch but exact at w = 1.
    auto combine = [w](const Video<T>& v_c, const Video<T>& v_u) {
        Video<T> v = Video<T>::zeros_like(v_c);
        for (size_t i = 0; i < v.data.size(); ++i)
            v.data[i] = static_cast<T>(v_c.data[i] + (w - 1) * (v_c.data[i] - v_u.data[i]));
        return v;
    };

    if (variant == GuidanceVariant::CFG) {
        Video<T> v_c = model.velocity(x_t, x_init, t, c);
        Video<T> v_u = model.velocity(x_t, x_init, t, null_c);
        out.velocity = combine(v_c, v_u);
        out.model_evals = 2;
        if (want_terms) {
            out.terms["cond"] = std::move(v_c);
            out.terms["uncond"] = std::move(v_u);
        }
        return out;
    }

    if (x_init == nullptr)
        throw std::invalid_argument("guidance: filtered variants require x_init");
    Video<T> x_lp = low_pass(*x_init, filter, strength);

    if (variant == GuidanceVariant::LPAll) {
        Video<T> v_c = model.velocity(x_t, &x_lp, t, c);
        Video<T> v_u = model.velocity(x_t, &x_lp, t, null_c);
        out.velocity = combine(v_c, v_u);
        out.model_evals = 2;
        if (want_terms) {
            out.terms["cond_lp"] = std::move(v_c);
            out.terms["uncond_lp"] = std::move(v_u);
        }
        return out;
    }

    // ALG: conditional branch sees the filtered image, the unconditional
    // anchor sees the clean one.  With strength 0 the two unconditional
    // evaluations coincide and are shared.
    Video<T> v_c = model.velocity(x_t, &x_lp, t, c);
    Video<T> v_u_lp = model.velocity(x_t, &x_lp, t, null_c);
    Video<T> v_u_clean;
    if (strength == 0) {
        v_u_clean = v_u_lp;
        out.model_evals = 2;
    } else {
        v_u_clean = model.velocity(x_t, x_init, t, null_c);
        out.model_evals = 3;
    }
    // Anchor shift plus the CFG-form combination: the shift is exactly zero
    // when the two unconditional branches coincide, so the strength-0 case
    // stays bit-identical to CFG.
    out.velocity = combine(v_c, v_u_lp);
    for (size_t i = 0; i < out.velocity.data.size(); ++i)
        out.velocity.data[i] = static_cast<T>((v_u_clean.data[i] - v_u_lp.data[i]) +
                                              out.velocity.data[i]);
    if (want_terms) {
        out.terms["cond_lp"] = std::move(v_c);
        out.terms["uncond_lp"] = std::move(v_u_lp);
        out.terms["uncond_clean"] = std::move(v_u_clean);
    }
    return out;
}

template <typename T>
GuidanceOutput<T> cfg_velocity(const VelocityEvaluator<T>& model, const Video<T>& x_t,
                               const Video<T>* x_init, double t, CondLabel c, double w) {
    return guided_velocity(model, x_t, x_init, t, c, GuidanceVariant::CFG, w, FilterSpec{}, 0.0);
}

template <typename T>
GuidanceOutput<T> plain_velocity(const VelocityEvaluator<T>& model, const Video<T>& x_t,
                                 const Video<T>* x_init, double t, CondLabel c) {
    return guided_velocity(model, x_t, x_init, t, c, GuidanceVariant::PlainCond, 1.0,
                           FilterSpec{}, 0.0);
}

template <typename T>
GuidanceOutput<T> alg_velocity(const VelocityEvaluator<T>& model, const Video<T>& x_t,
                               const Video<T>* x_init, double t, CondLabel c,
                               const GuidanceConfig& cfg) {
    if (cfg.variant != GuidanceVariant::ALG)
        throw std::invalid_argument("alg_velocity: config variant must be ALG");
    double strength = eval_strength(cfg.schedule, t);
    return guided_velocity(model, x_t, x_init, t, c, GuidanceVariant::ALG, cfg.w, cfg.filter,
                           strength);
}

template <typename T>
GuidanceOutput<T> lp_all_velocity(const VelocityEvaluator<T>& model, const Video<T>& x_t,
                                  const Video<T>* x_init, double t, CondLabel c,
                                  const GuidanceConfig& cfg) {
    if (cfg.variant != GuidanceVariant::LPAll)
        throw std::invalid_argument("lp_all_velocity: config variant must be LPAll");
    double strength = eval_strength(cfg.schedule, t);
    return guided_velocity(model, x_t, x_init, t, c, GuidanceVariant::LPAll, cfg.w, cfg.filter,
                           strength);
}

// Splits the ALG velocity into a motion-enhancement part (CFG-style guidance
// entirely under the filtered image) and a fidelity correction (the shift of
// the unconditional anchor from filtered back to clean).  With shared
// evaluations term_a + term_b reconstructs the ALG output exactly.
template <typename T>
std::pair<Video<T>, Video<T>> decompose_alg(const VelocityEvaluator<T>& model,
                                            const Video<T>& x_t, const Video<T>* x_init, double t,
                                            CondLabel c, const GuidanceConfig& cfg) {
    if (cfg.variant != GuidanceVariant::ALG)
        throw std::invalid_argument("decompose_alg: config variant must be ALG");
    if (x_init == nullptr) throw std::invalid_argument("decompose_alg: x_init required");
    double strength = eval_strength(cfg.schedule, t);
    Video<T> x_lp = low_pass(*x_init, cfg.filter, strength);
    Video<T> v_c = model.velocity(x_t, &x_lp, t, c);
    Video<T> v_u_lp = model.velocity(x_t, &x_lp, t, CondLabel::null_label());
    Video<T> v_u_clean = strength == 0
                             ? v_u_lp
                             : model.velocity(x_t, x_init, t, CondLabel::null_label());
    Video<T> term_a = Video<T>::zeros_like(v_c);
    Video<T> term_b = Video<T>::zeros_like(v_c);
    for (size_t i = 0; i < v_c.data.size(); ++i) {
        term_a.data[i] =
            static_cast<T>(v_c.data[i] + (cfg.w - 1) * (v_c.data[i] - v_u_lp.data[i]));
        term_b.data[i] = static_cast<T>(v_u_clean.data[i] - v_u_lp.data[i]);
    }
    return {std::move(term_a), std::move(term_b)};
}

}  // namespace alg
