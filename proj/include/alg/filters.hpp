#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "alg/tensor.hpp"

namespace alg {

// Low-pass family applied to the conditioning image during early sampling.
enum class FilterKind { BilinearDownUp, GaussianBlur };

struct FilterSpec {
    FilterKind kind = FilterKind::BilinearDownUp;
    // Strength at which the Gaussian kernel rule is anchored; kernel width
    // scales linearly in strength relative to this value.
    double reference_strength = 2.5;

    static FilterSpec bilinear() { return FilterSpec{FilterKind::BilinearDownUp, 2.5}; }
    static FilterSpec gaussian(double reference_strength = 2.5) {
        return FilterSpec{FilterKind::GaussianBlur, reference_strength};
    }
};

namespace detail {

struct BilinearTap {
    int i0, i1;
    double w0, w1;
};

// Half-pixel-center source coordinate for output index d: s = (d+0.5)*in/out - 0.5,
// clamped to the valid range so edge samples clamp rather than wrap.
inline std::vector<BilinearTap> bilinear_taps(int in, int out) {
    std::vector<BilinearTap> taps(out);
    for (int d = 0; d < out; ++d) {
        double s = (d + 0.5) * static_cast<double>(in) / out - 0.5;
        if (s < 0) s = 0;
        if (s > in - 1) s = in - 1;
        int i0 = static_cast<int>(std::floor(s));
        if (i0 > in - 1) i0 = in - 1;
        int i1 = std::min(i0 + 1, in - 1);
        double frac = s - i0;
        taps[d] = {i0, i1, 1.0 - frac, frac};
    }
    return taps;
}

}  // namespace detail

// Separable bilinear resample of every frame to (out_h, out_w).
template <typename T>
Video<T> bilinear_resize(const Video<T>& vid, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1)
        throw std::invalid_argument("bilinear_resize: output dims must be >= 1");
    auto row_taps = detail::bilinear_taps(vid.h, out_h);
    auto col_taps = detail::bilinear_taps(vid.w, out_w);
    Video<T> out(vid.f, vid.c, out_h, out_w);
    // Rows pass into a scratch (out_h x vid.w), then columns pass.
    std::vector<double> scratch(static_cast<size_t>(out_h) * vid.w);
    for (int fi = 0; fi < vid.f; ++fi)
        for (int ci = 0; ci < vid.c; ++ci) {
            for (int y = 0; y < out_h; ++y) {
                const auto& ty = row_taps[y];
                for (int x = 0; x < vid.w; ++x)
                    scratch[static_cast<size_t>(y) * vid.w + x] =
                        ty.w0 * vid.at(fi, ci, ty.i0, x) + ty.w1 * vid.at(fi, ci, ty.i1, x);
            }
            for (int y = 0; y < out_h; ++y)
                for (int x = 0; x < out_w; ++x) {
                    const auto& tx = col_taps[x];
                    out.at(fi, ci, y, x) =
                        static_cast<T>(tx.w0 * scratch[static_cast<size_t>(y) * vid.w + tx.i0] +
                                       tx.w1 * scratch[static_cast<size_t>(y) * vid.w + tx.i1]);
                }
        }
    return out;
}

// Normalized 1-D Gaussian taps of odd width.
inline std::vector<double> gaussian_kernel(int kernel_width, double sigma) {
    if (kernel_width < 1 || kernel_width % 2 == 0)
        throw std::invalid_argument("gaussian_kernel: width must be odd and positive");
    if (!(sigma > 0)) throw std::invalid_argument("gaussian_kernel: sigma must be > 0");
    std::vector<double> k(kernel_width);
    int half = kernel_width / 2;
    double sum = 0;
    for (int i = 0; i < kernel_width; ++i) {
        double d = i - half;
        k[i] = std::exp(-0.5 * d * d / (sigma * sigma));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// Separable Gaussian blur with circular (wrap-around) boundary handling,
// matching the toroidal geometry of the synthetic clips.
template <typename T>
Video<T> gaussian_blur(const Video<T>& vid, int kernel_width, double sigma) {
    auto k = gaussian_kernel(kernel_width, sigma);
    int half = kernel_width / 2;
    Video<T> out(vid.f, vid.c, vid.h, vid.w);
    std::vector<double> scratch(static_cast<size_t>(vid.h) * vid.w);
    for (int fi = 0; fi < vid.f; ++fi)
        for (int ci = 0; ci < vid.c; ++ci) {
            // Horizontal pass.
            for (int y = 0; y < vid.h; ++y)
                for (int x = 0; x < vid.w; ++x) {
                    double acc = 0;
                    for (int j = -half; j <= half; ++j) {
                        int xs = ((x + j) % vid.w + vid.w) % vid.w;
                        acc += k[j + half] * vid.at(fi, ci, y, xs);
                    }
                    scratch[static_cast<size_t>(y) * vid.w + x] = acc;
                }
            // Vertical pass.
            for (int y = 0; y < vid.h; ++y)
                for (int x = 0; x < vid.w; ++x) {
                    double acc = 0;
                    for (int j = -half; j <= half; ++j) {
                        int ys = ((y + j) % vid.h + vid.h) % vid.h;
                        acc += k[j + half] * scratch[static_cast<size_t>(ys) * vid.w + x];
                    }
                    out.at(fi, ci, y, x) = static_cast<T>(acc);
                }
        }
    return out;
}

// Kernel width for the blur filter at a given strength: proportional to frame
// height and to strength/reference, rounded to the nearest odd width not below
// the rounded value, floored at 3 so any positive strength actually filters.
inline int blur_kernel_width(int height, double strength, double reference_strength) {
    long r = std::lround(0.05 * height * strength / reference_strength);
    if (r < 1) r = 1;
    if (r % 2 == 0) ++r;
    if (r < 3) r = 3;
    return static_cast<int>(r);
}

// Strength-indexed low-pass filter.  strength == 0 is a bit-exact identity for
// both kinds.  BilinearDownUp resamples each frame down by `strength` and back;
// strengths in (0, 1] change nothing because the down-size rounds back to the
// original.  GaussianBlur blurs each frame with a kernel whose width follows
// blur_kernel_width and sigma equal to that width.
template <typename T>
Video<T> low_pass(const Video<T>& vid, const FilterSpec& spec, double strength) {
    if (strength < 0) throw std::invalid_argument("low_pass: strength must be >= 0");
    if (strength == 0) return vid;
    if (spec.kind == FilterKind::BilinearDownUp) {
        int dh = std::max(1L, std::lround(vid.h / strength));
        int dw = std::max(1L, std::lround(vid.w / strength));
        if (dh >= vid.h && dw >= vid.w) return vid;
        return bilinear_resize(bilinear_resize(vid, dh, dw), vid.h, vid.w);
    }
    int kw = blur_kernel_width(vid.h, strength, spec.reference_strength);
    return gaussian_blur(vid, kw, static_cast<double>(kw));
}

}  // namespace alg
