#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "alg/tensor.hpp"

namespace alg {

// Unnormalized forward 2-D DFT power |X[u,v]|^2 of one channel of a single
// frame, computed by the row-column decomposition.
template <typename T>
std::vector<double> dft2d_power(const Video<T>& frame, int fi, int ci) {
    const int H = frame.h, W = frame.w;
    const double tau = 6.283185307179586476925286766559;
    // 1-D DFT along rows.
    std::vector<std::complex<double>> rows(static_cast<size_t>(H) * W);
    for (int y = 0; y < H; ++y)
        for (int v = 0; v < W; ++v) {
            std::complex<double> acc = 0;
            for (int x = 0; x < W; ++x) {
                double a = -tau * v * x / W;
                acc += std::complex<double>(std::cos(a), std::sin(a)) *
                       static_cast<double>(frame.at(fi, ci, y, x));
            }
            rows[static_cast<size_t>(y) * W + v] = acc;
        }
    // 1-D DFT along columns, collect power.
    std::vector<double> power(static_cast<size_t>(H) * W);
    for (int u = 0; u < H; ++u)
        for (int v = 0; v < W; ++v) {
            std::complex<double> acc = 0;
            for (int y = 0; y < H; ++y) {
                double a = -tau * u * y / H;
                acc += std::complex<double>(std::cos(a), std::sin(a)) *
                       rows[static_cast<size_t>(y) * W + v];
            }
            power[static_cast<size_t>(u) * W + v] = std::norm(acc);
        }
    return power;
}

struct BandEnergy {
    double low = 0, high = 0;
    double total() const { return low + high; }
};

// Splits spectral energy of a single frame (all channels summed) into the
// bands below/above cutoff_fraction of Nyquist.  Frequencies are mapped to
// signed coordinates, normalized per axis so Nyquist sits at radius 1, and a
// bin is "low" iff its radius is strictly below cutoff_fraction.  DC is always
// low; the Nyquist checkerboard bin (radius sqrt(2)) is always high.
template <typename T>
BandEnergy dft_band_energy(const Video<T>& frame, double cutoff_fraction) {
    if (!(cutoff_fraction > 0 && cutoff_fraction < 1))
        throw std::invalid_argument("dft_band_energy: cutoff_fraction must be in (0,1)");
    const int H = frame.h, W = frame.w;
    BandEnergy e;
    for (int fi = 0; fi < frame.f; ++fi)
        for (int ci = 0; ci < frame.c; ++ci) {
            auto power = dft2d_power(frame, fi, ci);
            for (int u = 0; u < H; ++u)
                for (int v = 0; v < W; ++v) {
                    double su = (u <= H / 2) ? u : u - H;
                    double sv = (v <= W / 2) ? v : v - W;
                    double r = std::hypot(su / (H / 2.0), sv / (W / 2.0));
                    double p = power[static_cast<size_t>(u) * W + v];
                    (r < cutoff_fraction ? e.low : e.high) += p;
                }
        }
    return e;
}

}  // namespace alg
