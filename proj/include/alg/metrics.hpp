#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "alg/tensor.hpp"

namespace alg {

// Exhaustive integer-displacement block matching between two frames: 4x4
// blocks on a stride-4 grid, toroidal wrap, SAD criterion, ties broken by
// smaller displacement magnitude then lexicographic (dy,dx).
struct BlockFlow {
    int blocks_y = 0, blocks_x = 0;
    std::vector<int> dy, dx;      // one per block, row-major over the block grid
    std::vector<double> mag;      // Euclidean displacement magnitude
};

constexpr int kBlockSize = 4;

template <typename T>
BlockFlow block_flow(const Video<T>& frame_a, const Video<T>& frame_b, int search_radius) {
    if (!frame_a.same_shape(frame_b)) throw std::invalid_argument("block_flow: shape mismatch");
    if (search_radius < 1) throw std::invalid_argument("block_flow: search_radius must be >= 1");
    if (frame_a.h < kBlockSize || frame_a.w < kBlockSize)
        throw std::invalid_argument("block_flow: frame smaller than block");
    const int H = frame_a.h, W = frame_a.w;
    BlockFlow out;
    out.blocks_y = H / kBlockSize;
    out.blocks_x = W / kBlockSize;
    for (int by = 0; by < out.blocks_y; ++by)
        for (int bx = 0; bx < out.blocks_x; ++bx) {
            double best_sad = std::numeric_limits<double>::infinity();
            int best_dy = 0, best_dx = 0;
            long best_mag2 = 0;
            for (int dy = -search_radius; dy <= search_radius; ++dy)
                for (int dx = -search_radius; dx <= search_radius; ++dx) {
                    double sad = 0;
                    for (int ci = 0; ci < frame_a.c; ++ci)
                        for (int y = 0; y < kBlockSize; ++y)
                            for (int x = 0; x < kBlockSize; ++x) {
                                int ay = by * kBlockSize + y, ax = bx * kBlockSize + x;
                                int byy = ((ay + dy) % H + H) % H;
                                int bxx = ((ax + dx) % W + W) % W;
                                sad += std::abs(static_cast<double>(frame_a.at(0, ci, ay, ax)) -
                                                frame_b.at(0, ci, byy, bxx));
                            }
                    long mag2 = static_cast<long>(dy) * dy + static_cast<long>(dx) * dx;
                    bool better = sad < best_sad ||
                                  (sad == best_sad &&
                                   (mag2 < best_mag2 ||
                                    (mag2 == best_mag2 &&
                                     (dy < best_dy || (dy == best_dy && dx < best_dx)))));
                    if (better) {
                        best_sad = sad;
                        best_dy = dy;
                        best_dx = dx;
                        best_mag2 = mag2;
                    }
                }
            out.dy.push_back(best_dy);
            out.dx.push_back(best_dx);
            out.mag.push_back(std::sqrt(static_cast<double>(best_mag2)));
        }
    return out;
}

struct DynamicDegree {
    int score = 0;                       // 1 iff enough intervals are dynamic
    double mean_top_flow = 0;            // mean over intervals of the top-5% statistic
    std::vector<double> interval_top;    // per consecutive-frame interval
    std::vector<int> interval_dynamic;   // 0/1 flags
};

// Per consecutive-frame interval: block-flow magnitudes, mean of the top
// ceil(5%) of them; the interval is dynamic iff that mean >= flow_threshold,
// and the video scores 1 iff the dynamic fraction >= frac_threshold.
template <typename T>
DynamicDegree dynamic_degree(const Video<T>& video, double flow_threshold = 1.5,
                             double frac_threshold = 0.5, int search_radius = 4) {
    if (video.f < 2) throw std::invalid_argument("dynamic_degree: need at least 2 frames");
    if (!(frac_threshold > 0 && frac_threshold <= 1))
        throw std::invalid_argument("dynamic_degree: frac_threshold must be in (0,1]");
    DynamicDegree out;
    int dynamic_count = 0;
    for (int fi = 0; fi + 1 < video.f; ++fi) {
        BlockFlow bf = block_flow(video.frame(fi), video.frame(fi + 1), search_radius);
        std::vector<double> mags = bf.mag;
        int top = std::max(1, static_cast<int>(std::ceil(0.05 * mags.size())));
        std::partial_sort(mags.begin(), mags.begin() + top, mags.end(), std::greater<double>());
        double mean_top = 0;
        for (int i = 0; i < top; ++i) mean_top += mags[i];
        mean_top /= top;
        out.interval_top.push_back(mean_top);
        bool dyn = mean_top >= flow_threshold;
        out.interval_dynamic.push_back(dyn ? 1 : 0);
        if (dyn) ++dynamic_count;
    }
    out.mean_top_flow = 0;
    for (double v : out.interval_top) out.mean_top_flow += v;
    out.mean_top_flow /= static_cast<double>(out.interval_top.size());
    double frac = static_cast<double>(dynamic_count) / static_cast<double>(out.interval_top.size());
    out.score = frac >= frac_threshold ? 1 : 0;
    return out;
}

// Mean over consecutive frame pairs of the mean absolute pixel difference.
template <typename T>
double temporal_flicker(const Video<T>& video) {
    if (video.f < 2) throw std::invalid_argument("temporal_flicker: need at least 2 frames");
    const size_t fs = video.frame_size();
    double total = 0;
    for (int fi = 0; fi + 1 < video.f; ++fi) {
        double acc = 0;
        const T* a = video.data.data() + static_cast<size_t>(fi) * fs;
        const T* b = a + fs;
        for (size_t i = 0; i < fs; ++i)
            acc += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
        total += acc / static_cast<double>(fs);
    }
    return total / static_cast<double>(video.f - 1);
}

struct Fidelity {
    double mse = 0;
    double psnr_db = 0;  // +inf when mse == 0
};

// PSNR of video frame 0 against the conditioning image over the [-1,1] range
// (peak 2); an exact match is reported as the +inf sentinel.
template <typename T>
Fidelity first_frame_fidelity(const Video<T>& video, const Video<T>& image) {
    if (image.f != 1 || image.c != video.c || image.h != video.h || image.w != video.w)
        throw std::invalid_argument("first_frame_fidelity: shape mismatch");
    const size_t fs = video.frame_size();
    double acc = 0;
    for (size_t i = 0; i < fs; ++i) {
        double d = static_cast<double>(video.data[i]) - static_cast<double>(image.data[i]);
        acc += d * d;
    }
    Fidelity out;
    out.mse = acc / static_cast<double>(fs);
    out.psnr_db = out.mse == 0 ? std::numeric_limits<double>::infinity()
                               : 10.0 * std::log10(4.0 / out.mse);
    return out;
}

// Mean cosine similarity between each later frame's descriptor and frame 0's.
// Descriptors are 4x4-average-pooled frames, mean-centered.  If a centered
// descriptor is all zero the pair's similarity is 1 when both are zero and 0
// otherwise, and the result is flagged.
template <typename T>
double subject_consistency_proxy(const Video<T>& video, bool* flagged = nullptr) {
    if (video.f < 2) throw std::invalid_argument("subject_consistency: need at least 2 frames");
    if (video.h % 4 != 0 || video.w % 4 != 0)
        throw std::invalid_argument("subject_consistency: dims must be divisible by 4");
    const int ph = video.h / 4, pw = video.w / 4;
    const int dim = video.c * ph * pw;
    auto descriptor = [&](int fi) {
        std::vector<double> d(dim, 0.0);
        int idx = 0;
        for (int ci = 0; ci < video.c; ++ci)
            for (int py = 0; py < ph; ++py)
                for (int px = 0; px < pw; ++px) {
                    double acc = 0;
                    for (int y = 0; y < 4; ++y)
                        for (int x = 0; x < 4; ++x)
                            acc += video.at(fi, ci, py * 4 + y, px * 4 + x);
                    d[idx++] = acc / 16.0;
                }
        double mean = 0;
        for (double v : d) mean += v;
        mean /= dim;
        for (double& v : d) v -= mean;
        return d;
    };
    if (flagged) *flagged = false;
    std::vector<double> d0 = descriptor(0);
    double n0 = 0;
    for (double v : d0) n0 += v * v;
    double total = 0;
    for (int fi = 1; fi < video.f; ++fi) {
        std::vector<double> di = descriptor(fi);
        double ni = 0, dot = 0;
        for (int j = 0; j < dim; ++j) {
            ni += di[j] * di[j];
            dot += d0[j] * di[j];
        }
        if (n0 == 0 || ni == 0) {
            total += (n0 == 0 && ni == 0) ? 1.0 : 0.0;
            if (flagged) *flagged = true;
        } else {
            total += dot / (std::sqrt(n0) * std::sqrt(ni));
        }
    }
    return total / static_cast<double>(video.f - 1);
}

struct ClipMetrics {
    double dynamic_degree = 0;
    double mean_top_flow = 0;
    double temporal_flicker = 0;
    double first_frame_psnr = 0;  // may be +inf
    double subject_consistency = 0;
    bool consistency_flagged = false;
};

template <typename T>
ClipMetrics compute_clip_metrics(const Video<T>& video, const Video<T>* image,
                                 double flow_threshold = 1.5, double frac_threshold = 0.5) {
    ClipMetrics m;
    DynamicDegree dd = dynamic_degree(video, flow_threshold, frac_threshold);
    m.dynamic_degree = dd.score;
    m.mean_top_flow = dd.mean_top_flow;
    m.temporal_flicker = temporal_flicker(video);
    m.first_frame_psnr = image ? first_frame_fidelity(video, *image).psnr_db
                               : std::numeric_limits<double>::quiet_NaN();
    m.subject_consistency = subject_consistency_proxy(video, &m.consistency_flagged);
    return m;
}

struct MetricStats {
    double mean = 0, sd = 0;  // population standard deviation
    int count = 0;
};

struct MetricsReport {
    MetricStats dynamic_degree, mean_top_flow, temporal_flicker, first_frame_psnr,
        subject_consistency;
    int psnr_inf_count = 0;
};

// Means and population standard deviations; +inf PSNR rows are excluded from
// the PSNR statistics and counted separately (NaN marks "no image" rows).
inline MetricsReport aggregate(const std::vector<ClipMetrics>& rows) {
    if (rows.empty()) throw std::invalid_argument("aggregate: empty report list");
    MetricsReport rep;
    auto accumulate = [&](auto get, MetricStats& st) {
        double sum = 0;
        int n = 0;
        for (const auto& r : rows) {
            double v = get(r);
            if (!std::isfinite(v)) continue;
            sum += v;
            ++n;
        }
        st.count = n;
        st.mean = n ? sum / n : 0;
        double ss = 0;
        for (const auto& r : rows) {
            double v = get(r);
            if (!std::isfinite(v)) continue;
            ss += (v - st.mean) * (v - st.mean);
        }
        st.sd = n ? std::sqrt(ss / n) : 0;
    };
    accumulate([](const ClipMetrics& r) { return r.dynamic_degree; }, rep.dynamic_degree);
    accumulate([](const ClipMetrics& r) { return r.mean_top_flow; }, rep.mean_top_flow);
    accumulate([](const ClipMetrics& r) { return r.temporal_flicker; }, rep.temporal_flicker);
    accumulate([](const ClipMetrics& r) { return r.first_frame_psnr; }, rep.first_frame_psnr);
    accumulate([](const ClipMetrics& r) { return r.subject_consistency; }, rep.subject_consistency);
    for (const auto& r : rows)
        if (std::isinf(r.first_frame_psnr)) ++rep.psnr_inf_count;
    return rep;
}

}  // namespace alg
