#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "alg/rng.hpp"
#include "alg/tensor.hpp"

namespace alg {

// Synthetic corpus: a single hard-edged shape drifting over a toroidal 16x16
// grid, 16 frames, one channel, background -1 / foreground +1.  The class
// label encodes heading and speed: class_id = heading * 2 + (speed == 3).
constexpr int kClipFrames = 16;
constexpr int kClipChannels = 1;
constexpr int kClipSize = 16;
constexpr int kNumClasses = 16;

enum class ShapeKind { Circle, Square };

// Compass headings, image coordinates (y grows downward): N is up.
inline void heading_delta(int heading, int& dx, int& dy) {
    static constexpr int table[8][2] = {
        {0, -1},   // N
        {1, -1},   // NE
        {1, 0},    // E
        {1, 1},    // SE
        {0, 1},    // S
        {-1, 1},   // SW
        {-1, 0},   // W
        {-1, -1},  // NW
    };
    dx = table[heading][0];
    dy = table[heading][1];
}

struct ClipSpec {
    ShapeKind shape = ShapeKind::Circle;
    int heading = 0;   // 0..7
    int speed = 1;     // pixels per frame; dataset uses {1,3}, 0 allowed for static clips
    int start_x = 0, start_y = 0;
    int radius = 3;    // 1..6
    uint64_t seed = 0;

    int class_id() const { return heading * 2 + (speed >= 3 ? 1 : 0); }
};

struct LabeledClip {
    VideoF video;
    CondLabel label;
    ClipSpec spec;
};

namespace detail {

inline int torus_dist(int a, int b, int n) {
    int d = std::abs(a - b) % n;
    return std::min(d, n - d);
}

inline void render_shape(VideoF& vid, int fi, const ClipSpec& cs, int cx, int cy) {
    for (int y = 0; y < vid.h; ++y)
        for (int x = 0; x < vid.w; ++x) {
            int ddx = torus_dist(x, cx, vid.w);
            int ddy = torus_dist(y, cy, vid.h);
            bool inside = cs.shape == ShapeKind::Circle
                              ? ddx * ddx + ddy * ddy <= cs.radius * cs.radius
                              : std::max(ddx, ddy) <= cs.radius;
            vid.at(fi, 0, y, x) = inside ? 1.0f : -1.0f;
        }
}

}  // namespace detail

inline LabeledClip gen_clip(const ClipSpec& cs) {
    if (cs.heading < 0 || cs.heading > 7)
        throw std::invalid_argument("gen_clip: heading must be in 0..7");
    if (cs.radius < 1 || cs.radius > 6)
        throw std::invalid_argument("gen_clip: radius must be in 1..6");
    if (cs.speed < 0) throw std::invalid_argument("gen_clip: speed must be >= 0");
    int dx, dy;
    heading_delta(cs.heading, dx, dy);
    LabeledClip clip{VideoF(kClipFrames, kClipChannels, kClipSize, kClipSize),
                     CondLabel::of(cs.class_id()), cs};
    for (int k = 0; k < kClipFrames; ++k) {
        int cx = ((cs.start_x + k * cs.speed * dx) % kClipSize + kClipSize) % kClipSize;
        int cy = ((cs.start_y + k * cs.speed * dy) % kClipSize + kClipSize) % kClipSize;
        detail::render_shape(clip.video, k, cs, cx, cy);
    }
    return clip;
}

// n_clips clips with classes assigned round-robin (class counts differ by at
// most one); shape, start position and radius are drawn from a per-clip stream
// so generation is order-independent and reproducible.
inline std::vector<LabeledClip> build_dataset(int n_clips, uint64_t seed) {
    if (n_clips < 1) throw std::invalid_argument("build_dataset: n_clips must be >= 1");
    std::vector<LabeledClip> out;
    out.reserve(n_clips);
    for (int i = 0; i < n_clips; ++i) {
        int cls = i % kNumClasses;
        Rng rng = fork_rng(seed, static_cast<uint64_t>(i));
        ClipSpec cs;
        cs.shape = rng.uniform_int(2) == 0 ? ShapeKind::Circle : ShapeKind::Square;
        cs.heading = cls / 2;
        cs.speed = (cls % 2 == 0) ? 1 : 3;
        cs.start_x = rng.uniform_int(kClipSize);
        cs.start_y = rng.uniform_int(kClipSize);
        cs.radius = 2 + rng.uniform_int(3);
        cs.seed = mix_seed(seed, static_cast<uint64_t>(i));
        out.push_back(gen_clip(cs));
    }
    return out;
}

struct I2VPair {
    VideoF image;  // first frame, [1,C,H,W]
    CondLabel label;
};

inline I2VPair make_i2v_pair(const LabeledClip& clip) {
    return I2VPair{clip.video.frame(0), clip.label};
}

}  // namespace alg
