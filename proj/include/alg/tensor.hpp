#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace alg {

// Dense video tensor, row-major [frame][channel][row][col].
// Used for clips, latents and velocity fields alike.
template <typename T>
struct Video {
    int f = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Video() = default;
    Video(int f_, int c_, int h_, int w_, T fill = T(0))
        : f(f_), c(c_), h(h_), w(w_) {
        if (f_ < 1 || c_ < 1 || h_ < 1 || w_ < 1)
            throw std::invalid_argument("Video: all dims must be >= 1");
        data.assign(static_cast<size_t>(f_) * c_ * h_ * w_, fill);
    }

    static Video zeros_like(const Video& o) { return Video(o.f, o.c, o.h, o.w); }

    size_t size() const { return data.size(); }
    size_t frame_size() const { return static_cast<size_t>(c) * h * w; }
    size_t plane_size() const { return static_cast<size_t>(h) * w; }

    size_t index(int fi, int ci, int y, int x) const {
        return ((static_cast<size_t>(fi) * c + ci) * h + y) * w + x;
    }
    T& at(int fi, int ci, int y, int x) { return data[index(fi, ci, y, x)]; }
    T at(int fi, int ci, int y, int x) const { return data[index(fi, ci, y, x)]; }

    bool same_shape(const Video& o) const {
        return f == o.f && c == o.c && h == o.h && w == o.w;
    }

    Video frame(int fi) const {
        Video out(1, c, h, w);
        std::copy(data.begin() + fi * frame_size(),
                  data.begin() + (fi + 1) * frame_size(), out.data.begin());
        return out;
    }

    void set_frame(int fi, const Video& src) {
        std::copy(src.data.begin(), src.data.begin() + frame_size(),
                  data.begin() + fi * frame_size());
    }

    void check_finite(const std::string& what) const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v)))
                throw std::runtime_error(what + ": non-finite value in tensor");
    }

    template <typename U>
    Video<U> cast() const {
        Video<U> out(f, c, h, w);
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using VideoF = Video<float>;
using VideoD = Video<double>;

// out = a + s * b, elementwise; shapes must match.
template <typename T>
Video<T> axpy(const Video<T>& a, T s, const Video<T>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("axpy: shape mismatch");
    Video<T> out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += s * b.data[i];
    return out;
}

template <typename T>
double max_abs_diff(const Video<T>& a, const Video<T>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.data[i]) - b.data[i]));
    return m;
}

// Class-conditioning label; id -1 denotes the learned null (unconditional) row.
struct CondLabel {
    int class_id = -1;
    static CondLabel null_label() { return CondLabel{-1}; }
    static CondLabel of(int id) { return CondLabel{id}; }
    bool is_null() const { return class_id < 0; }
    bool operator==(const CondLabel& o) const { return class_id == o.class_id; }
};

}  // namespace alg
