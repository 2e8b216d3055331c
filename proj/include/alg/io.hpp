#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "alg/model.hpp"
#include "alg/tensor.hpp"

namespace alg {

// Filesystem / file-format failures (mapped to their own exit code by the CLI).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void write_u32le(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t read_u32le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError("unexpected end of file reading u32");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void write_i32le(std::ostream& os, int32_t v) {
    write_u32le(os, static_cast<uint32_t>(v));
}

inline int32_t read_i32le(std::istream& is) { return static_cast<int32_t>(read_u32le(is)); }

inline void write_f32le(std::ostream& os, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    write_u32le(os, u);
}

inline float read_f32le(std::istream& is) {
    uint32_t u = read_u32le(is);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

inline void write_f32le_array(std::ostream& os, const float* p, size_t n) {
    for (size_t i = 0; i < n; ++i) write_f32le(os, p[i]);
}

}  // namespace detail

// ---- clip files: "ALGCLIP1" F C H W class_id data ----

inline void save_clip(const std::string& path, const VideoF& video, int class_id) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write("ALGCLIP1", 8);
    detail::write_u32le(os, static_cast<uint32_t>(video.f));
    detail::write_u32le(os, static_cast<uint32_t>(video.c));
    detail::write_u32le(os, static_cast<uint32_t>(video.h));
    detail::write_u32le(os, static_cast<uint32_t>(video.w));
    detail::write_i32le(os, class_id);
    detail::write_f32le_array(os, video.data.data(), video.data.size());
    if (!os) throw IoError("write failed: " + path);
}

struct StoredClip {
    VideoF video;
    int class_id = -1;  // -1 = null label
};

inline StoredClip load_clip(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != "ALGCLIP1") throw IoError("bad clip magic: " + path);
    uint32_t f = detail::read_u32le(is), c = detail::read_u32le(is);
    uint32_t h = detail::read_u32le(is), w = detail::read_u32le(is);
    StoredClip out;
    out.class_id = detail::read_i32le(is);
    out.video = VideoF(static_cast<int>(f), static_cast<int>(c), static_cast<int>(h),
                       static_cast<int>(w));
    for (auto& v : out.video.data) v = detail::read_f32le(is);
    return out;
}

inline void write_manifest(const std::string& path, const std::vector<std::string>& names) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    for (const auto& n : names) os << n << "\n";
    if (!os) throw IoError("write failed: " + path);
}

inline std::vector<std::string> read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path);
    std::vector<std::string> names;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) names.push_back(line);
    }
    return names;
}

// ---- checkpoints: "ALGCKPT1" descriptor sections... ----

inline void save_checkpoint(const std::string& path, const VelocityModel<float>& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write("ALGCKPT1", 8);
    std::string desc = model.arch().descriptor(model.mode());
    detail::write_u32le(os, static_cast<uint32_t>(desc.size()));
    os.write(desc.data(), static_cast<std::streamsize>(desc.size()));
    for (const auto& p : model.params()) {
        detail::write_u32le(os, static_cast<uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        detail::write_u32le(os, static_cast<uint32_t>(p.value.size()));
        detail::write_f32le_array(os, p.value.data(), p.value.size());
    }
    if (!os) throw IoError("write failed: " + path);
}

inline VelocityModel<float> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != "ALGCKPT1") throw IoError("bad checkpoint magic: " + path);
    uint32_t dlen = detail::read_u32le(is);
    std::string desc(dlen, '\0');
    is.read(desc.data(), dlen);
    if (!is) throw IoError("truncated descriptor: " + path);
    ModelMode mode;
    ArchConfig arch = ArchConfig::from_descriptor(desc, mode);
    VelocityModel<float> model(arch, mode, 0);
    size_t loaded = 0;
    while (true) {
        int peek = is.peek();
        if (peek == EOF) break;
        uint32_t nlen = detail::read_u32le(is);
        std::string name(nlen, '\0');
        is.read(name.data(), nlen);
        uint32_t count = detail::read_u32le(is);
        auto& p = [&]() -> ParamTensor<float>& {
            try {
                return model.param(name);
            } catch (const std::invalid_argument&) {
                throw IoError("checkpoint has unknown parameter " + name + ": " + path);
            }
        }();
        if (p.value.size() != count)
            throw IoError("checkpoint size mismatch for " + name + ": " + path);
        for (auto& v : p.value) v = detail::read_f32le(is);
        ++loaded;
    }
    if (loaded != model.params().size())
        throw IoError("checkpoint missing parameters: " + path);
    return model;
}

}  // namespace alg
