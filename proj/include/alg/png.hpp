#pragma once

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "alg/io.hpp"
#include "alg/tensor.hpp"

namespace alg {

namespace detail {

inline void png_write_be32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

inline void png_chunk(std::vector<uint8_t>& out, const char type[4],
                      const std::vector<uint8_t>& data) {
    png_write_be32(out, static_cast<uint32_t>(data.size()));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uLong crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
    png_write_be32(out, static_cast<uint32_t>(crc));
}

inline std::vector<uint8_t> png_encode(int width, int height, const std::vector<uint8_t>& pixels,
                                       int channels) {
    // Scanlines with filter byte 0, zlib-compressed at a fixed level for
    // byte-identical reruns.
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(height) * (1 + static_cast<size_t>(width) * channels));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        const uint8_t* row = pixels.data() + static_cast<size_t>(y) * width * channels;
        raw.insert(raw.end(), row, row + static_cast<size_t>(width) * channels);
    }
    uLongf clen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> compressed(clen);
    if (compress2(compressed.data(), &clen, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw IoError("png: zlib compression failed");
    compressed.resize(clen);

    std::vector<uint8_t> out = {137, 80, 78, 71, 13, 10, 26, 10};
    std::vector<uint8_t> ihdr;
    png_write_be32(ihdr, static_cast<uint32_t>(width));
    png_write_be32(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8);                                    // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);                // grayscale / truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    png_chunk(out, "IHDR", ihdr);
    png_chunk(out, "IDAT", compressed);
    png_chunk(out, "IEND", {});
    return out;
}

}  // namespace detail

inline void write_png_gray8(const std::string& path, int width, int height,
                            const std::vector<uint8_t>& pixels) {
    auto bytes = detail::png_encode(width, height, pixels, 1);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed: " + path);
}

inline void write_png_rgb8(const std::string& path, int width, int height,
                           const std::vector<uint8_t>& pixels) {
    auto bytes = detail::png_encode(width, height, pixels, 3);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed: " + path);
}

// [-1,1] -> [0,255] with round-half-up, clamped.
inline uint8_t pixel_to_byte(double v) {
    double scaled = (v + 1.0) / 2.0 * 255.0;
    long r = std::lround(scaled);
    if (r < 0) r = 0;
    if (r > 255) r = 255;
    return static_cast<uint8_t>(r);
}

// One frame (channel 0) as grayscale bytes.
template <typename T>
std::vector<uint8_t> frame_gray8(const Video<T>& video, int fi) {
    std::vector<uint8_t> out(static_cast<size_t>(video.h) * video.w);
    for (int y = 0; y < video.h; ++y)
        for (int x = 0; x < video.w; ++x)
            out[static_cast<size_t>(y) * video.w + x] =
                pixel_to_byte(static_cast<double>(video.at(fi, 0, y, x)));
    return out;
}

// Frames left-to-right with a 1-px black separator.
template <typename T>
std::vector<uint8_t> contact_sheet_gray8(const Video<T>& video, int& out_w, int& out_h) {
    out_h = video.h;
    out_w = video.f * video.w + (video.f - 1);
    std::vector<uint8_t> sheet(static_cast<size_t>(out_w) * out_h, 0);
    for (int fi = 0; fi < video.f; ++fi) {
        int x0 = fi * (video.w + 1);
        for (int y = 0; y < video.h; ++y)
            for (int x = 0; x < video.w; ++x)
                sheet[static_cast<size_t>(y) * out_w + x0 + x] =
                    pixel_to_byte(static_cast<double>(video.at(fi, 0, y, x)));
    }
    return sheet;
}

}  // namespace alg
