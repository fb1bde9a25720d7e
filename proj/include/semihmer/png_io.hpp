#pragma once

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "semihmer/common.hpp"
#include "semihmer/tensor.hpp"

namespace semihmer {
namespace png_detail {

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

inline uint32_t get_u32(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

inline void put_chunk(std::vector<uint8_t>& out, const char* type, const std::vector<uint8_t>& data) {
    put_u32(out, static_cast<uint32_t>(data.size()));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uint32_t crc = static_cast<uint32_t>(
        ::crc32(0, out.data() + start, static_cast<uInt>(out.size() - start)));
    put_u32(out, crc);
}

inline std::vector<uint8_t> zlib_compress(const std::vector<uint8_t>& raw) {
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> out(bound);
    if (compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        fail("zlib compression failed");
    out.resize(bound);
    return out;
}

inline std::vector<uint8_t> zlib_decompress(const std::vector<uint8_t>& comp, size_t expect) {
    std::vector<uint8_t> out(expect);
    uLongf n = static_cast<uLongf>(expect);
    int rc = uncompress(out.data(), &n, comp.data(), static_cast<uLong>(comp.size()));
    if (rc != Z_OK || n != expect) fail("zlib decompression failed");
    return out;
}

inline int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

// Reverses one scanline filter in place. prev is the reconstructed prior row
// (all zeros for the first row). bpp = bytes per pixel.
inline void unfilter_row(int filter, uint8_t* row, const uint8_t* prev, int bytes, int bpp) {
    switch (filter) {
        case 0:
            break;
        case 1:
            for (int i = bpp; i < bytes; ++i) row[i] = static_cast<uint8_t>(row[i] + row[i - bpp]);
            break;
        case 2:
            for (int i = 0; i < bytes; ++i) row[i] = static_cast<uint8_t>(row[i] + prev[i]);
            break;
        case 3:
            for (int i = 0; i < bytes; ++i) {
                int left = i >= bpp ? row[i - bpp] : 0;
                row[i] = static_cast<uint8_t>(row[i] + (left + prev[i]) / 2);
            }
            break;
        case 4:
            for (int i = 0; i < bytes; ++i) {
                int left = i >= bpp ? row[i - bpp] : 0;
                int ul = i >= bpp ? prev[i - bpp] : 0;
                row[i] = static_cast<uint8_t>(row[i] + paeth(left, prev[i], ul));
            }
            break;
        default:
            fail(strfmt("unsupported scanline filter %d", filter));
    }
}

inline std::vector<uint8_t> encode(const std::vector<uint8_t>& pixels, int w, int h, int channels) {
    if (w <= 0 || h <= 0) fail("image dimensions must be positive");
    if (pixels.size() != static_cast<size_t>(w) * static_cast<size_t>(h) * static_cast<size_t>(channels))
        fail("pixel buffer size mismatch");
    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<uint8_t> ihdr;
    put_u32(ihdr, static_cast<uint32_t>(w));
    put_u32(ihdr, static_cast<uint32_t>(h));
    ihdr.push_back(8);
    ihdr.push_back(channels == 1 ? 0 : 2);
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    put_chunk(out, "IHDR", ihdr);

    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(h) * (static_cast<size_t>(w) * channels + 1));
    for (int y = 0; y < h; ++y) {
        raw.push_back(0);
        const uint8_t* row = pixels.data() + static_cast<size_t>(y) * w * channels;
        raw.insert(raw.end(), row, row + static_cast<size_t>(w) * channels);
    }
    put_chunk(out, "IDAT", zlib_compress(raw));
    put_chunk(out, "IEND", {});
    return out;
}

struct Decoded {
    int w = 0, h = 0, channels = 0;
    std::vector<uint8_t> pixels;  // row-major, interleaved
};

inline Decoded decode(const std::vector<uint8_t>& file) {
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (file.size() < 8 || std::memcmp(file.data(), sig, 8) != 0) fail("not a PNG file");
    size_t pos = 8;
    int w = 0, h = 0, channels = 0;
    std::vector<uint8_t> idat;
    bool seen_ihdr = false, seen_iend = false;
    while (pos + 8 <= file.size() && !seen_iend) {
        uint32_t len = get_u32(file.data() + pos);
        if (pos + 12 + len > file.size()) fail("truncated PNG chunk");
        std::string type(reinterpret_cast<const char*>(file.data() + pos + 4), 4);
        const uint8_t* data = file.data() + pos + 8;
        if (type == "IHDR") {
            if (len != 13) fail("bad IHDR length");
            w = static_cast<int>(get_u32(data));
            h = static_cast<int>(get_u32(data + 4));
            int depth = data[8], color = data[9], interlace = data[12];
            if (depth != 8) fail(strfmt("unsupported PNG bit depth %d", depth));
            if (color == 0)
                channels = 1;
            else if (color == 2)
                channels = 3;
            else
                fail(strfmt("unsupported PNG color type %d", color));
            if (interlace != 0) fail("interlaced PNG is unsupported");
            seen_ihdr = true;
        } else if (type == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (type == "IEND") {
            seen_iend = true;
        }
        pos += 12 + len;
    }
    if (!seen_ihdr || !seen_iend || idat.empty()) fail("incomplete PNG stream");
    if (w <= 0 || h <= 0) fail("bad PNG dimensions");

    const int stride = w * channels;
    std::vector<uint8_t> raw =
        zlib_decompress(idat, static_cast<size_t>(h) * (static_cast<size_t>(stride) + 1));
    Decoded d;
    d.w = w;
    d.h = h;
    d.channels = channels;
    d.pixels.resize(static_cast<size_t>(h) * stride);
    std::vector<uint8_t> prev(static_cast<size_t>(stride), 0);
    for (int y = 0; y < h; ++y) {
        const uint8_t* src = raw.data() + static_cast<size_t>(y) * (stride + 1);
        uint8_t* dst = d.pixels.data() + static_cast<size_t>(y) * stride;
        std::memcpy(dst, src + 1, static_cast<size_t>(stride));
        unfilter_row(src[0], dst, prev.data(), stride, channels);
        std::memcpy(prev.data(), dst, static_cast<size_t>(stride));
    }
    return d;
}

inline std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open '" + path + "'");
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail("write failed for '" + path + "'");
}

}  // namespace png_detail

// Grayscale image in [0,1] -> 8-bit gray PNG.
inline void write_png_gray(const std::string& path, const Tensor& img) {
    if (img.ndim() != 2) fail("gray PNG expects a rank-2 image");
    const int h = img.dim(0), w = img.dim(1);
    std::vector<uint8_t> px(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double v = img.at(y, x);
            v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            px[static_cast<size_t>(y) * w + x] = static_cast<uint8_t>(std::lround(v * 255.0));
        }
    png_detail::write_file(path, png_detail::encode(px, w, h, 1));
}

// 8-bit PNG -> grayscale image in [0,1]; RGB input is averaged to gray.
inline Tensor read_png_gray(const std::string& path) {
    png_detail::Decoded d = png_detail::decode(png_detail::read_file(path));
    Tensor img({d.h, d.w});
    for (int y = 0; y < d.h; ++y)
        for (int x = 0; x < d.w; ++x) {
            const uint8_t* p = d.pixels.data() + (static_cast<size_t>(y) * d.w + x) * d.channels;
            double v = 0.0;
            for (int c = 0; c < d.channels; ++c) v += p[c];
            img.at(y, x) = v / (255.0 * d.channels);
        }
    return img;
}

// RGB image as three stacked planes (3, H, W) in [0,1] -> 8-bit RGB PNG.
inline void write_png_rgb(const std::string& path, const Tensor& img) {
    if (img.ndim() != 3 || img.dim(0) != 3) fail("rgb PNG expects a (3, H, W) image");
    const int h = img.dim(1), w = img.dim(2);
    std::vector<uint8_t> px(static_cast<size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = img.at(c, y, x);
                v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                px[(static_cast<size_t>(y) * w + x) * 3 + c] =
                    static_cast<uint8_t>(std::lround(v * 255.0));
            }
    png_detail::write_file(path, png_detail::encode(px, w, h, 3));
}

}  // namespace semihmer
