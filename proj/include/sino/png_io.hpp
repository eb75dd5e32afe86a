#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "sino/volume.hpp"

namespace sino {

namespace detail {

inline void put_u32_be(std::vector<uint8_t>& out, uint32_t v)
{
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

inline void png_chunk(std::vector<uint8_t>& out, const char type[4],
                      const std::vector<uint8_t>& payload)
{
    put_u32_be(out, static_cast<uint32_t>(payload.size()));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const uint32_t crc = static_cast<uint32_t>(
        ::crc32(0, out.data() + start, static_cast<uInt>(out.size() - start)));
    put_u32_be(out, crc);
}

}  // namespace detail

/// 8-bit grayscale PNG. Rows are top to bottom.
inline void write_png_gray8(const std::string& path, const std::vector<uint8_t>& pixels,
                            long width, long height)
{
    if (static_cast<long>(pixels.size()) != width * height)
        throw std::invalid_argument("write_png_gray8: size mismatch");

    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>((width + 1) * height));
    for (long y = 0; y < height; ++y) {
        raw.push_back(0);  // filter: none
        raw.insert(raw.end(), pixels.begin() + y * width, pixels.begin() + (y + 1) * width);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw IoError("write_png_gray8: deflate failed");
    comp.resize(comp_len);

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<uint8_t> ihdr;
    detail::put_u32_be(ihdr, static_cast<uint32_t>(width));
    detail::put_u32_be(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // grayscale
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    detail::png_chunk(out, "IHDR", ihdr);
    detail::png_chunk(out, "IDAT", comp);
    detail::png_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("write_png_gray8: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

/// Mid-slice preview with a fixed window/level mapping.
inline void write_slice_png(const Volume3& vol, long slice, const std::string& path,
                            double window_lo, double window_hi)
{
    if (window_hi <= window_lo)
        throw std::invalid_argument("write_slice_png: bad window");
    std::vector<uint8_t> pix(static_cast<size_t>(vol.nu() * vol.nv()));
    for (long j = 0; j < vol.nv(); ++j)
        for (long i = 0; i < vol.nu(); ++i) {
            double t = (vol(i, j, slice) - window_lo) / (window_hi - window_lo);
            t = std::clamp(t, 0.0, 1.0);
            pix[static_cast<size_t>(j * vol.nu() + i)] =
                static_cast<uint8_t>(std::lround(t * 255.0));
        }
    write_png_gray8(path, pix, vol.nu(), vol.nv());
}

}  // namespace sino
