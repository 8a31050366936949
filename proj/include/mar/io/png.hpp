#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/tensor/marf.hpp"

namespace mar::io {

/// Grayscale raster; samples hold the raw stored values (0..2^bit_depth - 1).
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    int bit_depth = 8;  // 1, 8 or 16
    std::vector<std::uint16_t> samples;
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

inline void write_png(const std::filesystem::path& path, const GrayImage& img) {
    if (img.bit_depth != 1 && img.bit_depth != 8 && img.bit_depth != 16)
        throw UsageError("write_png: bit depth must be 1, 8 or 16");
    if (img.samples.size() != img.width * img.height) throw UsageError("write_png: sample count mismatch");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        detail::FilePtr fp(std::fopen(tmp.c_str(), "wb"));
        if (!fp) throw std::runtime_error("cannot open " + tmp.string());
        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        png_infop info = png ? png_create_info_struct(png) : nullptr;
        if (!png || !info) {
            png_destroy_write_struct(&png, &info);
            throw std::runtime_error("libpng: cannot allocate write structs");
        }
        if (setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            throw std::runtime_error("libpng: write failed for " + path.string());
        }
        png_init_io(png, fp.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                     img.bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        const std::size_t stride = img.bit_depth == 16 ? img.width * 2 : (img.bit_depth == 8 ? img.width : (img.width + 7) / 8);
        std::vector<png_byte> row(stride);
        for (std::size_t r = 0; r < img.height; ++r) {
            std::fill(row.begin(), row.end(), png_byte{0});
            const auto* src = img.samples.data() + r * img.width;
            for (std::size_t c = 0; c < img.width; ++c) {
                if (img.bit_depth == 16) {
                    row[2 * c] = static_cast<png_byte>(src[c] >> 8);
                    row[2 * c + 1] = static_cast<png_byte>(src[c] & 0xff);
                } else if (img.bit_depth == 8) {
                    row[c] = static_cast<png_byte>(src[c]);
                } else if (src[c]) {
                    row[c / 8] |= static_cast<png_byte>(0x80 >> (c % 8));
                }
            }
            png_write_row(png, row.data());
        }
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    }
    std::filesystem::rename(tmp, path);
}

/// Reads a grayscale PNG (palette/RGB are rejected). 1/2/4-bit data keep their raw values.
inline GrayImage read_png(const std::filesystem::path& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw ConfigError("cannot open " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng: cannot allocate read structs");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ConfigError("libpng: cannot decode " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    GrayImage img;
    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    img.bit_depth = png_get_bit_depth(png, info);
    if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ConfigError("read_png: " + path.string() + " is not a grayscale PNG");
    }
    const std::size_t stride = png_get_rowbytes(png, info);
    std::vector<png_byte> row(stride);
    img.samples.resize(img.width * img.height);
    for (std::size_t r = 0; r < img.height; ++r) {
        png_read_row(png, row.data(), nullptr);
        for (std::size_t c = 0; c < img.width; ++c) {
            std::uint16_t v;
            switch (img.bit_depth) {
                case 16: v = static_cast<std::uint16_t>((row[2 * c] << 8) | row[2 * c + 1]); break;
                case 8: v = row[c]; break;
                default: {
                    const int per_byte = 8 / img.bit_depth;
                    const int shift = 8 - img.bit_depth * (1 + static_cast<int>(c % per_byte));
                    v = static_cast<std::uint16_t>((row[c / per_byte] >> shift) & ((1 << img.bit_depth) - 1));
                }
            }
            img.samples[r * img.width + c] = v;
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

struct Window {
    double level = 0.0;
    double width = 2000.0;
};

/// Maps values through a display window to 8 or 16 bits and writes
/// `<path>.txt` with the window/level used.
inline void write_windowed_png(const std::filesystem::path& path, std::size_t width, std::size_t height,
                               const std::vector<double>& values, Window win, int bit_depth = 8) {
    if (bit_depth != 8 && bit_depth != 16) throw UsageError("write_windowed_png: bit depth must be 8 or 16");
    if (!(win.width > 0.0)) throw UsageError("write_windowed_png: window width must be positive");
    GrayImage img{width, height, bit_depth, std::vector<std::uint16_t>(values.size())};
    const double top = bit_depth == 16 ? 65535.0 : 255.0;
    const double lo = win.level - 0.5 * win.width;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double t = std::clamp((values[i] - lo) / win.width, 0.0, 1.0);
        img.samples[i] = static_cast<std::uint16_t>(std::lround(t * top));
    }
    write_png(path, img);
    std::ostringstream meta;
    meta << "level = " << win.level << "\nwidth = " << win.width << "\nbit_depth = " << bit_depth << "\n";
    auto sidecar = path;
    sidecar += ".txt";
    marf::write_file_atomic(sidecar, meta.str());
}

}  // namespace mar::io
