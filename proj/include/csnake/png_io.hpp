#pragma once

// 8-bit PNG read/write via libpng. Everything is normalized to RGB or GRAY
// on read; palette/alpha/16-bit inputs are expanded or stripped.

#include <cstdio>
#include <memory>

#include <png.h>

#include "csnake/common.hpp"
#include "csnake/geometry.hpp"

namespace csnake {

struct ImageU8 {
    int w = 0, h = 0;
    int channels = 0;  // 1 or 3
    std::vector<std::uint8_t> pix;  // row-major, interleaved

    ImageU8() = default;
    ImageU8(int w_, int h_, int c)
        : w(w_), h(h_), channels(c), pix(static_cast<std::size_t>(w_) * h_ * c, 0) {}

    std::uint8_t& at(int x, int y, int c) {
        return pix[(static_cast<std::size_t>(y) * w + x) * channels + c];
    }
    std::uint8_t at(int x, int y, int c) const {
        return pix[(static_cast<std::size_t>(y) * w + x) * channels + c];
    }
};

namespace pngdetail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace pngdetail

inline ImageU8 read_png(const std::string& path) {
    pngdetail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("png: cannot open '" + path + "'");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: reader allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png: info allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png: failed to read '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png: unsupported channel count in '" + path + "'");
    }
    ImageU8 img(static_cast<int>(w), static_cast<int>(h), channels);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = img.pix.data() + static_cast<std::size_t>(y) * w * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline void write_png(const std::string& path, const ImageU8& img) {
    if (img.channels != 1 && img.channels != 3) throw ContractViolation("png: image must be GRAY or RGB");
    pngdetail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("png: cannot open '" + path + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: writer allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png: info allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png: failed to write '" + path + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_const_bytep> rows(img.h);
    for (int y = 0; y < img.h; ++y)
        rows[y] = img.pix.data() + static_cast<std::size_t>(y) * img.w * img.channels;
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline ImageU8 mask_to_image(const Mask& m) {
    ImageU8 img(m.w, m.h, 1);
    for (std::size_t i = 0; i < m.data.size(); ++i) img.pix[i] = m.data[i] ? 255 : 0;
    return img;
}

}  // namespace csnake
