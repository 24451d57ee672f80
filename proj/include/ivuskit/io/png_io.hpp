#pragma once

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "../error.hpp"
#include "../grid.hpp"

namespace ivuskit {

// 8-bit grayscale PNG I/O. The toolkit's own files are always written this
// way; reads reject anything that is not single-channel 8-bit data, since a
// silent conversion would corrupt the normalization contract.

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_error_fn(png_structp png, png_const_charp msg) {
    (void)msg;
    std::longjmp(png_jmpbuf(png), 1);
}

inline void png_warn_fn(png_structp, png_const_charp) {}

}  // namespace detail

inline Grid2D<std::uint8_t> read_png_gray8(const std::string& path) {
    detail::FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open image file: " + path);

    png_byte sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw IoError("not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                             detail::png_error_fn, detail::png_warn_fn);
    if (!png) throw IoError("libpng init failed reading " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng init failed reading " + path);
    }

    Grid2D<std::uint8_t> out;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("PNG decode error in " + path);
    }

    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);

    if (color != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("expected single-channel grayscale PNG: " + path);
    }
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (depth > 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("expected 8-bit PNG, got " + std::to_string(depth) + "-bit: " + path);
    }
    png_read_update_info(png, info);

    out = Grid2D<std::uint8_t>(static_cast<int>(h), static_cast<int>(w));
    rows.resize(h);
    for (png_uint_32 r = 0; r < h; ++r) rows[r] = out.row(static_cast<int>(r));
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

inline void write_png_gray8(const std::string& path, const Grid2D<std::uint8_t>& img) {
    if (img.empty()) throw IoError("refusing to write empty image: " + path);
    detail::FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot create image file: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              detail::png_error_fn, detail::png_warn_fn);
    if (!png) throw IoError("libpng init failed writing " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed writing " + path);
    }

    std::vector<png_const_bytep> rows(img.height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode error for " + path);
    }

    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < img.height; ++r) rows[r] = img.row(r);
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Interleaved RGB, 3 bytes per pixel. Used by the plot renderer.
inline void write_png_rgb8(const std::string& path, int height, int width,
                           const std::vector<std::uint8_t>& rgb) {
    if (height <= 0 || width <= 0 || rgb.size() != static_cast<std::size_t>(height) * width * 3)
        throw IoError("bad RGB buffer for " + path);
    detail::FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot create image file: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              detail::png_error_fn, detail::png_warn_fn);
    if (!png) throw IoError("libpng init failed writing " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed writing " + path);
    }

    std::vector<png_const_bytep> rows(height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode error for " + path);
    }

    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int r = 0; r < height; ++r)
        rows[r] = rgb.data() + static_cast<std::size_t>(r) * width * 3;
    png_write_image(png, const_cast<png_bytepp>(rows.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace ivuskit
