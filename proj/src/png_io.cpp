#include "lldiff/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace lldiff {

namespace {
struct FileCloser {
    void operator()(FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;
}  // namespace

Image load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed to decode " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int depth = png_get_bit_depth(png, info);
    int color = png_get_color_type(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);  // stream is big-endian; we want host LE
    png_read_update_info(png, info);
    depth = png_get_bit_depth(png, info);

    std::vector<png_byte> raw((size_t)h * png_get_rowbytes(png, info));
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + (size_t)y * png_get_rowbytes(png, info);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    std::vector<float> px((size_t)h * w * 3);
    if (depth == 16) {
        const uint16_t* p = reinterpret_cast<const uint16_t*>(raw.data());
        for (size_t i = 0; i < px.size(); ++i) px[i] = p[i] * (1.f / 65535.f);
    } else {
        for (size_t i = 0; i < px.size(); ++i) px[i] = raw[i] * (1.f / 255.f);
    }
    return Image((int)h, (int)w, Domain::srgb, std::move(px));
}

void save_png(const Image& img, const std::string& path, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw ArgError("save_png: bit depth must be 8 or 16");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, bit_depth, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);

    size_t n = img.data.size();
    if (bit_depth == 16) {
        std::vector<uint16_t> row16((size_t)img.width * 3);
        size_t i = 0;
        for (int y = 0; y < img.height; ++y) {
            for (size_t k = 0; k < row16.size(); ++k, ++i)
                row16[k] = (uint16_t)std::lround(std::fmin(std::fmax(img.data[i], 0.f), 1.f) * 65535.f);
            png_write_row(png, reinterpret_cast<png_bytep>(row16.data()));
        }
        (void)n;
    } else {
        std::vector<uint8_t> row8((size_t)img.width * 3);
        size_t i = 0;
        for (int y = 0; y < img.height; ++y) {
            for (size_t k = 0; k < row8.size(); ++k, ++i)
                row8[k] = (uint8_t)std::lround(std::fmin(std::fmax(img.data[i], 0.f), 1.f) * 255.f);
            png_write_row(png, row8.data());
        }
    }
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

}  // namespace lldiff
