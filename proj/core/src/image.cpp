#include "gazesearch/image.hpp"

#include "gazesearch/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace gazesearch::image {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
    auto* where = static_cast<std::string*>(png_get_error_ptr(png));
    *where = msg;
    png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

}  // namespace

GrayImage read_png(const std::filesystem::path& path) {
    File file(std::fopen(path.c_str(), "rb"));
    if (!file) throw DataError("cannot open " + path.string());
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw DataError(path.string() + ": not a PNG file");
    }

    std::string message;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, png_warn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("libpng initialisation failed");
    }
    GrayImage out;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError(path.string() + ": " + message);
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const auto color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
        color == PNG_COLOR_TYPE_PALETTE) {
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    if (png_get_rowbytes(png, info) != static_cast<std::size_t>(out.width)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError(path.string() + ": unsupported pixel layout");
    }
    out.pixels.resize(static_cast<std::size_t>(out.width) * out.height);
    rows.resize(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.pixels.data() + static_cast<std::size_t>(y) * out.width;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
    if (image.width <= 0 || image.height <= 0 ||
        image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
        throw DataError("write_png: malformed image");
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    File file(std::fopen(path.c_str(), "wb"));
    if (!file) throw DataError("cannot write " + path.string());

    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_fail, png_warn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("libpng initialisation failed");
    }
    std::vector<png_bytep> rows(image.height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError(path.string() + ": " + message);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    for (int y = 0; y < image.height; ++y) {
        rows[y] = const_cast<png_bytep>(image.pixels.data() + static_cast<std::size_t>(y) * image.width);
    }
    png_set_rows(png, info, rows.data());
    png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    png_destroy_write_struct(&png, &info);
}

ad::Matrix to_model_input(const GrayImage& image, int size) {
    if (size <= 0 || image.width <= 0 || image.height <= 0) throw DataError("empty image");
    ad::Matrix out(size, size);
    const double sx = static_cast<double>(image.width) / size;
    const double sy = static_cast<double>(image.height) / size;
    for (int r = 0; r < size; ++r) {
        const double y = std::clamp((r + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
        const int y0 = static_cast<int>(y);
        const int y1 = std::min(y0 + 1, image.height - 1);
        const double fy = y - y0;
        for (int c = 0; c < size; ++c) {
            const double x = std::clamp((c + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
            const int x0 = static_cast<int>(x);
            const int x1 = std::min(x0 + 1, image.width - 1);
            const double fx = x - x0;
            const double top = (1 - fx) * image.at(x0, y0) + fx * image.at(x1, y0);
            const double bottom = (1 - fx) * image.at(x0, y1) + fx * image.at(x1, y1);
            out(r, c) = ((1 - fy) * top + fy * bottom) / 255.0;
        }
    }
    return out;
}

}  // namespace gazesearch::image
