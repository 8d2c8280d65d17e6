#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "cplab/image.hpp"

namespace cplab::img {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    check(fp != nullptr, "load_png: cannot open '", path, "'");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    check(png && info, "load_png: libpng init failed for '", path, "'");

    Image out;
    std::vector<png_bytep> rows;
    std::vector<unsigned char> buf;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("load_png: '", path, "' is not a readable PNG");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const int bit_depth = png_get_bit_depth(png, info);
    if (bit_depth == 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("load_png: '", path, "' has unsupported bit depth 16 (8-bit only)");
    }
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int h = static_cast<int>(png_get_image_height(png, info));
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int ch = png_get_channels(png, info);
    if (ch != 1 && ch != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail("load_png: '", path, "' decodes to ", ch, " channels (grayscale or RGB only)");
    }

    buf.resize(static_cast<size_t>(h) * w * ch);
    rows.resize(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[static_cast<size_t>(y)] = buf.data() + static_cast<size_t>(y) * w * ch;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    out = Image(h, w, ch);
    for (size_t i = 0; i < out.size(); ++i)
        out.values[i] = static_cast<float>(buf[i]) / 255.0f;
    return out;
}

void save_png(const Image& x, const std::string& path) {
    check(x.channels == 1 || x.channels == 3, "save_png: ", x.channels,
          "-channel image not supported (grayscale or RGB only)");
    check(x.height > 0 && x.width > 0, "save_png: empty image");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    check(fp != nullptr, "save_png: cannot open '", path, "' for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    check(png && info, "save_png: libpng init failed for '", path, "'");

    std::vector<unsigned char> buf(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        // round half-up onto the 8-bit grid
        const double q = std::floor(static_cast<double>(x.values[i]) * 255.0 + 0.5);
        buf[i] = static_cast<unsigned char>(q < 0.0 ? 0.0 : (q > 255.0 ? 255.0 : q));
    }
    std::vector<png_bytep> rows(static_cast<size_t>(x.height));
    for (int y = 0; y < x.height; ++y)
        rows[static_cast<size_t>(y)] = buf.data() + static_cast<size_t>(y) * x.width * x.channels;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail("save_png: write failed for '", path, "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(x.width), static_cast<png_uint_32>(x.height),
                 8, x.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace cplab::img
