#include "ismo/image.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace ismo {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

void write_png_impl(const std::string& path, int width, int height, int channels,
                    const std::uint8_t* data) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("png: cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png: write failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<png_bytep>(data + static_cast<std::size_t>(y) * width * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::vector<std::uint8_t> read_png_impl(const std::string& path, int& width, int& height) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("png: cannot open: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: read failed: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
        png_set_strip_alpha(png);
    png_read_update_info(png, info);
    std::vector<std::uint8_t> out(static_cast<std::size_t>(width) * height * 3);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y)
        rows[y] = out.data() + static_cast<std::size_t>(y) * width * 3;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

}  // namespace

std::size_t Mask::count_nonzero() const {
    return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](auto x) { return x != 0; }));
}

void write_png(const std::string& path, const ImageU8& img) {
    write_png_impl(path, img.width, img.height, 3, img.rgb.data());
}

void write_png_gray(const std::string& path, const Mask& mask) {
    std::vector<std::uint8_t> gray(mask.v.size());
    for (std::size_t i = 0; i < mask.v.size(); ++i) gray[i] = mask.v[i] ? 255 : 0;
    write_png_impl(path, mask.width, mask.height, 1, gray.data());
}

ImageU8 read_png(const std::string& path) {
    ImageU8 img;
    img.rgb = read_png_impl(path, img.width, img.height);
    return img;
}

Mask read_png_mask(const std::string& path) {
    ImageU8 img = read_png(path);
    Mask m(img.width, img.height);
    for (std::size_t i = 0; i < m.v.size(); ++i)
        m.v[i] = (img.rgb[i * 3] || img.rgb[i * 3 + 1] || img.rgb[i * 3 + 2]) ? 1 : 0;
    return m;
}

void image_to_tensor(const ImageU8& img, Tensor& batch, int n) {
    const int h = batch.dim(2), w = batch.dim(3);
    if (img.height != h || img.width != w || batch.dim(1) != 3)
        throw std::invalid_argument("image_to_tensor: size mismatch");
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                batch.at4(n, c, y, x) = img.px(x, y)[c] / 255.0;
}

Tensor image_to_tensor(const ImageU8& img) {
    Tensor t({1, 3, img.height, img.width});
    image_to_tensor(img, t, 0);
    return t;
}

ImageU8 tensor_to_image(const Tensor& batch, int n) {
    const int h = batch.dim(2), w = batch.dim(3);
    ImageU8 img(w, h);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double v = std::clamp(batch.at4(n, c, y, x), 0.0, 1.0);
                img.px(x, y)[c] = static_cast<std::uint8_t>(v * 255.0 + 0.5);
            }
    return img;
}

void draw_filled_circle(ImageU8& img, int cx, int cy, int radius,
                        std::array<std::uint8_t, 3> color) {
    for (int y = cy - radius; y <= cy + radius; ++y)
        for (int x = cx - radius; x <= cx + radius; ++x) {
            if (!img.in_bounds(x, y)) continue;
            const int dx = x - cx, dy = y - cy;
            if (dx * dx + dy * dy <= radius * radius) {
                std::uint8_t* p = img.px(x, y);
                p[0] = color[0];
                p[1] = color[1];
                p[2] = color[2];
            }
        }
}

double mask_iou(const Mask& a, const Mask& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("mask_iou: size mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        const bool pa = a.v[i] != 0, pb = b.v[i] != 0;
        inter += pa && pb;
        uni += pa || pb;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace ismo
