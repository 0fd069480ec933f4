#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ismo/tensor.hpp"

namespace ismo {

// 8-bit interleaved RGB image, row-major.
struct ImageU8 {
    int width = 0, height = 0;
    std::vector<std::uint8_t> rgb;  // height*width*3

    ImageU8() = default;
    ImageU8(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t* px(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* px(int x, int y) const {
        return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

// Binary raster, one byte per pixel with values {0,1}.
struct Mask {
    int width = 0, height = 0;
    std::vector<std::uint8_t> v;

    Mask() = default;
    Mask(int w, int h) : width(w), height(h), v(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t& at(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
    std::size_t count_nonzero() const;
};

void write_png(const std::string& path, const ImageU8& img);
void write_png_gray(const std::string& path, const Mask& mask);  // 0 -> black, 1 -> white
ImageU8 read_png(const std::string& path);
Mask read_png_mask(const std::string& path);  // any nonzero channel -> 1

// image (h, w, 3 u8) -> NCHW tensor slice scaled to [0,1]
void image_to_tensor(const ImageU8& img, Tensor& batch, int n);
Tensor image_to_tensor(const ImageU8& img);
ImageU8 tensor_to_image(const Tensor& batch, int n);

void draw_filled_circle(ImageU8& img, int cx, int cy, int radius,
                        std::array<std::uint8_t, 3> color);

double mask_iou(const Mask& a, const Mask& b);

}  // namespace ismo
