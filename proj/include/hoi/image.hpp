#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hoi/bbox.hpp"

namespace hoi {

// Planar (CHW) float image, values nominally in [0,1].
struct Image {
    int w = 0;
    int h = 0;
    int c = 0;
    std::vector<float> data;

    Image() = default;
    Image(int channels, int height, int width, float fill = 0.f)
        : w(width), h(height), c(channels),
          data(static_cast<size_t>(channels) * height * width, fill) {}

    float& at(int ch, int y, int x) {
        return data[(static_cast<size_t>(ch) * h + y) * w + x];
    }
    float at(int ch, int y, int x) const {
        return data[(static_cast<size_t>(ch) * h + y) * w + x];
    }
    size_t plane_size() const { return static_cast<size_t>(w) * h; }
    bool empty() const { return data.empty(); }
};

// 8-bit binary PPM (P6, c=3) and PGM (P5, c=1). Values clamped to [0,1] on write.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);
void write_pgm(const std::string& path, const Image& img);
Image read_pgm(const std::string& path);

// Bilinear with half-pixel centers: src = (dst + 0.5) * scale - 0.5, edges clamped.
Image resize_bilinear(const Image& src, int out_w, int out_h);

// Sample `rect` (in source pixel coordinates, may be fractional) to out_w x out_h.
// The rect is not required to lie inside the image; samples clamp at the border.
Image crop_resize(const Image& src, const BBox& rect, int out_w, int out_h);

Image flip_horizontal(const Image& src);

// Separable Gaussian, radius = ceil(3*sigma), border clamped. sigma <= 0 is identity.
Image gaussian_blur(const Image& src, double sigma);

// uint8 quantization round-trip used by crop caches.
std::vector<uint8_t> to_u8(const Image& img);
Image from_u8(const std::vector<uint8_t>& bytes, int c, int h, int w);

}  // namespace hoi
