#include "hoi/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace hoi {

namespace {

uint8_t quantize(float v) {
    float x = std::clamp(v, 0.f, 1.f) * 255.f + 0.5f;
    return static_cast<uint8_t>(x);
}

void write_pnm(const std::string& path, const Image& img, int channels, const char* magic) {
    if (img.c != channels) throw std::runtime_error("pnm: wrong channel count for " + path);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("pnm: cannot write " + path);
    f << magic << "\n" << img.w << " " << img.h << "\n255\n";
    std::vector<uint8_t> row(static_cast<size_t>(img.w) * channels);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < channels; ++ch)
                row[static_cast<size_t>(x) * channels + ch] = quantize(img.at(ch, y, x));
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw std::runtime_error("pnm: write failed for " + path);
}

int read_pnm_token(std::istream& f) {
    // skips whitespace and '#' comments
    while (true) {
        int ch = f.peek();
        if (ch == '#') {
            std::string line;
            std::getline(f, line);
        } else if (std::isspace(ch)) {
            f.get();
        } else {
            break;
        }
    }
    int v;
    if (!(f >> v)) throw std::runtime_error("pnm: malformed header");
    return v;
}

Image read_pnm(const std::string& path, int channels, const char* magic) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("pnm: cannot open " + path);
    char m0, m1;
    f.get(m0);
    f.get(m1);
    if (m0 != magic[0] || m1 != magic[1]) throw std::runtime_error("pnm: bad magic in " + path);
    int w = read_pnm_token(f);
    int h = read_pnm_token(f);
    int maxv = read_pnm_token(f);
    if (maxv != 255) throw std::runtime_error("pnm: only 8-bit supported: " + path);
    f.get();  // single whitespace after maxval
    Image img(channels, h, w);
    std::vector<uint8_t> row(static_cast<size_t>(w) * channels);
    for (int y = 0; y < h; ++y) {
        f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!f) throw std::runtime_error("pnm: truncated payload in " + path);
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < channels; ++ch)
                img.at(ch, y, x) = row[static_cast<size_t>(x) * channels + ch] / 255.f;
    }
    return img;
}

}  // namespace

void write_ppm(const std::string& path, const Image& img) { write_pnm(path, img, 3, "P6"); }
Image read_ppm(const std::string& path) { return read_pnm(path, 3, "P6"); }
void write_pgm(const std::string& path, const Image& img) { write_pnm(path, img, 1, "P5"); }
Image read_pgm(const std::string& path) { return read_pnm(path, 1, "P5"); }

Image resize_bilinear(const Image& src, int out_w, int out_h) {
    if (src.empty()) throw std::runtime_error("resize: empty image");
    if (out_w <= 0 || out_h <= 0) throw std::runtime_error("resize: bad output size");
    Image dst(src.c, out_h, out_w);
    const double sx = static_cast<double>(src.w) / out_w;
    const double sy = static_cast<double>(src.h) / out_h;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y0c = std::clamp(y0, 0, src.h - 1);
        int y1c = std::clamp(y0 + 1, 0, src.h - 1);
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x0c = std::clamp(x0, 0, src.w - 1);
            int x1c = std::clamp(x0 + 1, 0, src.w - 1);
            for (int ch = 0; ch < src.c; ++ch) {
                double top = src.at(ch, y0c, x0c) * (1 - wx) + src.at(ch, y0c, x1c) * wx;
                double bot = src.at(ch, y1c, x0c) * (1 - wx) + src.at(ch, y1c, x1c) * wx;
                dst.at(ch, y, x) = static_cast<float>(top * (1 - wy) + bot * wy);
            }
        }
    }
    return dst;
}

Image crop_resize(const Image& src, const BBox& rect, int out_w, int out_h) {
    require_valid(rect, "crop_resize.rect");
    if (src.empty()) throw std::runtime_error("crop_resize: empty image");
    Image dst(src.c, out_h, out_w);
    const double sx = rect.width() / out_w;
    const double sy = rect.height() / out_h;
    for (int y = 0; y < out_h; ++y) {
        double fy = rect.y1 + (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y0c = std::clamp(y0, 0, src.h - 1);
        int y1c = std::clamp(y0 + 1, 0, src.h - 1);
        for (int x = 0; x < out_w; ++x) {
            double fx = rect.x1 + (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x0c = std::clamp(x0, 0, src.w - 1);
            int x1c = std::clamp(x0 + 1, 0, src.w - 1);
            for (int ch = 0; ch < src.c; ++ch) {
                double top = src.at(ch, y0c, x0c) * (1 - wx) + src.at(ch, y0c, x1c) * wx;
                double bot = src.at(ch, y1c, x0c) * (1 - wx) + src.at(ch, y1c, x1c) * wx;
                dst.at(ch, y, x) = static_cast<float>(top * (1 - wy) + bot * wy);
            }
        }
    }
    return dst;
}

Image flip_horizontal(const Image& src) {
    Image dst(src.c, src.h, src.w);
    for (int ch = 0; ch < src.c; ++ch)
        for (int y = 0; y < src.h; ++y)
            for (int x = 0; x < src.w; ++x) dst.at(ch, y, x) = src.at(ch, y, src.w - 1 - x);
    return dst;
}

Image gaussian_blur(const Image& src, double sigma) {
    if (sigma <= 0.0) return src;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;

    Image tmp(src.c, src.h, src.w), dst(src.c, src.h, src.w);
    for (int ch = 0; ch < src.c; ++ch) {
        for (int y = 0; y < src.h; ++y)
            for (int x = 0; x < src.w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[i + radius] * src.at(ch, y, std::clamp(x + i, 0, src.w - 1));
                tmp.at(ch, y, x) = static_cast<float>(acc);
            }
        for (int y = 0; y < src.h; ++y)
            for (int x = 0; x < src.w; ++x) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i)
                    acc += k[i + radius] * tmp.at(ch, std::clamp(y + i, 0, src.h - 1), x);
                dst.at(ch, y, x) = static_cast<float>(acc);
            }
    }
    return dst;
}

std::vector<uint8_t> to_u8(const Image& img) {
    std::vector<uint8_t> out(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) out[i] = quantize(img.data[i]);
    return out;
}

Image from_u8(const std::vector<uint8_t>& bytes, int c, int h, int w) {
    if (bytes.size() != static_cast<size_t>(c) * h * w)
        throw std::runtime_error("from_u8: size mismatch");
    Image img(c, h, w);
    for (size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.f;
    return img;
}

}  // namespace hoi
