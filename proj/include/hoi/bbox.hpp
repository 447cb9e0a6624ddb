#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace hoi {

// Axis-aligned box in continuous pixel coordinates, half-open: [x1,x2) x [y1,y2).
struct BBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double center_x() const { return 0.5 * (x1 + x2); }
    double center_y() const { return 0.5 * (y1 + y2); }

    bool valid() const {
        return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
               std::isfinite(y2) && x2 > x1 && y2 > y1;
    }
};

inline void require_valid(const BBox& b, const char* what) {
    if (!b.valid()) throw std::invalid_argument(std::string(what) + ": invalid box");
}

inline double iou(const BBox& a, const BBox& b) {
    require_valid(a, "iou.a");
    require_valid(b, "iou.b");
    const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    return inter / (a.area() + b.area() - inter);
}

// Clamp to [0,w] x [0,h]; empty result (box fully outside) maps to nullopt.
inline std::optional<BBox> clamp_box(const BBox& b, double w, double h) {
    BBox c{std::clamp(b.x1, 0.0, w), std::clamp(b.y1, 0.0, h),
           std::clamp(b.x2, 0.0, w), std::clamp(b.y2, 0.0, h)};
    if (!(c.x2 > c.x1) || !(c.y2 > c.y1)) return std::nullopt;
    return c;
}

inline BBox translated(const BBox& b, double dx, double dy) {
    return {b.x1 + dx, b.y1 + dy, b.x2 + dx, b.y2 + dy};
}

inline BBox scaled_about(const BBox& b, double s, double cx, double cy) {
    return {cx + s * (b.x1 - cx), cy + s * (b.y1 - cy),
            cx + s * (b.x2 - cx), cy + s * (b.y2 - cy)};
}

}  // namespace hoi
