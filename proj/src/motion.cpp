#include "hoi/motion.hpp"

#include <cmath>
#include <stdexcept>

namespace hoi {

HandMotionDescriptor hand_motion(const BBox& obj_box, const std::array<BBox, 3>& hand_boxes) {
    require_valid(obj_box, "hand_motion.obj");
    if (!(obj_box.width() > 0.0) || !(obj_box.height() > 0.0))
        throw std::invalid_argument("hand_motion: degenerate object box");
    HandMotionDescriptor d;
    for (int p = 0; p < 3; ++p) {
        const BBox& h = hand_boxes[p];
        require_valid(h, "hand_motion.hand");
        d.values[4 * p + 0] = (obj_box.center_x() - h.center_x()) / obj_box.width();
        d.values[4 * p + 1] = (obj_box.center_y() - h.center_y()) / obj_box.height();
        d.values[4 * p + 2] = h.width() / obj_box.width();
        d.values[4 * p + 3] = h.height() / obj_box.height();
    }
    return d;
}

PositionalEncoding positional_encode(const HandMotionDescriptor& d) {
    PositionalEncoding pe;
    for (int e = 0; e < 12; ++e) {
        const double v = d.values[e];
        if (!std::isfinite(v)) throw std::invalid_argument("positional_encode: non-finite input");
        double freq = M_PI;  // 2^f * pi
        for (int f = 0; f < 12; ++f) {
            pe.values[e * 24 + f * 2 + 0] = std::sin(freq * v);
            pe.values[e * 24 + f * 2 + 1] = std::cos(freq * v);
            freq *= 2.0;
        }
    }
    return pe;
}

}  // namespace hoi
