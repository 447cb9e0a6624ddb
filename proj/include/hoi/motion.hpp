#pragma once

#include <array>

#include "hoi/bbox.hpp"

namespace hoi {

// Hand-box position/scale relative to one object box over three adjacent frames:
// per frame [ (obj_xc - hand_xc)/obj_W, (obj_yc - hand_yc)/obj_H, hand_W/obj_W, hand_H/obj_H ].
struct HandMotionDescriptor {
    std::array<double, 12> values{};
};

// 12 elements x 12 frequencies x {sin, cos}; entry layout is element-major,
// frequency-minor, sin before cos. Frequencies are 2^f * pi, f = 0..11.
struct PositionalEncoding {
    std::array<double, 288> values{};
};

HandMotionDescriptor hand_motion(const BBox& obj_box, const std::array<BBox, 3>& hand_boxes);
PositionalEncoding positional_encode(const HandMotionDescriptor& d);

}  // namespace hoi
