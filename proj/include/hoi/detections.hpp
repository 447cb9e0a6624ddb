#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hoi/bbox.hpp"

namespace hoi {

enum class DetKind { hand, object };
enum class HandSide { left, right };

struct Detection {
    BBox box;
    DetKind kind = DetKind::object;
    double score = 0.0;
    std::optional<bool> contact;                       // hands only
    std::optional<HandSide> side;                      // hands only
    std::optional<std::vector<double>> grasp_scores;   // hands only, length G
    std::optional<int> object_link;                    // hands only: index of paired object det
};

struct FrameDetections {
    std::string video_id;
    int64_t frame_idx = 0;
    double timestamp_s = 0.0;
    int width = 0;
    int height = 0;
    std::vector<Detection> detections;
};

struct ParsedDetections {
    // Frames grouped per video (groups ordered by first appearance in the stream),
    // each group sorted by frame_idx.
    std::vector<std::vector<FrameDetections>> videos;
    size_t warnings = 0;  // dropped optional fields / dropped out-of-image detections

    size_t total_detections() const;
    const std::vector<FrameDetections>* find_video(const std::string& video_id) const;
};

// One JSON object per line:
// {"video_id": str, "frame_idx": int, "t": float, "w": int, "h": int,
//  "dets": [{"kind": "hand"|"object", "box": [x1,y1,x2,y2], "score": float,
//            "contact": bool?, "side": "left"|"right"?, "grasp": [float...]?,
//            "obj_link": int?}]}
// Boxes fully outside the image are dropped (warning); partially outside are clamped.
// Throws on malformed JSON (with line number) and on non-monotone frame_idx per video.
ParsedDetections parse_detections_jsonl(std::istream& in);
ParsedDetections parse_detections_file(const std::string& path);

void serialize_detections_jsonl(const ParsedDetections& parsed, std::ostream& out);
std::string detection_frame_to_json(const FrameDetections& fd);

}  // namespace hoi
