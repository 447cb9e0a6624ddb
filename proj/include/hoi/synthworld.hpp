#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hoi/config.hpp"
#include "hoi/detections.hpp"
#include "hoi/image.hpp"

namespace hoi {

struct WorldConfig {
    uint64_t seed = 0;
    int width = 256, height = 144;
    int n_videos = 16;
    int videos_per_participant = 4;
    int n_object_classes = 6;
    int states_per_object = 2;
    int grasp_classes = 8;
    int objects_per_scene = 4;
    int interactions_per_video = 12;
    double fps = 10.0;
    int approach_frames = 7;
    int dwell_frames = 6;    // contact=true exactly during the dwell
    int retreat_frames = 7;
    int idle_frames = 3;
    double camera_jitter = 3.0;      // egomotion analog, pixels
    double box_jitter_sigma = 2.0;   // detector noise
    double miss_rate = 0.05;
    double false_positive_rate = 0.02;

    static WorldConfig from_config(const Config& c, uint64_t seed);
    void validate() const;
};

struct FrameObjectGt {
    int id = 0;
    int object_class = 0;
    int state = 0;
    BBox box;   // full extent (body + lid), viewport coordinates
    BBox body;  // state-independent body box
};

struct WorldFrameGt {
    int64_t frame_idx = 0;
    double t = 0.0;
    std::vector<FrameObjectGt> objects;
    std::optional<BBox> hand_box;
    bool contact = false;
    int target_object = -1;  // object id under interaction, -1 otherwise
};

struct WorldObjectGt {
    int id = 0;
    int object_class = 0;
    BBox box;  // eval-image coordinates
    std::vector<uint8_t> grasp_labels;  // affordance table row
};

struct InteractionGt {
    int object_id = 0;
    int64_t start = 0, dwell_start = 0, dwell_end = 0, end = 0;  // frame indices
};

struct WorldVideo {
    std::string video_id;
    int participant = 0;
    std::vector<Image> frames;
    std::vector<WorldFrameGt> gt;
    std::vector<FrameDetections> detections;
    std::vector<InteractionGt> interactions;
    Image eval_image;  // hand-free scene at neutral camera
    Image roi_mask;    // pixels the hand ever contacts
    Image object_map;  // (object id + 1)/255 per pixel, 0 background
    std::vector<WorldObjectGt> objects;
};

struct World {
    WorldConfig cfg;
    std::vector<WorldVideo> videos;
    std::vector<std::vector<uint8_t>> affordance;  // class -> grasp labels
};

World generate_world(const WorldConfig& cfg);

// Directory layout:
//   detections.jsonl
//   videos/<vid>/f%06d.ppm
//   gt/<vid>.json
//   scenes/<vid>/{eval.ppm, roi_mask.pgm, object_map.pgm, objects.json}
//   world.json  (config echo + per-video participant ids)
void write_world(const World& world, const std::string& dir);

// Ground-truth access for evaluation / probing without loading full videos.
struct WorldGtIndex {
    WorldConfig cfg;
    std::vector<std::string> video_ids;
    std::vector<int> participants;
    std::vector<std::vector<uint8_t>> affordance;
};
WorldGtIndex read_world_index(const std::string& dir);

struct VideoGt {
    std::string video_id;
    int participant = 0;
    std::vector<WorldFrameGt> frames;
    std::vector<InteractionGt> interactions;
};
VideoGt read_video_gt(const std::string& dir, const std::string& video_id);

struct SceneGt {
    Image eval_image;
    Image roi_mask;
    Image object_map;
    std::vector<WorldObjectGt> objects;
};
SceneGt read_scene_gt(const std::string& dir, const std::string& video_id);

}  // namespace hoi
