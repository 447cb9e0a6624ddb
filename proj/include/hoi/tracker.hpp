#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hoi/bbox.hpp"
#include "hoi/detections.hpp"

namespace hoi {

enum class TrackKind { object, hand };

struct TrackEntry {
    int64_t frame_idx = 0;
    double timestamp_s = 0.0;
    BBox box;
    double score = 0.0;
};

// Reference into the final hand-track list of the same video.
struct HandLink {
    int hand_track = -1;
    int hand_entry = -1;
};

struct Track {
    std::string track_id;
    std::string video_id;
    TrackKind kind = TrackKind::object;
    std::vector<TrackEntry> entries;
    // Object tracks: one optional link per entry. Hand tracks: empty.
    std::vector<std::optional<HandLink>> hand_links;

    double duration() const {
        return entries.empty() ? 0.0 : entries.back().timestamp_s - entries.front().timestamp_s;
    }
    int linked_entry_count() const {
        int n = 0;
        for (const auto& l : hand_links) n += l.has_value() ? 1 : 0;
        return n;
    }
};

struct TrackerParams {
    double iou_match_min = 0.4;       // pairs with IoU <= this are inadmissible
    double det_score_min = 0.2;       // strictly-above filter on detection scores
    int miss_buffer_frames = 8;       // close after this many consecutive misses
    double subsample_fps = 10.0;
    double max_track_seconds = 25.6;  // longer tracks are split
    int median_window = 5;            // odd; box-size median filter
    int min_hand_frames = 4;          // OHC eligibility: >= this many linked entries
    double hand_attach_window_s = 0.3;
    int random_tracks_per_video = 8;  // random_patch mode

    void validate() const;
};

enum class TrackMode { hand_context, no_tracking, external_tracker_stub, random_patch, center_patch };

TrackMode track_mode_from_string(const std::string& s);  // throws on unknown mode
std::string to_string(TrackMode m);

struct LinkResult {
    std::vector<std::pair<int, int>> matches;  // (open-track index, detection index)
    std::vector<int> unmatched_tracks;
    std::vector<int> unmatched_detections;
    double total_iou = 0.0;
};

// Optimal IoU assignment between current track boxes and new detections;
// pairs with IoU <= params.iou_match_min are inadmissible.
LinkResult link_frame(const std::vector<BBox>& track_boxes,
                      const std::vector<BBox>& detections, const TrackerParams& params);

struct TrackBuildResult {
    std::vector<Track> object_tracks;
    std::vector<Track> hand_tracks;
};

// Build tracks for one video (frames sorted by frame_idx, one video_id).
// external_tracks supplies boxes for external_tracker_stub mode.
TrackBuildResult build_tracks(const std::vector<FrameDetections>& frames,
                              const TrackerParams& params, TrackMode mode, uint64_t seed,
                              const std::vector<Track>* external_tracks = nullptr);

TrackBuildResult build_tracks_all(const ParsedDetections& parsed, const TrackerParams& params,
                                  TrackMode mode, uint64_t seed,
                                  const std::vector<Track>* external_tracks = nullptr);

// Running median over entry widths/heights (window odd, edge-replicated);
// centers are preserved exactly.
Track median_filter_boxes(const Track& track, int window);

std::string track_to_json(const Track& t);
Track track_from_json(const std::string& line);
void write_tracks_jsonl(const std::string& path, const TrackBuildResult& tracks);
TrackBuildResult read_tracks_jsonl(const std::string& path);

}  // namespace hoi
