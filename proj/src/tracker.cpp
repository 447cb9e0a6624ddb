#include "hoi/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "hoi/assignment.hpp"
#include "hoi/rng.hpp"

namespace hoi {

using json = nlohmann::json;

void TrackerParams::validate() const {
    if (iou_match_min < 0 || iou_match_min >= 1) throw std::invalid_argument("tracker: iou_match_min out of range");
    if (det_score_min < 0 || det_score_min >= 1) throw std::invalid_argument("tracker: det_score_min out of range");
    if (miss_buffer_frames < 0) throw std::invalid_argument("tracker: miss_buffer_frames < 0");
    if (subsample_fps <= 0) throw std::invalid_argument("tracker: subsample_fps <= 0");
    if (max_track_seconds <= 0) throw std::invalid_argument("tracker: max_track_seconds <= 0");
    if (median_window < 1 || median_window % 2 == 0) throw std::invalid_argument("tracker: median_window must be odd");
    if (min_hand_frames < 1) throw std::invalid_argument("tracker: min_hand_frames < 1");
    if (hand_attach_window_s < 0) throw std::invalid_argument("tracker: hand_attach_window_s < 0");
}

TrackMode track_mode_from_string(const std::string& s) {
    if (s == "hand_context") return TrackMode::hand_context;
    if (s == "no_tracking") return TrackMode::no_tracking;
    if (s == "external_tracker_stub") return TrackMode::external_tracker_stub;
    if (s == "random_patch") return TrackMode::random_patch;
    if (s == "center_patch") return TrackMode::center_patch;
    throw std::invalid_argument("unknown track mode: " + s);
}

std::string to_string(TrackMode m) {
    switch (m) {
        case TrackMode::hand_context: return "hand_context";
        case TrackMode::no_tracking: return "no_tracking";
        case TrackMode::external_tracker_stub: return "external_tracker_stub";
        case TrackMode::random_patch: return "random_patch";
        case TrackMode::center_patch: return "center_patch";
    }
    throw std::invalid_argument("unknown track mode enum");
}

LinkResult link_frame(const std::vector<BBox>& track_boxes, const std::vector<BBox>& detections,
                      const TrackerParams& params) {
    if (track_boxes.empty() || detections.empty()) {
        // an empty score matrix cannot carry the other side's size
        LinkResult out;
        for (size_t r = 0; r < track_boxes.size(); ++r)
            out.unmatched_tracks.push_back(static_cast<int>(r));
        for (size_t c = 0; c < detections.size(); ++c)
            out.unmatched_detections.push_back(static_cast<int>(c));
        return out;
    }
    std::vector<std::vector<double>> score(track_boxes.size(),
                                           std::vector<double>(detections.size(), 0.0));
    for (size_t r = 0; r < track_boxes.size(); ++r)
        for (size_t c = 0; c < detections.size(); ++c)
            score[r][c] = iou(track_boxes[r], detections[c]);
    Assignment a = max_score_assignment(score, params.iou_match_min);
    LinkResult out;
    out.matches = std::move(a.pairs);
    out.unmatched_tracks = std::move(a.unmatched_rows);
    out.unmatched_detections = std::move(a.unmatched_cols);
    out.total_iou = a.total;
    return out;
}

namespace {

// Source detection position, kept alongside each entry until links are attached.
struct SourceRef {
    int64_t frame_idx = -1;
    int det_idx = -1;  // index into FrameDetections.detections
};

struct RawTrack {
    std::vector<TrackEntry> entries;
    std::vector<SourceRef> src;
    int misses = 0;
    int birth = 0;
};

struct DetRef {
    int det_idx;
    const Detection* det;
};

std::vector<DetRef> frame_dets(const FrameDetections& fd, DetKind kind, double score_min) {
    std::vector<DetRef> out;
    for (size_t i = 0; i < fd.detections.size(); ++i) {
        const Detection& d = fd.detections[i];
        if (d.kind == kind && d.score > score_min) out.push_back({static_cast<int>(i), &d});
    }
    return out;
}

std::vector<RawTrack> track_by_iou(const std::vector<FrameDetections>& frames, DetKind kind,
                                   const TrackerParams& params) {
    std::vector<RawTrack> open, closed;
    int births = 0;
    for (const auto& fd : frames) {
        auto dets = frame_dets(fd, kind, params.det_score_min);
        std::vector<BBox> track_boxes, det_boxes;
        track_boxes.reserve(open.size());
        for (const auto& t : open) track_boxes.push_back(t.entries.back().box);
        det_boxes.reserve(dets.size());
        for (const auto& d : dets) det_boxes.push_back(d.det->box);

        LinkResult link = link_frame(track_boxes, det_boxes, params);
        for (auto [ti, di] : link.matches) {
            open[ti].entries.push_back(
                {fd.frame_idx, fd.timestamp_s, dets[di].det->box, dets[di].det->score});
            open[ti].src.push_back({fd.frame_idx, dets[di].det_idx});
            open[ti].misses = 0;
        }
        for (int ti : link.unmatched_tracks) ++open[ti].misses;
        for (int di : link.unmatched_detections) {
            RawTrack t;
            t.entries.push_back(
                {fd.frame_idx, fd.timestamp_s, dets[di].det->box, dets[di].det->score});
            t.src.push_back({fd.frame_idx, dets[di].det_idx});
            t.birth = births++;
            open.push_back(std::move(t));
        }
        // close over-buffer tracks, preserving birth order among survivors
        std::vector<RawTrack> still_open;
        still_open.reserve(open.size());
        for (auto& t : open) {
            if (t.misses > params.miss_buffer_frames)
                closed.push_back(std::move(t));
            else
                still_open.push_back(std::move(t));
        }
        open = std::move(still_open);
    }
    for (auto& t : open) closed.push_back(std::move(t));
    std::sort(closed.begin(), closed.end(),
              [](const RawTrack& a, const RawTrack& b) { return a.birth < b.birth; });
    return closed;
}

// Keep the entry nearest each 1/fps tick from track start; earliest entry wins ties.
template <typename T>
void subsample_indices(const std::vector<TrackEntry>& entries, double fps,
                       std::vector<T>* aligned, std::vector<TrackEntry>* out_entries) {
    if (entries.empty()) return;
    const double t0 = entries.front().timestamp_s;
    const double t_last = entries.back().timestamp_s;
    const int64_t n_ticks =
        static_cast<int64_t>(std::floor((t_last - t0) * fps + 1e-9)) + 1;
    std::vector<size_t> keep;
    keep.reserve(entries.size());
    for (int64_t k = 0; k < n_ticks; ++k) {
        const double tick = t0 + k / fps;
        size_t best = 0;
        double best_d = std::abs(entries[0].timestamp_s - tick);
        for (size_t i = 1; i < entries.size(); ++i) {
            double d = std::abs(entries[i].timestamp_s - tick);
            if (d < best_d) {  // strict: earliest wins ties
                best_d = d;
                best = i;
            }
        }
        if (keep.empty() || keep.back() != best) keep.push_back(best);
    }
    std::vector<TrackEntry> se;
    std::vector<T> sa;
    se.reserve(keep.size());
    sa.reserve(keep.size());
    for (size_t i : keep) {
        se.push_back(entries[i]);
        if (aligned) sa.push_back((*aligned)[i]);
    }
    *out_entries = std::move(se);
    if (aligned) *aligned = std::move(sa);
}

// Split segments so each spans < max_seconds from its first entry.
std::vector<std::pair<size_t, size_t>> cap_segments(const std::vector<TrackEntry>& entries,
                                                    double max_seconds) {
    std::vector<std::pair<size_t, size_t>> segs;
    size_t s = 0;
    while (s < entries.size()) {
        size_t e = s;
        while (e < entries.size() && entries[e].timestamp_s - entries[s].timestamp_s < max_seconds)
            ++e;
        segs.emplace_back(s, e);
        s = e;
    }
    return segs;
}

std::string make_track_id(const std::string& video_id, TrackKind kind, int birth, int seg) {
    std::ostringstream ss;
    ss << video_id << "#" << (kind == TrackKind::object ? "o" : "h") << birth << "." << seg;
    return ss.str();
}

struct HandIndexEntry {
    int track = -1;
    int entry = -1;
};

}  // namespace

TrackBuildResult build_tracks(const std::vector<FrameDetections>& frames,
                              const TrackerParams& params, TrackMode mode, uint64_t seed,
                              const std::vector<Track>* external_tracks) {
    params.validate();
    for (size_t i = 1; i < frames.size(); ++i) {
        if (frames[i].video_id != frames[0].video_id)
            throw std::invalid_argument("build_tracks: frames must come from one video");
        if (frames[i].frame_idx <= frames[i - 1].frame_idx)
            throw std::invalid_argument("build_tracks: frames must be sorted by frame_idx");
    }
    TrackBuildResult out;
    if (frames.empty()) return out;
    const std::string video_id = frames[0].video_id;
    const double img_w = frames[0].width;
    const double img_h = frames[0].height;

    // ---- hand tracks (always built with the IoU linker) ----
    std::vector<RawTrack> raw_hands = track_by_iou(frames, DetKind::hand, params);
    // map (frame, det idx) -> final (hand track, entry) while finalizing
    std::map<std::pair<int64_t, int>, HandIndexEntry> hand_pos;
    for (auto& rt : raw_hands) {
        subsample_indices(rt.entries, params.subsample_fps, &rt.src, &rt.entries);
        auto segs = cap_segments(rt.entries, params.max_track_seconds);
        for (size_t si = 0; si < segs.size(); ++si) {
            Track t;
            t.video_id = video_id;
            t.kind = TrackKind::hand;
            t.track_id = make_track_id(video_id, TrackKind::hand, rt.birth, static_cast<int>(si));
            const int ti = static_cast<int>(out.hand_tracks.size());
            for (size_t i = segs[si].first; i < segs[si].second; ++i) {
                t.entries.push_back(rt.entries[i]);
                hand_pos[{rt.src[i].frame_idx, rt.src[i].det_idx}] = {
                    ti, static_cast<int>(t.entries.size()) - 1};
            }
            out.hand_tracks.push_back(std::move(t));
        }
    }

    // ---- object tracks per mode ----
    std::vector<RawTrack> raw_objects;
    switch (mode) {
        case TrackMode::hand_context:
            raw_objects = track_by_iou(frames, DetKind::object, params);
            break;
        case TrackMode::no_tracking: {
            // Start at each unclaimed object detection and copy the box forward verbatim.
            int births = 0;
            std::vector<RawTrack> active;
            for (const auto& fd : frames) {
                for (auto& t : active) {
                    if (fd.timestamp_s - t.entries.front().timestamp_s < params.max_track_seconds) {
                        TrackEntry e = t.entries.back();
                        e.frame_idx = fd.frame_idx;
                        e.timestamp_s = fd.timestamp_s;
                        t.entries.push_back(e);
                        t.src.push_back({fd.frame_idx, -1});
                    }
                }
                for (const auto& d : frame_dets(fd, DetKind::object, params.det_score_min)) {
                    bool covered = false;
                    for (const auto& t : active)
                        if (iou(t.entries.back().box, d.det->box) > 0.5) covered = true;
                    if (covered) continue;
                    RawTrack t;
                    t.entries.push_back({fd.frame_idx, fd.timestamp_s, d.det->box, d.det->score});
                    t.src.push_back({fd.frame_idx, d.det_idx});
                    t.birth = births++;
                    active.push_back(std::move(t));
                }
            }
            raw_objects = std::move(active);
            std::sort(raw_objects.begin(), raw_objects.end(),
                      [](const RawTrack& a, const RawTrack& b) { return a.birth < b.birth; });
            break;
        }
        case TrackMode::random_patch:
        case TrackMode::center_patch: {
            Rng rng(seed ^ hash_str64(video_id), 17);
            std::vector<BBox> patches;
            if (mode == TrackMode::center_patch) {
                const double side = img_h;  // square crop of the frame height, centered
                patches.push_back({img_w / 2 - side / 2, 0, img_w / 2 + side / 2, img_h});
            } else {
                for (int i = 0; i < params.random_tracks_per_video; ++i) {
                    double side = rng.uniform(0.25, 0.6) * std::min(img_w, img_h);
                    double x = rng.uniform(0.0, img_w - side);
                    double y = rng.uniform(0.0, img_h - side);
                    patches.push_back({x, y, x + side, y + side});
                }
            }
            int births = 0;
            for (const auto& box : patches) {
                RawTrack t;
                t.birth = births++;
                for (const auto& fd : frames) {
                    t.entries.push_back({fd.frame_idx, fd.timestamp_s, box, 1.0});
                    t.src.push_back({fd.frame_idx, -1});
                }
                raw_objects.push_back(std::move(t));
            }
            break;
        }
        case TrackMode::external_tracker_stub: {
            if (!external_tracks)
                throw std::invalid_argument(
                    "external_tracker_stub mode requires externally produced tracks");
            int births = 0;
            for (const auto& ext : *external_tracks) {
                if (ext.video_id != video_id) continue;
                RawTrack t;
                t.birth = births++;
                for (const auto& e : ext.entries) {
                    auto clamped = clamp_box(e.box, img_w, img_h);
                    if (!clamped) continue;
                    TrackEntry ce = e;
                    ce.box = *clamped;
                    t.entries.push_back(ce);
                    t.src.push_back({e.frame_idx, -1});
                }
                std::sort(t.entries.begin(), t.entries.end(),
                          [](const TrackEntry& a, const TrackEntry& b) {
                              return a.frame_idx < b.frame_idx;
                          });
                if (!t.entries.empty()) raw_objects.push_back(std::move(t));
            }
            break;
        }
    }

    // Flatten hand entries once for the time-window fallback search.
    struct FlatHand {
        double t;
        int track;
        int entry;
    };
    std::vector<FlatHand> flat_hands;
    for (size_t hti = 0; hti < out.hand_tracks.size(); ++hti)
        for (size_t he = 0; he < out.hand_tracks[hti].entries.size(); ++he)
            flat_hands.push_back({out.hand_tracks[hti].entries[he].timestamp_s,
                                  static_cast<int>(hti), static_cast<int>(he)});

    // frame_idx -> frame pointer for obj_link resolution
    std::map<int64_t, const FrameDetections*> frame_by_idx;
    for (const auto& fd : frames) frame_by_idx[fd.frame_idx] = &fd;

    for (auto& rt : raw_objects) {
        Track filtered;  // median filter operates on a Track; wrap and unwrap
        filtered.kind = TrackKind::object;
        filtered.entries = rt.entries;
        filtered = median_filter_boxes(filtered, params.median_window);
        rt.entries = std::move(filtered.entries);

        subsample_indices(rt.entries, params.subsample_fps, &rt.src, &rt.entries);
        auto segs = cap_segments(rt.entries, params.max_track_seconds);
        for (size_t si = 0; si < segs.size(); ++si) {
            Track t;
            t.video_id = video_id;
            t.kind = TrackKind::object;
            t.track_id = make_track_id(video_id, TrackKind::object, rt.birth, static_cast<int>(si));
            for (size_t i = segs[si].first; i < segs[si].second; ++i) {
                const TrackEntry& e = rt.entries[i];
                const SourceRef& src = rt.src[i];
                t.entries.push_back(e);

                // Attach hand: detector obj_link first, then nearest-in-time fallback.
                std::optional<HandLink> link;
                if (src.det_idx >= 0) {
                    auto fit = frame_by_idx.find(src.frame_idx);
                    if (fit != frame_by_idx.end()) {
                        double best_center_d = 0.0;
                        for (size_t di = 0; di < fit->second->detections.size(); ++di) {
                            const Detection& hd = fit->second->detections[di];
                            if (hd.kind != DetKind::hand || !hd.object_link ||
                                *hd.object_link != src.det_idx)
                                continue;
                            auto pit = hand_pos.find({src.frame_idx, static_cast<int>(di)});
                            if (pit == hand_pos.end()) continue;
                            const double dcx = hd.box.center_x() - e.box.center_x();
                            const double dcy = hd.box.center_y() - e.box.center_y();
                            const double cd = dcx * dcx + dcy * dcy;
                            // both-hands-on-one-object: keep the hand nearest the object center
                            if (!link || cd < best_center_d) {
                                link = HandLink{pit->second.track, pit->second.entry};
                                best_center_d = cd;
                            }
                        }
                    }
                }
                if (!link) {
                    double best_dt = params.hand_attach_window_s;
                    double best_cd = 0.0;
                    for (const auto& fh : flat_hands) {
                        const double dt = std::abs(fh.t - e.timestamp_s);
                        if (dt > params.hand_attach_window_s) continue;
                        const auto& hb = out.hand_tracks[fh.track].entries[fh.entry].box;
                        const double dcx = hb.center_x() - e.box.center_x();
                        const double dcy = hb.center_y() - e.box.center_y();
                        const double cd = dcx * dcx + dcy * dcy;
                        if (!link || dt < best_dt || (dt == best_dt && cd < best_cd)) {
                            link = HandLink{fh.track, fh.entry};
                            best_dt = dt;
                            best_cd = cd;
                        }
                    }
                }
                t.hand_links.push_back(link);
            }
            out.object_tracks.push_back(std::move(t));
        }
    }
    return out;
}

TrackBuildResult build_tracks_all(const ParsedDetections& parsed, const TrackerParams& params,
                                  TrackMode mode, uint64_t seed,
                                  const std::vector<Track>* external_tracks) {
    TrackBuildResult all;
    for (const auto& video : parsed.videos) {
        TrackBuildResult r = build_tracks(video, params, mode, seed, external_tracks);
        const int hand_base = static_cast<int>(all.hand_tracks.size());
        for (auto& t : r.hand_tracks) all.hand_tracks.push_back(std::move(t));
        for (auto& t : r.object_tracks) {
            for (auto& l : t.hand_links)
                if (l) l->hand_track += hand_base;
            all.object_tracks.push_back(std::move(t));
        }
    }
    return all;
}

Track median_filter_boxes(const Track& track, int window) {
    if (window < 1) throw std::invalid_argument("median_filter_boxes: window must be >= 1");
    const int n = static_cast<int>(track.entries.size());
    if (n == 0) return track;
    int w = std::min(window, n);
    if (w % 2 == 0) --w;  // clamp to the largest odd window that fits
    const int r = w / 2;

    Track out = track;
    std::vector<double> buf;
    for (int i = 0; i < n; ++i) {
        double med_w, med_h;
        for (int dim = 0; dim < 2; ++dim) {
            buf.clear();
            for (int j = i - r; j <= i + r; ++j) {
                const auto& b = track.entries[std::clamp(j, 0, n - 1)].box;
                buf.push_back(dim == 0 ? b.width() : b.height());
            }
            std::sort(buf.begin(), buf.end());
            (dim == 0 ? med_w : med_h) = buf[buf.size() / 2];
        }
        const double cx = track.entries[i].box.center_x();
        const double cy = track.entries[i].box.center_y();
        out.entries[i].box = {cx - med_w / 2, cy - med_h / 2, cx + med_w / 2, cy + med_h / 2};
    }
    return out;
}

std::string track_to_json(const Track& t) {
    json j;
    j["track_id"] = t.track_id;
    j["video_id"] = t.video_id;
    j["kind"] = t.kind == TrackKind::object ? "object" : "hand";
    json entries = json::array();
    for (const auto& e : t.entries)
        entries.push_back({e.frame_idx, e.timestamp_s, e.box.x1, e.box.y1, e.box.x2, e.box.y2,
                           e.score});
    j["entries"] = std::move(entries);
    if (t.kind == TrackKind::object) {
        json links = json::array();
        for (const auto& l : t.hand_links) {
            if (l)
                links.push_back({l->hand_track, l->hand_entry});
            else
                links.push_back(nullptr);
        }
        j["hand_links"] = std::move(links);
    }
    return j.dump();
}

Track track_from_json(const std::string& line) {
    json j = json::parse(line);
    Track t;
    t.track_id = j.at("track_id").get<std::string>();
    t.video_id = j.at("video_id").get<std::string>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "object")
        t.kind = TrackKind::object;
    else if (kind == "hand")
        t.kind = TrackKind::hand;
    else
        throw std::runtime_error("track: unknown kind " + kind);
    for (const auto& je : j.at("entries")) {
        if (!je.is_array() || je.size() != 7) throw std::runtime_error("track: bad entry");
        TrackEntry e;
        e.frame_idx = je[0].get<int64_t>();
        e.timestamp_s = je[1].get<double>();
        e.box = {je[2].get<double>(), je[3].get<double>(), je[4].get<double>(),
                 je[5].get<double>()};
        e.score = je[6].get<double>();
        t.entries.push_back(e);
    }
    if (j.contains("hand_links")) {
        for (const auto& jl : j["hand_links"]) {
            if (jl.is_null())
                t.hand_links.emplace_back(std::nullopt);
            else
                t.hand_links.emplace_back(HandLink{jl[0].get<int>(), jl[1].get<int>()});
        }
        if (t.hand_links.size() != t.entries.size())
            throw std::runtime_error("track: hand_links length mismatch");
    }
    return t;
}

void write_tracks_jsonl(const std::string& path, const TrackBuildResult& tracks) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("tracks: cannot write " + path);
    for (const auto& t : tracks.object_tracks) f << track_to_json(t) << "\n";
    for (const auto& t : tracks.hand_tracks) f << track_to_json(t) << "\n";
}

TrackBuildResult read_tracks_jsonl(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("tracks: cannot open " + path);
    TrackBuildResult out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        Track t = track_from_json(line);
        if (t.kind == TrackKind::object)
            out.object_tracks.push_back(std::move(t));
        else
            out.hand_tracks.push_back(std::move(t));
    }
    return out;
}

}  // namespace hoi
