#include "hoi/detections.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace hoi {

using json = nlohmann::json;

size_t ParsedDetections::total_detections() const {
    size_t n = 0;
    for (const auto& v : videos)
        for (const auto& f : v) n += f.detections.size();
    return n;
}

const std::vector<FrameDetections>* ParsedDetections::find_video(const std::string& video_id) const {
    for (const auto& v : videos)
        if (!v.empty() && v.front().video_id == video_id) return &v;
    return nullptr;
}

namespace {

std::runtime_error line_error(size_t lineno, const std::string& what) {
    return std::runtime_error("detections line " + std::to_string(lineno) + ": " + what);
}

// Optional-field validation: bad optional fields are dropped and counted, they do
// not invalidate the line. Required-field problems throw.
Detection parse_detection(const json& jd, size_t lineno, double img_w, double img_h,
                          std::optional<size_t>& grasp_len, size_t& warnings,
                          bool& keep) {
    Detection d;
    keep = true;

    const std::string kind = jd.at("kind").get<std::string>();
    if (kind == "hand")
        d.kind = DetKind::hand;
    else if (kind == "object")
        d.kind = DetKind::object;
    else
        throw line_error(lineno, "unknown kind '" + kind + "'");

    const auto& jb = jd.at("box");
    if (!jb.is_array() || jb.size() != 4) throw line_error(lineno, "box must be [x1,y1,x2,y2]");
    BBox raw{jb[0].get<double>(), jb[1].get<double>(), jb[2].get<double>(), jb[3].get<double>()};
    if (!raw.valid()) {
        ++warnings;
        keep = false;
        return d;
    }
    auto clamped = clamp_box(raw, img_w, img_h);
    if (!clamped) {  // fully outside the image
        ++warnings;
        keep = false;
        return d;
    }
    d.box = *clamped;

    d.score = jd.at("score").get<double>();
    if (!(d.score >= 0.0 && d.score <= 1.0)) throw line_error(lineno, "score outside [0,1]");

    if (jd.contains("contact")) {
        if (d.kind == DetKind::hand && jd["contact"].is_boolean())
            d.contact = jd["contact"].get<bool>();
        else
            ++warnings;
    }
    if (jd.contains("side")) {
        const bool ok = d.kind == DetKind::hand && jd["side"].is_string();
        const std::string s = ok ? jd["side"].get<std::string>() : "";
        if (s == "left")
            d.side = HandSide::left;
        else if (s == "right")
            d.side = HandSide::right;
        else
            ++warnings;
    }
    if (jd.contains("grasp")) {
        bool ok = d.kind == DetKind::hand && jd["grasp"].is_array() && !jd["grasp"].empty();
        std::vector<double> g;
        if (ok) {
            for (const auto& v : jd["grasp"]) {
                if (!v.is_number()) {
                    ok = false;
                    break;
                }
                g.push_back(v.get<double>());
            }
        }
        // All hands in one stream must agree on taxonomy size G.
        if (ok && grasp_len && g.size() != *grasp_len) ok = false;
        if (ok) {
            if (!grasp_len) grasp_len = g.size();
            d.grasp_scores = std::move(g);
        } else {
            ++warnings;
        }
    }
    if (jd.contains("obj_link")) {
        if (d.kind == DetKind::hand && jd["obj_link"].is_number_integer() &&
            jd["obj_link"].get<int64_t>() >= 0)
            d.object_link = static_cast<int>(jd["obj_link"].get<int64_t>());
        else
            ++warnings;
    }
    return d;
}

}  // namespace

ParsedDetections parse_detections_jsonl(std::istream& in) {
    ParsedDetections out;
    std::map<std::string, size_t> video_slot;
    std::map<std::string, int64_t> last_frame;
    std::optional<size_t> grasp_len;

    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw line_error(lineno, std::string("malformed JSON: ") + e.what());
        }
        FrameDetections fd;
        try {
            fd.video_id = j.at("video_id").get<std::string>();
            fd.frame_idx = j.at("frame_idx").get<int64_t>();
            fd.timestamp_s = j.at("t").get<double>();
            fd.width = j.at("w").get<int>();
            fd.height = j.at("h").get<int>();
            if (fd.frame_idx < 0) throw line_error(lineno, "frame_idx must be >= 0");
            if (fd.width <= 0 || fd.height <= 0) throw line_error(lineno, "bad image size");
            for (const auto& jd : j.at("dets")) {
                bool keep = true;
                Detection d = parse_detection(jd, lineno, fd.width, fd.height, grasp_len,
                                              out.warnings, keep);
                if (keep) fd.detections.push_back(std::move(d));
            }
        } catch (const json::exception& e) {
            throw line_error(lineno, std::string("schema: ") + e.what());
        }

        auto it = last_frame.find(fd.video_id);
        if (it != last_frame.end() && fd.frame_idx <= it->second)
            throw line_error(lineno, "non-monotone frame_idx for video '" + fd.video_id + "'");
        last_frame[fd.video_id] = fd.frame_idx;

        auto slot = video_slot.find(fd.video_id);
        if (slot == video_slot.end()) {
            video_slot.emplace(fd.video_id, out.videos.size());
            out.videos.emplace_back();
            out.videos.back().push_back(std::move(fd));
        } else {
            out.videos[slot->second].push_back(std::move(fd));
        }
    }
    return out;
}

ParsedDetections parse_detections_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("detections: cannot open " + path);
    return parse_detections_jsonl(f);
}

std::string detection_frame_to_json(const FrameDetections& fd) {
    json j;
    j["video_id"] = fd.video_id;
    j["frame_idx"] = fd.frame_idx;
    j["t"] = fd.timestamp_s;
    j["w"] = fd.width;
    j["h"] = fd.height;
    json dets = json::array();
    for (const auto& d : fd.detections) {
        json jd;
        jd["kind"] = d.kind == DetKind::hand ? "hand" : "object";
        jd["box"] = {d.box.x1, d.box.y1, d.box.x2, d.box.y2};
        jd["score"] = d.score;
        if (d.contact) jd["contact"] = *d.contact;
        if (d.side) jd["side"] = *d.side == HandSide::left ? "left" : "right";
        if (d.grasp_scores) jd["grasp"] = *d.grasp_scores;
        if (d.object_link) jd["obj_link"] = *d.object_link;
        dets.push_back(std::move(jd));
    }
    j["dets"] = std::move(dets);
    return j.dump();
}

void serialize_detections_jsonl(const ParsedDetections& parsed, std::ostream& out) {
    for (const auto& video : parsed.videos)
        for (const auto& fd : video) out << detection_frame_to_json(fd) << "\n";
}

}  // namespace hoi
