#include "hoi/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "hoi/rng.hpp"

namespace hoi {

namespace fs = std::filesystem;
using json = nlohmann::json;

WorldConfig WorldConfig::from_config(const Config& c, uint64_t seed) {
    WorldConfig w;
    w.seed = seed;
    w.width = static_cast<int>(c.get_int("world.width", w.width));
    w.height = static_cast<int>(c.get_int("world.height", w.height));
    w.n_videos = static_cast<int>(c.get_int("world.n_videos", w.n_videos));
    w.videos_per_participant =
        static_cast<int>(c.get_int("world.videos_per_participant", w.videos_per_participant));
    w.n_object_classes = static_cast<int>(c.get_int("world.n_object_classes", w.n_object_classes));
    w.states_per_object =
        static_cast<int>(c.get_int("world.states_per_object", w.states_per_object));
    w.grasp_classes = static_cast<int>(c.get_int("world.grasp_classes", w.grasp_classes));
    w.objects_per_scene =
        static_cast<int>(c.get_int("world.objects_per_scene", w.objects_per_scene));
    w.interactions_per_video =
        static_cast<int>(c.get_int("world.interactions_per_video", w.interactions_per_video));
    w.fps = c.get_double("world.fps", w.fps);
    w.approach_frames = static_cast<int>(c.get_int("world.approach_frames", w.approach_frames));
    w.dwell_frames = static_cast<int>(c.get_int("world.dwell_frames", w.dwell_frames));
    w.retreat_frames = static_cast<int>(c.get_int("world.retreat_frames", w.retreat_frames));
    w.idle_frames = static_cast<int>(c.get_int("world.idle_frames", w.idle_frames));
    w.camera_jitter = c.get_double("world.camera_jitter", w.camera_jitter);
    w.box_jitter_sigma = c.get_double("world.box_jitter_sigma", w.box_jitter_sigma);
    w.miss_rate = c.get_double("world.miss_rate", w.miss_rate);
    w.false_positive_rate = c.get_double("world.false_positive_rate", w.false_positive_rate);
    w.validate();
    return w;
}

void WorldConfig::validate() const {
    if (width < 64 || height < 48) throw std::invalid_argument("world: image too small");
    if (n_videos < 1 || objects_per_scene < 1 || interactions_per_video < 1)
        throw std::invalid_argument("world: counts must be positive");
    if (n_object_classes < 1 || states_per_object < 2 || states_per_object > 4)
        throw std::invalid_argument("world: states_per_object must be in [2,4]");
    if (grasp_classes < 2) throw std::invalid_argument("world: grasp_classes must be >= 2");
    if (fps <= 0) throw std::invalid_argument("world: fps must be positive");
    if (dwell_frames < 2) throw std::invalid_argument("world: dwell_frames must be >= 2");
    if (miss_rate < 0 || miss_rate >= 1 || false_positive_rate < 0 || false_positive_rate >= 1)
        throw std::invalid_argument("world: rates must be in [0,1)");
}

namespace {

struct Rgb {
    float r, g, b;
};

const Rgb kPalette[6] = {{0.85f, 0.25f, 0.25f}, {0.25f, 0.75f, 0.30f}, {0.25f, 0.45f, 0.90f},
                         {0.90f, 0.75f, 0.20f}, {0.75f, 0.30f, 0.85f}, {0.20f, 0.80f, 0.80f}};

Rgb class_color(int cls) {
    Rgb c = kPalette[cls % 6];
    const float dim = cls >= 6 ? 0.65f : 1.f;
    return {c.r * dim, c.g * dim, c.b * dim};
}

void fill_rect(Image& img, double x1, double y1, double x2, double y2, Rgb c) {
    const int ax = std::max(0, static_cast<int>(std::floor(x1)));
    const int ay = std::max(0, static_cast<int>(std::floor(y1)));
    const int bx = std::min(img.w, static_cast<int>(std::ceil(x2)));
    const int by = std::min(img.h, static_cast<int>(std::ceil(y2)));
    for (int y = ay; y < by; ++y)
        for (int x = ax; x < bx; ++x) {
            img.at(0, y, x) = c.r;
            img.at(1, y, x) = c.g;
            img.at(2, y, x) = c.b;
        }
}

void fill_circle(Image& img, double cx, double cy, double r, Rgb c) {
    const int ax = std::max(0, static_cast<int>(std::floor(cx - r)));
    const int ay = std::max(0, static_cast<int>(std::floor(cy - r)));
    const int bx = std::min(img.w, static_cast<int>(std::ceil(cx + r)));
    const int by = std::min(img.h, static_cast<int>(std::ceil(cy + r)));
    for (int y = ay; y < by; ++y)
        for (int x = ax; x < bx; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            if (dx * dx + dy * dy <= r * r) {
                img.at(0, y, x) = c.r;
                img.at(1, y, x) = c.g;
                img.at(2, y, x) = c.b;
            }
        }
}

void fill_diamond(Image& img, double cx, double cy, double r, Rgb c) {
    const int ax = std::max(0, static_cast<int>(std::floor(cx - r)));
    const int ay = std::max(0, static_cast<int>(std::floor(cy - r)));
    const int bx = std::min(img.w, static_cast<int>(std::ceil(cx + r)));
    const int by = std::min(img.h, static_cast<int>(std::ceil(cy + r)));
    for (int y = ay; y < by; ++y)
        for (int x = ax; x < bx; ++x)
            if (std::abs(x + 0.5 - cx) + std::abs(y + 0.5 - cy) <= r) {
                img.at(0, y, x) = c.r;
                img.at(1, y, x) = c.g;
                img.at(2, y, x) = c.b;
            }
}

// Object states are rendered as the lid's attachment edge (top/bottom, and
// left/right for 3- and 4-state worlds). The two renderings of one object use
// the same pixels in a different arrangement, so pooled statistics carry no
// state signal; telling states apart requires looking at the lid-body layout.
struct SceneObject {
    int id = 0;
    int cls = 0;
    int state = 0;
    double x = 0, y = 0, size = 0;  // canvas coords, body top-left and side

    double cx() const { return x + size / 2; }
    double cy() const { return y + size / 2; }

    BBox body_box() const { return {x, y, x + size, y + size}; }
    BBox lid_box(int st) const {
        const double t = 0.22 * size;  // lid thickness
        const double half = 0.40 * size;
        switch (st % 4) {
            case 0: return {cx() - half, y - t, cx() + half, y};                    // top
            case 1: return {cx() - half, y + size, cx() + half, y + size + t};      // bottom
            case 2: return {x - t, cy() - half, x, cy() + half};                    // left
            default: return {x + size, cy() - half, x + size + t, cy() + half};     // right
        }
    }
    BBox full_box(int st) const {
        BBox b = body_box(), l = lid_box(st);
        return {std::min(b.x1, l.x1), std::min(b.y1, l.y1), std::max(b.x2, l.x2),
                std::max(b.y2, l.y2)};
    }
    // grip site: bottom center of the body
    double grip_x() const { return cx(); }
    double grip_y() const { return y + size + 1.0; }
};

void draw_object(Image& canvas, const SceneObject& o) {
    const Rgb c = class_color(o.cls);
    const Rgb lid{c.r * 0.55f, c.g * 0.55f, c.b * 0.55f};
    const double r = o.size / 2;
    switch (o.cls % 3) {
        case 0: fill_rect(canvas, o.x, o.y, o.x + o.size, o.y + o.size, c); break;
        case 1: fill_circle(canvas, o.cx(), o.cy(), r, c); break;
        case 2: fill_diamond(canvas, o.cx(), o.cy(), r, c); break;
    }
    const BBox l = o.lid_box(o.state);
    fill_rect(canvas, l.x1, l.y1, l.x2, l.y2, lid);
}

// The grasp pose is visible: finger spread follows the grasp type and the
// manipulation direction (toward which state the object is being driven), so
// hand appearance genuinely reveals what is being done to the object.
void draw_hand(Image& canvas, double hx, double hy, int grasp, int target_state) {
    const Rgb skin{0.93f, 0.72f, 0.55f};
    const Rgb nail{0.98f, 0.85f, 0.72f};
    fill_circle(canvas, hx, hy, 7.0, skin);
    const double spread = 2.6 + 0.35 * (grasp % 5) + 2.2 * (target_state % 2);
    const double len = 6.0 + 1.1 * (grasp % 3);
    const double tilt = (target_state % 2) ? 1.8 : -1.8;
    for (int f = -1; f <= 1; ++f)
        fill_rect(canvas, hx + f * spread - 1.2 + (f == 0 ? 0 : tilt * 0.4),
                  hy - 5.0 - len, hx + f * spread + 1.2 + (f == 0 ? 0 : tilt * 0.4),
                  hy - 4.0, nail);
    fill_circle(canvas, hx + tilt, hy - 4.0 - len, 1.8, nail);
}

BBox hand_box_at(double hx, double hy) { return {hx - 8.0, hy - 12.0, hx + 8.0, hy + 8.0}; }

struct Phase {
    enum Kind { lead_in, approach, dwell, retreat, idle } kind = lead_in;
    int target = -1;
    int frames = 0;
};

}  // namespace

World generate_world(const WorldConfig& cfg) {
    cfg.validate();
    World world;
    world.cfg = cfg;

    // fixed class -> grasp affordance table
    world.affordance.assign(cfg.n_object_classes,
                            std::vector<uint8_t>(cfg.grasp_classes, 0));
    for (int c = 0; c < cfg.n_object_classes; ++c) {
        const int g1 = c % cfg.grasp_classes;
        int g2 = (c + 1 + c % std::max(1, cfg.grasp_classes - 2)) % cfg.grasp_classes;
        if (g2 == g1) g2 = (g1 + 1) % cfg.grasp_classes;
        world.affordance[c][g1] = 1;
        world.affordance[c][g2] = 1;
    }

    const int margin = static_cast<int>(std::ceil(cfg.camera_jitter)) + 2;
    const int cw = cfg.width + 2 * margin, ch = cfg.height + 2 * margin;

    for (int vi = 0; vi < cfg.n_videos; ++vi) {
        Rng rng(cfg.seed, static_cast<uint64_t>(2 * vi + 1));  // per-video stream
        Rng det_rng = rng.fork(97);

        WorldVideo video;
        {
            std::ostringstream ss;
            ss << "v" << (vi < 10 ? "0" : "") << (vi < 100 ? "0" : "") << vi;
            video.video_id = ss.str();
        }
        video.participant = vi / std::max(1, cfg.videos_per_participant);

        // ---- static scene layout ----
        Rgb base{0.32f + 0.1f * static_cast<float>(rng.uniform()),
                 0.30f + 0.1f * static_cast<float>(rng.uniform()),
                 0.28f + 0.1f * static_cast<float>(rng.uniform())};
        struct Clutter {
            double x1, y1, x2, y2;
            Rgb c;
        };
        std::vector<Clutter> clutter;
        for (int i = 0; i < 40; ++i) {
            const double w = rng.uniform(4, 18), h = rng.uniform(3, 12);
            const double x = rng.uniform(0, cw - w), y = rng.uniform(0, ch - h);
            const float v = 0.2f + 0.25f * static_cast<float>(rng.uniform());
            clutter.push_back({x, y, x + w, y + h,
                               Rgb{v * 1.1f, v, v * 0.9f}});
        }
        std::vector<Clutter> decoys;  // lid-look-alike bars, placed after layout

        std::vector<SceneObject> objects;
        for (int oi = 0; oi < cfg.objects_per_scene; ++oi) {
            SceneObject o;
            o.id = oi;
            o.cls = (vi + oi) % cfg.n_object_classes;  // rotate classes across videos
            o.state = rng.uniform_int(0, cfg.states_per_object - 1);
            o.size = rng.uniform(26, 38);
            for (int attempt = 0; attempt < 200; ++attempt) {
                o.x = rng.uniform(margin + 14.0, cw - margin - o.size - 14.0);
                o.y = rng.uniform(margin + 14.0, ch - margin - o.size - 22.0);
                bool clear = true;
                for (const auto& prev : objects) {
                    const double dx = prev.cx() - (o.x + o.size / 2);
                    const double dy = (prev.y + prev.size / 2) - (o.y + o.size / 2);
                    if (std::sqrt(dx * dx + dy * dy) < 0.5 * (prev.size + o.size) + 16)
                        clear = false;
                }
                if (clear) break;
            }
            objects.push_back(o);
        }

        // Decoy bars share the lid shade and sizes and float near objects, so
        // a bar's position alone says nothing about state; only its attachment
        // to a body does. Kept clear of every possible lid site.
        for (const auto& o : objects) {
            for (int k = 0; k < 3; ++k) {
                for (int attempt = 0; attempt < 80; ++attempt) {
                    // bias decoys toward the vertical lid bands
                    double ang;
                    if (rng.bernoulli(0.6)) {
                        const double base = rng.bernoulli(0.5) ? M_PI / 2 : -M_PI / 2;
                        ang = base + rng.uniform(-0.5, 0.5);
                    } else {
                        ang = rng.uniform(0, 2 * M_PI);
                    }
                    const double rad = rng.uniform(0.75, 1.5) * o.size;
                    const double bw = 0.80 * o.size, bh = 0.22 * o.size;
                    const double cx = o.cx() + rad * std::cos(ang);
                    const double cy = o.cy() + rad * std::sin(ang);
                    BBox bar{cx - bw / 2, cy - bh / 2, cx + bw / 2, cy + bh / 2};
                    if (bar.x1 < 2 || bar.y1 < 2 || bar.x2 > cw - 2 || bar.y2 > ch - 2)
                        continue;
                    // keep clear of bodies and every possible lid site (3px gap)
                    bool clear = true;
                    for (const auto& other : objects) {
                        std::vector<BBox> keeps{other.body_box()};
                        for (int st = 0; st < cfg.states_per_object; ++st)
                            keeps.push_back(other.lid_box(st));
                        for (BBox keep : keeps) {
                            keep = {keep.x1 - 3, keep.y1 - 3, keep.x2 + 3, keep.y2 + 3};
                            if (std::min(bar.x2, keep.x2) > std::max(bar.x1, keep.x1) &&
                                std::min(bar.y2, keep.y2) > std::max(bar.y1, keep.y1))
                                clear = false;
                        }
                    }
                    if (!clear) continue;
                    const Rgb c = class_color(
                        static_cast<int>(rng.uniform_int(static_cast<uint32_t>(
                            std::max(1, cfg.n_object_classes)))));
                    decoys.push_back({bar.x1, bar.y1, bar.x2, bar.y2,
                                      Rgb{c.r * 0.55f, c.g * 0.55f, c.b * 0.55f}});
                    break;
                }
            }
        }

        // ---- interaction script ----
        std::vector<Phase> phases;
        phases.push_back({Phase::lead_in, -1, 3});
        for (int k = 0; k < cfg.interactions_per_video; ++k) {
            const int target = k % cfg.objects_per_scene;
            phases.push_back({Phase::approach, target, cfg.approach_frames});
            phases.push_back({Phase::dwell, target, cfg.dwell_frames});
            phases.push_back({Phase::retreat, target, cfg.retreat_frames});
            phases.push_back({Phase::idle, target, cfg.idle_frames});
        }

        // per-interaction grasp choice: canonical with p=0.7, otherwise secondary
        std::vector<int> interaction_grasp;
        for (int k = 0; k < cfg.interactions_per_video; ++k) {
            const int cls = objects[k % cfg.objects_per_scene].cls;
            std::vector<int> afforded;
            for (int g = 0; g < cfg.grasp_classes; ++g)
                if (world.affordance[cls][g]) afforded.push_back(g);
            const int pick = rng.bernoulli(0.7) ? 0 : static_cast<int>(afforded.size()) - 1;
            interaction_grasp.push_back(afforded[pick]);
        }

        // ---- eval scene (hand-free, neutral camera, initial states) ----
        auto render_scene = [&](const std::vector<SceneObject>& objs) {
            Image canvas(3, ch, cw);
            for (int y = 0; y < ch; ++y)
                for (int x = 0; x < cw; ++x) {
                    canvas.at(0, y, x) = base.r;
                    canvas.at(1, y, x) = base.g;
                    canvas.at(2, y, x) = base.b;
                }
            fill_rect(canvas, 0, ch * 0.82, cw, ch, {base.r * 0.6f, base.g * 0.55f, base.b * 0.5f});
            for (const auto& cl : clutter) fill_rect(canvas, cl.x1, cl.y1, cl.x2, cl.y2, cl.c);
            for (const auto& d : decoys) fill_rect(canvas, d.x1, d.y1, d.x2, d.y2, d.c);
            for (const auto& o : objs) draw_object(canvas, o);
            return canvas;
        };

        auto viewport = [&](const Image& canvas, int ox, int oy) {
            Image out(3, cfg.height, cfg.width);
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < cfg.height; ++y)
                    for (int x = 0; x < cfg.width; ++x)
                        out.at(c, y, x) = canvas.at(c, y + oy, x + ox);
            return out;
        };

        std::vector<SceneObject> initial_objects = objects;
        Image eval_canvas = render_scene(initial_objects);
        video.eval_image = viewport(eval_canvas, margin, margin);
        video.roi_mask = Image(1, cfg.height, cfg.width, 0.f);
        video.object_map = Image(1, cfg.height, cfg.width, 0.f);
        for (const auto& o : initial_objects) {
            WorldObjectGt og;
            og.id = o.id;
            og.object_class = o.cls;
            og.box = translated(o.full_box(o.state), -margin, -margin);
            og.grasp_labels = world.affordance[o.cls];
            video.objects.push_back(og);
            // object mask: body footprint in eval coords
            const BBox b = translated(o.body_box(), -margin, -margin);
            for (int y = std::max(0, static_cast<int>(b.y1));
                 y < std::min(cfg.height, static_cast<int>(b.y2)); ++y)
                for (int x = std::max(0, static_cast<int>(b.x1));
                     x < std::min(cfg.width, static_cast<int>(b.x2)); ++x)
                    video.object_map.at(0, y, x) = static_cast<float>(o.id + 1) / 255.f;
        }

        // ---- roll the video ----
        double cam_x = 0.0, cam_y = 0.0;
        double hand_x = cw + 30.0, hand_y = ch + 30.0;  // offscreen
        double hand_from_x = hand_x, hand_from_y = hand_y;
        int64_t frame_idx = 0;
        int interaction_no = -1;
        int hand_grasp = 0, hand_pose_state = 0;

        for (const auto& phase : phases) {
            if (phase.kind == Phase::approach) {
                ++interaction_no;
                hand_from_x = hand_x;
                hand_from_y = hand_y;
                InteractionGt ig;
                ig.object_id = phase.target;
                ig.start = frame_idx;
                ig.dwell_start = frame_idx + phase.frames;
                ig.dwell_end = ig.dwell_start + cfg.dwell_frames - 1;
                ig.end = ig.dwell_end + cfg.retreat_frames;
                video.interactions.push_back(ig);
            }
            for (int f = 0; f < phase.frames; ++f, ++frame_idx) {
                const double t = frame_idx / cfg.fps;
                SceneObject* target =
                    phase.target >= 0 ? &objects[phase.target] : nullptr;

                // hand kinematics
                bool contact = false;
                switch (phase.kind) {
                    case Phase::lead_in: break;
                    case Phase::approach: {
                        const double u = (f + 1.0) / phase.frames;
                        const double e = u * u * (3 - 2 * u);  // smoothstep
                        hand_x = hand_from_x + (target->grip_x() - hand_from_x) * e;
                        hand_y = hand_from_y + (target->grip_y() - hand_from_y) * e;
                        break;
                    }
                    case Phase::dwell: {
                        hand_x = target->grip_x() + 0.8 * std::sin(0.9 * f);
                        hand_y = target->grip_y() + 0.5 * std::cos(1.1 * f);
                        contact = true;
                        if (f == phase.frames / 2)  // manipulation flips the latent state
                            target->state = (target->state + 1) % cfg.states_per_object;
                        break;
                    }
                    case Phase::retreat: {
                        const double u = (f + 1.0) / phase.frames;
                        const double rx = std::min(target->grip_x() + 26.0, cw - 10.0);
                        const double ry = std::min(target->grip_y() + 14.0, ch - 10.0);
                        hand_x = target->grip_x() + (rx - target->grip_x()) * u;
                        hand_y = target->grip_y() + (ry - target->grip_y()) * u;
                        break;
                    }
                    case Phase::idle: break;
                }

                // camera random walk
                if (cfg.camera_jitter > 0) {
                    cam_x = std::clamp(cam_x + rng.normal(0.0, 0.6), -cfg.camera_jitter,
                                       cfg.camera_jitter);
                    cam_y = std::clamp(cam_y + rng.normal(0.0, 0.6), -cfg.camera_jitter,
                                       cfg.camera_jitter);
                }
                const int ox = margin + static_cast<int>(std::lround(cam_x));
                const int oy = margin + static_cast<int>(std::lround(cam_y));

                Image canvas = render_scene(objects);
                const bool hand_visible = phase.kind != Phase::lead_in;
                if (interaction_no >= 0) hand_grasp = interaction_grasp[interaction_no];
                if (target) hand_pose_state = target->state;  // pose tracks the live state
                if (hand_visible) draw_hand(canvas, hand_x, hand_y, hand_grasp, hand_pose_state);
                Image frame = viewport(canvas, ox, oy);
                const float glow = 0.92f + 0.16f * static_cast<float>(rng.uniform());
                for (auto& v : frame.data) v = std::clamp(v * glow, 0.f, 1.f);

                // ---- ground truth ----
                WorldFrameGt gt;
                gt.frame_idx = frame_idx;
                gt.t = t;
                gt.target_object =
                    (phase.kind == Phase::approach || phase.kind == Phase::dwell ||
                     phase.kind == Phase::retreat)
                        ? phase.target
                        : -1;
                gt.contact = contact;
                for (const auto& o : objects) {
                    FrameObjectGt og;
                    og.id = o.id;
                    og.object_class = o.cls;
                    og.state = o.state;
                    og.box = translated(o.full_box(o.state), -ox, -oy);
                    og.body = translated(o.body_box(), -ox, -oy);
                    gt.objects.push_back(og);
                }
                if (hand_visible) gt.hand_box = translated(hand_box_at(hand_x, hand_y), -ox, -oy);

                // contact pixels accumulate into the scene ROI mask (eval coords)
                if (contact) {
                    const double gx = target->grip_x() - margin;
                    const double gy = target->grip_y() - margin;
                    const double r = 9.0;
                    for (int y = std::max(0, static_cast<int>(gy - r));
                         y <= std::min(cfg.height - 1, static_cast<int>(gy + r)); ++y)
                        for (int x = std::max(0, static_cast<int>(gx - r));
                             x <= std::min(cfg.width - 1, static_cast<int>(gx + r)); ++x) {
                            const double dx = x + 0.5 - gx, dy = y + 0.5 - gy;
                            if (dx * dx + dy * dy <= r * r) video.roi_mask.at(0, y, x) = 1.f;
                        }
                }

                // ---- detector emission ----
                FrameDetections fd;
                fd.video_id = video.video_id;
                fd.frame_idx = frame_idx;
                fd.timestamp_s = t;
                fd.width = cfg.width;
                fd.height = cfg.height;

                auto jitter = [&](const BBox& b) {
                    if (cfg.box_jitter_sigma <= 0) return b;
                    return BBox{b.x1 + det_rng.normal(0, cfg.box_jitter_sigma),
                                b.y1 + det_rng.normal(0, cfg.box_jitter_sigma),
                                b.x2 + det_rng.normal(0, cfg.box_jitter_sigma),
                                b.y2 + det_rng.normal(0, cfg.box_jitter_sigma)};
                };

                int obj_det_index = -1;
                if (gt.target_object >= 0) {
                    const bool miss = cfg.miss_rate > 0 && det_rng.bernoulli(cfg.miss_rate);
                    const double score = 0.82 + 0.16 * det_rng.uniform();
                    if (!miss) {
                        BBox b = jitter(
                            translated(objects[gt.target_object].full_box(
                                           objects[gt.target_object].state),
                                       -ox, -oy));
                        auto cb = clamp_box(b, cfg.width, cfg.height);
                        if (cb) {
                            Detection d;
                            d.kind = DetKind::object;
                            d.box = *cb;
                            d.score = score;
                            obj_det_index = static_cast<int>(fd.detections.size());
                            fd.detections.push_back(d);
                        }
                    }
                }
                if (hand_visible && gt.hand_box) {
                    const bool miss = cfg.miss_rate > 0 && det_rng.bernoulli(cfg.miss_rate);
                    const double score = 0.85 + 0.13 * det_rng.uniform();
                    std::vector<double> grasp(cfg.grasp_classes);
                    for (int g = 0; g < cfg.grasp_classes; ++g)
                        grasp[g] = 0.05 + 0.25 * det_rng.uniform();
                    if (interaction_no >= 0 && gt.target_object >= 0) {
                        const int cls = objects[gt.target_object].cls;
                        for (int g = 0; g < cfg.grasp_classes; ++g)
                            if (world.affordance[cls][g]) grasp[g] = 0.55 + 0.10 * det_rng.uniform();
                        grasp[interaction_grasp[interaction_no]] =
                            0.88 + 0.08 * det_rng.uniform();
                    }
                    if (!miss) {
                        BBox b = jitter(*gt.hand_box);
                        auto cb = clamp_box(b, cfg.width, cfg.height);
                        if (cb) {
                            Detection d;
                            d.kind = DetKind::hand;
                            d.box = *cb;
                            d.score = score;
                            d.contact = contact;
                            d.side = HandSide::right;
                            d.grasp_scores = grasp;
                            if (obj_det_index >= 0) d.object_link = obj_det_index;
                            fd.detections.push_back(d);
                        }
                    }
                }
                if (cfg.false_positive_rate > 0 && det_rng.bernoulli(cfg.false_positive_rate)) {
                    const double s = det_rng.uniform(14, 40);
                    const double x = det_rng.uniform(0, cfg.width - s);
                    const double y = det_rng.uniform(0, cfg.height - s);
                    Detection d;
                    d.kind = DetKind::object;
                    d.box = {x, y, x + s, y + s};
                    d.score = 0.05 + 0.45 * det_rng.uniform();
                    fd.detections.push_back(d);
                }

                video.frames.push_back(std::move(frame));
                video.gt.push_back(std::move(gt));
                video.detections.push_back(std::move(fd));
            }
        }
        world.videos.push_back(std::move(video));
    }
    return world;
}

namespace {

std::string frame_name(int64_t idx) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "f%06lld.ppm", static_cast<long long>(idx));
    return buf;
}

json box_to_json(const BBox& b) { return json{b.x1, b.y1, b.x2, b.y2}; }

BBox box_from_json(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
            j.at(3).get<double>()};
}

}  // namespace

void write_world(const World& world, const std::string& dir) {
    fs::create_directories(dir);
    fs::create_directories(dir + "/videos");
    fs::create_directories(dir + "/gt");
    fs::create_directories(dir + "/scenes");

    std::ofstream dets(dir + "/detections.jsonl", std::ios::binary | std::ios::trunc);
    if (!dets) throw std::runtime_error("world: cannot write detections.jsonl");

    for (const auto& video : world.videos) {
        const std::string vdir = dir + "/videos/" + video.video_id;
        fs::create_directories(vdir);
        for (size_t i = 0; i < video.frames.size(); ++i)
            write_ppm(vdir + "/" + frame_name(static_cast<int64_t>(i)), video.frames[i]);
        for (const auto& fd : video.detections) dets << detection_frame_to_json(fd) << "\n";

        json g;
        g["video_id"] = video.video_id;
        g["participant"] = video.participant;
        json frames = json::array();
        for (const auto& f : video.gt) {
            json jf;
            jf["frame_idx"] = f.frame_idx;
            jf["t"] = f.t;
            jf["contact"] = f.contact;
            jf["target"] = f.target_object;
            json objs = json::array();
            for (const auto& o : f.objects)
                objs.push_back({{"id", o.id},
                                {"class", o.object_class},
                                {"state", o.state},
                                {"box", box_to_json(o.box)},
                                {"body", box_to_json(o.body)}});
            jf["objects"] = std::move(objs);
            if (f.hand_box) jf["hand_box"] = box_to_json(*f.hand_box);
            frames.push_back(std::move(jf));
        }
        g["frames"] = std::move(frames);
        json inters = json::array();
        for (const auto& ig : video.interactions)
            inters.push_back({{"object_id", ig.object_id},
                              {"start", ig.start},
                              {"dwell_start", ig.dwell_start},
                              {"dwell_end", ig.dwell_end},
                              {"end", ig.end}});
        g["interactions"] = std::move(inters);
        std::ofstream gf(dir + "/gt/" + video.video_id + ".json",
                         std::ios::binary | std::ios::trunc);
        gf << g.dump(2) << "\n";

        const std::string sdir = dir + "/scenes/" + video.video_id;
        fs::create_directories(sdir);
        write_ppm(sdir + "/eval.ppm", video.eval_image);
        write_pgm(sdir + "/roi_mask.pgm", video.roi_mask);
        write_pgm(sdir + "/object_map.pgm", video.object_map);
        json objs = json::array();
        for (const auto& o : video.objects)
            objs.push_back({{"id", o.id},
                            {"class", o.object_class},
                            {"box", box_to_json(o.box)},
                            {"grasps", o.grasp_labels}});
        std::ofstream of(sdir + "/objects.json", std::ios::binary | std::ios::trunc);
        of << objs.dump(2) << "\n";
    }

    json w;
    w["seed"] = world.cfg.seed;
    w["width"] = world.cfg.width;
    w["height"] = world.cfg.height;
    w["n_videos"] = world.cfg.n_videos;
    w["n_object_classes"] = world.cfg.n_object_classes;
    w["states_per_object"] = world.cfg.states_per_object;
    w["grasp_classes"] = world.cfg.grasp_classes;
    w["fps"] = world.cfg.fps;
    json vids = json::array();
    for (const auto& v : world.videos)
        vids.push_back({{"video_id", v.video_id}, {"participant", v.participant}});
    w["videos"] = std::move(vids);
    json aff = json::array();
    for (const auto& row : world.affordance) aff.push_back(row);
    w["affordance"] = std::move(aff);
    std::ofstream wf(dir + "/world.json", std::ios::binary | std::ios::trunc);
    wf << w.dump(2) << "\n";
}

WorldGtIndex read_world_index(const std::string& dir) {
    std::ifstream f(dir + "/world.json");
    if (!f) throw std::runtime_error("world: cannot open " + dir + "/world.json");
    json w;
    f >> w;
    WorldGtIndex idx;
    idx.cfg.seed = w.at("seed").get<uint64_t>();
    idx.cfg.width = w.at("width").get<int>();
    idx.cfg.height = w.at("height").get<int>();
    idx.cfg.n_videos = w.at("n_videos").get<int>();
    idx.cfg.n_object_classes = w.at("n_object_classes").get<int>();
    idx.cfg.states_per_object = w.at("states_per_object").get<int>();
    idx.cfg.grasp_classes = w.at("grasp_classes").get<int>();
    idx.cfg.fps = w.at("fps").get<double>();
    for (const auto& v : w.at("videos")) {
        idx.video_ids.push_back(v.at("video_id").get<std::string>());
        idx.participants.push_back(v.at("participant").get<int>());
    }
    for (const auto& row : w.at("affordance"))
        idx.affordance.push_back(row.get<std::vector<uint8_t>>());
    return idx;
}

VideoGt read_video_gt(const std::string& dir, const std::string& video_id) {
    std::ifstream f(dir + "/gt/" + video_id + ".json");
    if (!f) throw std::runtime_error("world: cannot open gt for " + video_id);
    json g;
    f >> g;
    VideoGt out;
    out.video_id = g.at("video_id").get<std::string>();
    out.participant = g.at("participant").get<int>();
    for (const auto& jf : g.at("frames")) {
        WorldFrameGt fg;
        fg.frame_idx = jf.at("frame_idx").get<int64_t>();
        fg.t = jf.at("t").get<double>();
        fg.contact = jf.at("contact").get<bool>();
        fg.target_object = jf.at("target").get<int>();
        for (const auto& jo : jf.at("objects")) {
            FrameObjectGt og;
            og.id = jo.at("id").get<int>();
            og.object_class = jo.at("class").get<int>();
            og.state = jo.at("state").get<int>();
            og.box = box_from_json(jo.at("box"));
            og.body = jo.contains("body") ? box_from_json(jo["body"]) : og.box;
            fg.objects.push_back(og);
        }
        if (jf.contains("hand_box")) fg.hand_box = box_from_json(jf["hand_box"]);
        out.frames.push_back(std::move(fg));
    }
    for (const auto& ji : g.at("interactions")) {
        InteractionGt ig;
        ig.object_id = ji.at("object_id").get<int>();
        ig.start = ji.at("start").get<int64_t>();
        ig.dwell_start = ji.at("dwell_start").get<int64_t>();
        ig.dwell_end = ji.at("dwell_end").get<int64_t>();
        ig.end = ji.at("end").get<int64_t>();
        out.interactions.push_back(ig);
    }
    return out;
}

SceneGt read_scene_gt(const std::string& dir, const std::string& video_id) {
    const std::string sdir = dir + "/scenes/" + video_id;
    SceneGt out;
    out.eval_image = read_ppm(sdir + "/eval.ppm");
    out.roi_mask = read_pgm(sdir + "/roi_mask.pgm");
    out.object_map = read_pgm(sdir + "/object_map.pgm");
    std::ifstream f(sdir + "/objects.json");
    if (!f) throw std::runtime_error("world: cannot open objects.json for " + video_id);
    json objs;
    f >> objs;
    for (const auto& jo : objs) {
        WorldObjectGt og;
        og.id = jo.at("id").get<int>();
        og.object_class = jo.at("class").get<int>();
        og.box = box_from_json(jo.at("box"));
        og.grasp_labels = jo.at("grasps").get<std::vector<uint8_t>>();
        out.objects.push_back(og);
    }
    return out;
}

}  // namespace hoi
