// Pipeline front-end: synthetic world generation, track building, contrastive
// pretraining, linear probing, ACP training/inference, and evaluation.
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "hoi/acp.hpp"
#include "hoi/array_io.hpp"
#include "hoi/config.hpp"
#include "hoi/errors.hpp"
#include "hoi/eval.hpp"
#include "hoi/hashing.hpp"
#include "hoi/synthworld.hpp"
#include "hoi/tracker.hpp"
#include "hoi/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace hoi;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    uint64_t seed = 0;
    std::vector<std::string> overrides;

    Config load() const {
        Config cfg;
        if (!config_path.empty()) cfg = Config::load(config_path);
        for (const auto& ov : overrides) cfg.apply_override(ov);
        return cfg;
    }
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "flat key=value config file");
    cmd->add_option("--seed", args.seed, "random seed")->default_val(0);
    cmd->add_option("--out", args.out_dir, "output run directory")->required();
    cmd->add_option("--override", args.overrides, "key=value override (repeatable)");
}

void require_artifact(const std::string& path, const std::string& producer) {
    if (!fs::exists(path))
        throw std::runtime_error("missing artifact " + path + "; run `hoi " + producer +
                                 "` first");
}

std::string tree_hash(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().filename() != "manifest.json")
            files.push_back(fs::relative(entry.path(), dir).string());
    std::sort(files.begin(), files.end());
    uint64_t h = 1469598103934665603ULL;
    for (const auto& f : files) {
        h = fnv1a64(f.data(), f.size(), h);
        const std::string fh = hash_file(dir + "/" + f);
        h = fnv1a64(fh.data(), fh.size(), h);
    }
    return hex64(h);
}

void write_manifest(const std::string& out_dir, const std::string& subcommand,
                    const Config& cfg, uint64_t seed,
                    const std::map<std::string, std::string>& inputs) {
    cfg.save(out_dir + "/config");
    json m;
    m["subcommand"] = subcommand;
    m["seed"] = seed;
    m["config_hash"] = cfg.hash();
    m["inputs"] = inputs;
    m["outputs"] = {{"tree_hash", tree_hash(out_dir)}};
    std::ofstream f(out_dir + "/manifest.json", std::ios::binary | std::ios::trunc);
    f << m.dump(2) << "\n";
}

int default_test_participant_from(const WorldGtIndex& idx) {
    int max_p = 0;
    for (int p : idx.participants) max_p = std::max(max_p, p);
    return std::max(1, (3 * (max_p + 1)) / 4);
}

std::vector<std::string> test_video_ids(const WorldGtIndex& idx, int test_from) {
    std::vector<std::string> out;
    for (size_t i = 0; i < idx.video_ids.size(); ++i)
        if (idx.participants[i] >= test_from) out.push_back(idx.video_ids[i]);
    return out;
}

void write_report(const std::string& out_dir, const json& report) {
    std::ofstream f(out_dir + "/report.json", std::ios::binary | std::ios::trunc);
    f << report.dump(2) << "\n";
}

Image heatmap_from_array(const Array& a) {
    if (a.dims.size() != 2) throw std::runtime_error("heatmap array must be 2-d");
    Image img(1, static_cast<int>(a.dims[0]), static_cast<int>(a.dims[1]));
    img.data = a.data;
    return img;
}

Array heatmap_to_array(const Image& img) {
    Array a;
    a.dims = {static_cast<uint32_t>(img.h), static_cast<uint32_t>(img.w)};
    a.data = img.data;
    return a;
}

// ---- subcommand bodies ----

int cmd_gen_world(const CommonArgs& args) {
    Config cfg = args.load();
    WorldConfig wc = WorldConfig::from_config(cfg, args.seed);
    World world = generate_world(wc);
    fs::create_directories(args.out_dir);
    write_world(world, args.out_dir);
    write_manifest(args.out_dir, "gen-world", cfg, args.seed, {});
    size_t frames = 0;
    for (const auto& v : world.videos) frames += v.frames.size();
    std::cout << "gen-world: " << world.videos.size() << " videos, " << frames << " frames -> "
              << args.out_dir << "\n";
    return 0;
}

int cmd_build_tracks(const CommonArgs& args, const std::string& world_dir,
                     const std::string& mode_str, const std::string& external_path) {
    Config cfg = args.load();
    require_artifact(world_dir + "/detections.jsonl", "gen-world");
    ParsedDetections dets = parse_detections_file(world_dir + "/detections.jsonl");

    TrackerParams params;
    params.iou_match_min = cfg.get_double("tracker.iou_match_min", params.iou_match_min);
    params.det_score_min = cfg.get_double("tracker.det_score_min", params.det_score_min);
    params.miss_buffer_frames =
        static_cast<int>(cfg.get_int("tracker.miss_buffer_frames", params.miss_buffer_frames));
    params.subsample_fps = cfg.get_double("tracker.subsample_fps", params.subsample_fps);
    params.max_track_seconds =
        cfg.get_double("tracker.max_track_seconds", params.max_track_seconds);
    params.median_window =
        static_cast<int>(cfg.get_int("tracker.median_window", params.median_window));
    params.min_hand_frames =
        static_cast<int>(cfg.get_int("tracker.min_hand_frames", params.min_hand_frames));

    TrackMode mode = track_mode_from_string(mode_str);
    std::vector<Track> external;
    TrackBuildResult external_holder;
    const std::vector<Track>* external_ptr = nullptr;
    if (mode == TrackMode::external_tracker_stub) {
        if (external_path.empty())
            throw std::runtime_error("external_tracker_stub requires --external tracks.jsonl");
        external_holder = read_tracks_jsonl(external_path);
        external = external_holder.object_tracks;
        external_ptr = &external;
    }

    TrackBuildResult tracks = build_tracks_all(dets, params, mode, args.seed, external_ptr);
    fs::create_directories(args.out_dir);
    write_tracks_jsonl(args.out_dir + "/tracks.jsonl", tracks);
    write_manifest(args.out_dir, "build-tracks", cfg, args.seed,
                   {{"detections", hash_file(world_dir + "/detections.jsonl")}});
    std::cout << "build-tracks[" << mode_str << "]: " << tracks.object_tracks.size()
              << " object tracks, " << tracks.hand_tracks.size() << " hand tracks ("
              << dets.warnings << " parse warnings)\n";
    return 0;
}

int cmd_pretrain(const CommonArgs& args, const std::string& tracks_dir,
                 const std::string& world_dir, const std::string& mode_str) {
    Config cfg = args.load();
    require_artifact(tracks_dir + "/tracks.jsonl", "build-tracks");
    require_artifact(world_dir + "/world.json", "gen-world");
    TrackBuildResult tracks = read_tracks_jsonl(tracks_dir + "/tracks.jsonl");
    FrameStore frames(world_dir);
    PretrainConfig pc =
        PretrainConfig::from_config(cfg, pretrain_mode_from_string(mode_str), args.seed);
    fs::create_directories(args.out_dir);
    PretrainResult r = pretrain(tracks, frames, pc, args.out_dir + "/checkpoint");
    write_manifest(args.out_dir, "pretrain", cfg, args.seed,
                   {{"tracks", hash_file(tracks_dir + "/tracks.jsonl")}});
    std::cout << "pretrain[" << mode_str << "]: loss " << r.initial_loss << " -> "
              << r.final_loss << " over " << pc.steps << " steps\n";
    return 0;
}

ObjectModel load_object_model(const std::string& ckpt_base, const Config& cfg, uint64_t seed,
                              bool random_init, NormStats* norm) {
    PretrainConfig pc = PretrainConfig::from_config(cfg, PretrainMode::tsc, seed);
    ObjectModel model;
    model.build(pc.trunk, seed);
    if (random_init) {
        *norm = NormStats{};
        return model;
    }
    std::vector<nn::Param<float>*> params;
    model.collect(params);
    CheckpointMeta meta =
        load_checkpoint(ckpt_base, "object_model", pc.trunk.describe(), params);
    *norm = meta.norm;
    return model;
}

int cmd_probe(const CommonArgs& args, const std::string& ckpt_dir,
              const std::string& world_dir, bool random_init) {
    Config cfg = args.load();
    require_artifact(world_dir + "/world.json", "gen-world");
    if (!random_init) require_artifact(ckpt_dir + "/checkpoint.json", "pretrain");

    WorldGtIndex idx = read_world_index(world_dir);
    const int test_from = static_cast<int>(
        cfg.get_int("probe.test_participant_from", default_test_participant_from(idx)));
    const int stride = static_cast<int>(cfg.get_int("probe.frame_stride", 3));
    const int max_per_video = static_cast<int>(cfg.get_int("probe.max_per_video", 120));

    NormStats norm;
    ObjectModel model =
        load_object_model(ckpt_dir + "/checkpoint", cfg, args.seed, random_init, &norm);
    FrameStore frames(world_dir);
    ProbeData data = collect_probe_data(world_dir, frames, model.trunk.spec.input_size, stride,
                                        test_from, max_per_video);
    ProbeResult r = probe_checkpoint(model, norm, data);

    // chance: per-state positive prevalence on the held-out split
    double chance = 0.0;
    {
        const size_t n_states = data.labels[0].size();
        size_t n_test = 0;
        std::vector<size_t> pos(n_states, 0);
        for (size_t i = 0; i < data.labels.size(); ++i) {
            if (!data.is_test[i]) continue;
            ++n_test;
            for (size_t s = 0; s < n_states; ++s) pos[s] += data.labels[i][s];
        }
        for (size_t s = 0; s < n_states; ++s)
            chance += static_cast<double>(pos[s]) / std::max<size_t>(1, n_test);
        chance /= n_states;
    }

    fs::create_directories(args.out_dir);
    json report;
    report["task"] = "state_probe";
    report["metric"] = "mAP";
    report["value"] = r.map;
    report["chance"] = chance;
    report["per_state_ap"] = r.per_state_ap;
    report["excluded_states"] = r.excluded_states;
    report["n_crops"] = data.crops.size();
    report["random_init"] = random_init;
    report["seed"] = args.seed;
    report["config_hash"] = cfg.hash();
    write_report(args.out_dir, report);
    write_manifest(args.out_dir, "probe", cfg, args.seed,
                   {{"checkpoint", random_init ? std::string("random_init")
                                               : hash_file(ckpt_dir + "/checkpoint.weights")}});
    std::cout << "probe: state mAP " << r.map << " (chance " << chance << ", "
              << data.crops.size() << " crops)\n";
    return 0;
}

int cmd_acp_train(const CommonArgs& args, const std::string& world_dir) {
    Config cfg = args.load();
    require_artifact(world_dir + "/detections.jsonl", "gen-world");
    ParsedDetections dets = parse_detections_file(world_dir + "/detections.jsonl");

    // exclude held-out participants from training
    WorldGtIndex idx = read_world_index(world_dir);
    const int test_from = static_cast<int>(
        cfg.get_int("probe.test_participant_from", default_test_participant_from(idx)));
    ParsedDetections train_dets;
    for (size_t i = 0; i < idx.video_ids.size(); ++i) {
        if (idx.participants[i] >= test_from) continue;
        if (const auto* v = dets.find_video(idx.video_ids[i])) train_dets.videos.push_back(*v);
    }

    FrameStore frames(world_dir);
    AcpTrainConfig ac = AcpTrainConfig::from_config(cfg, args.seed);
    ac.model.grasp_classes =
        static_cast<int>(cfg.get_int("world.grasp_classes", idx.cfg.grasp_classes));
    fs::create_directories(args.out_dir);
    AcpTrainResult r = train_acp(train_dets, frames, ac, args.out_dir + "/checkpoint");
    write_manifest(args.out_dir, "acp-train", cfg, args.seed,
                   {{"detections", hash_file(world_dir + "/detections.jsonl")}});
    std::cout << "acp-train: seg loss " << r.final_seg_loss << ", grasp loss "
              << r.final_grasp_loss << "\n";
    return 0;
}

int cmd_acp_infer(const CommonArgs& args, const std::string& ckpt_dir,
                  const std::string& world_dir) {
    Config cfg = args.load();
    require_artifact(ckpt_dir + "/checkpoint.json", "acp-train");
    require_artifact(world_dir + "/world.json", "gen-world");

    WorldGtIndex idx = read_world_index(world_dir);
    AcpTrainConfig ac = AcpTrainConfig::from_config(cfg, args.seed);
    ac.model.grasp_classes =
        static_cast<int>(cfg.get_int("world.grasp_classes", idx.cfg.grasp_classes));
    AcpModel model;
    model.build(ac.model, args.seed);
    std::vector<nn::Param<float>*> params;
    model.collect(params);
    CheckpointMeta meta =
        load_checkpoint(ckpt_dir + "/checkpoint", "acp_model", ac.model.describe(), params);
    // inference must match the training-time context geometry
    if (meta.extra.count("symmetric_context"))
        ac.acp.ablations.symmetric_context = meta.extra["symmetric_context"] == "1";
    if (meta.extra.count("no_hand_hiding"))
        ac.acp.ablations.no_hand_hiding = meta.extra["no_hand_hiding"] == "1";

    const int test_from = static_cast<int>(
        cfg.get_int("probe.test_participant_from", default_test_participant_from(idx)));
    std::vector<std::string> vids = test_video_ids(idx, test_from);
    if (vids.empty()) throw std::runtime_error("acp-infer: no held-out scenes");

    fs::create_directories(args.out_dir);
    for (const auto& vid : vids) {
        SceneGt scene = read_scene_gt(world_dir, vid);
        Heatmaps maps = infer_heatmaps(scene.eval_image, model, meta.norm, ac.acp);
        const std::string sdir = args.out_dir + "/" + vid;
        fs::create_directories(sdir);
        write_array(sdir + "/roi.hpa", heatmap_to_array(maps.roi));
        write_pgm(sdir + "/roi.pgm", maps.roi);
        write_array(sdir + "/coverage.hpa", heatmap_to_array(maps.coverage));
        for (size_t g = 0; g < maps.grasps.size(); ++g) {
            write_array(sdir + "/grasp_" + std::to_string(g) + ".hpa",
                        heatmap_to_array(maps.grasps[g]));
            write_pgm(sdir + "/grasp_" + std::to_string(g) + ".pgm", maps.grasps[g]);
        }
        std::ofstream pf(sdir + "/patches.jsonl", std::ios::binary | std::ios::trunc);
        for (const auto& p :
             inference_patch_grid(scene.eval_image.w, scene.eval_image.h, ac.acp))
            pf << patch_to_json(p) << "\n";
        std::cout << "acp-infer: " << vid << " done\n";
    }
    json vids_json = vids;
    std::ofstream vf(args.out_dir + "/scenes.json", std::ios::binary | std::ios::trunc);
    vf << vids_json.dump() << "\n";
    write_manifest(args.out_dir, "acp-infer", cfg, args.seed,
                   {{"checkpoint", hash_file(ckpt_dir + "/checkpoint.weights")}});
    return 0;
}

std::vector<std::string> infer_scene_list(const std::string& infer_dir) {
    std::ifstream f(infer_dir + "/scenes.json");
    if (!f) throw std::runtime_error("missing " + infer_dir + "/scenes.json; run `hoi acp-infer` first");
    json j;
    f >> j;
    return j.get<std::vector<std::string>>();
}

json downsampled_pr(const std::vector<std::pair<double, double>>& pts, size_t max_pts = 256) {
    json out = json::array();
    const size_t stride = std::max<size_t>(1, pts.size() / max_pts);
    for (size_t i = 0; i < pts.size(); i += stride)
        out.push_back({pts[i].first, pts[i].second});
    if (!pts.empty()) out.push_back({pts.back().first, pts.back().second});
    return out;
}

int cmd_eval_roi(const CommonArgs& args, const std::string& infer_dir,
                 const std::string& world_dir) {
    Config cfg = args.load();
    require_artifact(world_dir + "/world.json", "gen-world");
    auto vids = infer_scene_list(infer_dir);

    json scenes = json::array();
    double sum0 = 0, sum1 = 0, chance_sum = 0;
    std::vector<double> all_scores;
    std::vector<uint8_t> all_labels;
    for (const auto& vid : vids) {
        SceneGt scene = read_scene_gt(world_dir, vid);
        Image roi = heatmap_from_array(read_array(infer_dir + "/" + vid + "/roi.hpa"));
        const int slack = slack_for_width(scene.roi_mask.w);
        RoiApResult r0 = roi_ap_detailed(roi, scene.roi_mask, 0);
        RoiApResult r1 = roi_ap_detailed(roi, scene.roi_mask, slack);
        size_t pos = 0;
        for (float v : scene.roi_mask.data) pos += v >= 0.5f ? 1 : 0;
        const double prevalence = static_cast<double>(pos) / scene.roi_mask.data.size();
        sum0 += r0.ap;
        sum1 += r1.ap;
        chance_sum += prevalence;
        scenes.push_back({{"video_id", vid},
                          {"ap_0", r0.ap},
                          {"ap_1pct", r1.ap},
                          {"slack_px", slack},
                          {"excluded", r1.excluded},
                          {"chance", prevalence}});
        for (size_t i = 0; i < roi.data.size(); ++i) {
            all_scores.push_back(roi.data[i]);
            all_labels.push_back(scene.roi_mask.data[i] >= 0.5f ? 1 : 0);
        }
    }
    json report;
    report["task"] = "roi";
    report["metric"] = "AP";
    report["value"] = sum0 / vids.size();
    report["value_1pct_slack"] = sum1 / vids.size();
    report["chance"] = chance_sum / vids.size();
    report["scenes"] = scenes;
    report["pr_curve"] = downsampled_pr(pr_curve(all_scores, all_labels));
    report["infer_dir"] = fs::absolute(infer_dir).string();
    report["seed"] = args.seed;
    report["config_hash"] = cfg.hash();
    fs::create_directories(args.out_dir);
    write_report(args.out_dir, report);
    write_manifest(args.out_dir, "eval-roi", cfg, args.seed, {{"infer", tree_hash(infer_dir)}});
    std::cout << "eval-roi: AP " << report["value"] << " (1% slack " << report["value_1pct_slack"]
              << ", chance " << report["chance"] << ")\n";
    return 0;
}

int cmd_eval_gao(const CommonArgs& args, const std::string& infer_dir,
                 const std::string& world_dir) {
    Config cfg = args.load();
    require_artifact(world_dir + "/world.json", "gen-world");
    WorldGtIndex idx = read_world_index(world_dir);
    auto vids = infer_scene_list(infer_dir);

    std::vector<GaoExample> examples;
    for (const auto& vid : vids) {
        SceneGt scene = read_scene_gt(world_dir, vid);
        std::vector<Image> grasp_maps;
        for (int g = 0; g < idx.cfg.grasp_classes; ++g)
            grasp_maps.push_back(
                heatmap_from_array(read_array(infer_dir + "/" + vid + "/grasp_" +
                                              std::to_string(g) + ".hpa")));
        for (const auto& obj : scene.objects) {
            Image mask(1, scene.object_map.h, scene.object_map.w, 0.f);
            const float want = static_cast<float>(obj.id + 1) / 255.f;
            bool any = false;
            for (size_t i = 0; i < mask.data.size(); ++i)
                if (std::abs(scene.object_map.data[i] - want) < 0.5f / 255.f) {
                    mask.data[i] = 1.f;
                    any = true;
                }
            if (!any) continue;
            GaoExample ex;
            ex.scores = gao_scores(grasp_maps, mask);
            ex.labels = obj.grasp_labels;
            examples.push_back(std::move(ex));
        }
    }
    GaoResult r = gao_map(examples);
    json report;
    report["task"] = "gao";
    report["metric"] = "mAP";
    report["value"] = r.map;
    report["chance"] = r.chance;
    report["grasps_present"] = r.grasps_present;
    report["per_grasp_ap"] = r.per_grasp_ap;
    report["per_grasp_chance"] = r.per_grasp_chance;
    report["n_objects"] = examples.size();
    report["seed"] = args.seed;
    report["config_hash"] = cfg.hash();
    fs::create_directories(args.out_dir);
    write_report(args.out_dir, report);
    write_manifest(args.out_dir, "eval-gao", cfg, args.seed, {{"infer", tree_hash(infer_dir)}});
    std::cout << "eval-gao: mAP " << r.map << " (chance " << r.chance << ", "
              << examples.size() << " objects)\n";
    return 0;
}

Image render_pr_plot(const json& pr, int size = 256) {
    Image plot(3, size, size, 1.f);
    auto put = [&](int y, int x, float r, float g, float b) {
        if (y < 0 || y >= size || x < 0 || x >= size) return;
        plot.at(0, y, x) = r;
        plot.at(1, y, x) = g;
        plot.at(2, y, x) = b;
    };
    for (int i = 0; i < size; ++i) {
        put(size - 1, i, 0, 0, 0);
        put(i, 0, 0, 0, 0);
    }
    double px = 0, py = 1;
    for (const auto& pt : pr) {
        const double rx = pt[0].get<double>(), ry = pt[1].get<double>();
        const int steps = 24;
        for (int s = 0; s <= steps; ++s) {
            const double u = static_cast<double>(s) / steps;
            const double x = px + (rx - px) * u, y = py + (ry - py) * u;
            put(static_cast<int>((1 - y) * (size - 1)), static_cast<int>(x * (size - 1)), 0.8f,
                0.1f, 0.1f);
        }
        px = rx;
        py = ry;
    }
    return plot;
}

int cmd_report(const CommonArgs& args, const std::string& run_dir,
               const std::string& world_dir) {
    Config cfg = args.load();
    require_artifact(run_dir + "/report.json", "eval-roi or eval-gao or probe");
    std::ifstream f(run_dir + "/report.json");
    json report;
    f >> report;
    fs::create_directories(args.out_dir);

    if (report.contains("pr_curve"))
        write_ppm(args.out_dir + "/pr_curve.ppm", render_pr_plot(report["pr_curve"]));

    // heatmap overlays for ROI reports
    if (report["task"] == "roi" && !world_dir.empty() && report.contains("infer_dir")) {
        for (const auto& s : report["scenes"]) {
            const std::string vid = s["video_id"].get<std::string>();
            SceneGt scene = read_scene_gt(world_dir, vid);
            const std::string infer_roi =
                report["infer_dir"].get<std::string>() + "/" + vid + "/roi.hpa";
            if (!fs::exists(infer_roi)) continue;
            Image roi = heatmap_from_array(read_array(infer_roi));
            Image overlay = scene.eval_image;
            const size_t plane = overlay.plane_size();
            for (size_t i = 0; i < plane; ++i) {
                const float v = roi.data[i];
                overlay.data[i] = 0.5f * overlay.data[i] + 0.5f * v;
                overlay.data[plane + i] *= 0.5f;
                overlay.data[2 * plane + i] *= 0.5f;
            }
            write_ppm(args.out_dir + "/overlay_" + vid + ".ppm", overlay);
        }
    }
    write_manifest(args.out_dir, "report", cfg, args.seed,
                   {{"report", hash_file(run_dir + "/report.json")}});
    std::cout << "report: wrote plots to " << args.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hand-object interaction pipeline"};
    app.require_subcommand(1);

    CommonArgs gen_args;
    auto* gen = app.add_subcommand("gen-world", "generate the synthetic egocentric world");
    add_common(gen, gen_args);

    CommonArgs bt_args;
    std::string bt_world, bt_mode = "hand_context", bt_external;
    auto* bt = app.add_subcommand("build-tracks", "build object/hand tracks from detections");
    add_common(bt, bt_args);
    bt->add_option("--world", bt_world, "world directory")->required();
    bt->add_option("--mode", bt_mode,
                   "hand_context|no_tracking|external_tracker_stub|random_patch|center_patch");
    bt->add_option("--external", bt_external, "external tracks JSONL (stub mode)");

    CommonArgs pt_args;
    std::string pt_tracks, pt_world, pt_mode = "tsc";
    auto* pt = app.add_subcommand("pretrain", "contrastive pretraining on tracks");
    add_common(pt, pt_args);
    pt->add_option("--tracks", pt_tracks, "tracks run directory")->required();
    pt->add_option("--world", pt_world, "world directory")->required();
    pt->add_option("--mode", pt_mode, "tsc|tsc_ohc|tcn|simclr|simclr_tcn");

    CommonArgs pr_args;
    std::string pr_ckpt, pr_world;
    bool pr_random = false;
    auto* pr = app.add_subcommand("probe", "linear probe of frozen features");
    add_common(pr, pr_args);
    pr->add_option("--ckpt", pr_ckpt, "pretrain run directory");
    pr->add_option("--world", pr_world, "world directory")->required();
    pr->add_flag("--random-init", pr_random, "probe a randomly initialized trunk");

    CommonArgs at_args;
    std::string at_world;
    auto* at = app.add_subcommand("acp-train", "train the context-prediction model");
    add_common(at, at_args);
    at->add_option("--world", at_world, "world directory")->required();

    CommonArgs ai_args;
    std::string ai_ckpt, ai_world;
    auto* ai = app.add_subcommand("acp-infer", "dense heatmap inference on held-out scenes");
    add_common(ai, ai_args);
    ai->add_option("--ckpt", ai_ckpt, "acp-train run directory")->required();
    ai->add_option("--world", ai_world, "world directory")->required();

    CommonArgs er_args;
    std::string er_infer, er_world;
    auto* er = app.add_subcommand("eval-roi", "region-of-interaction AP");
    add_common(er, er_args);
    er->add_option("--infer", er_infer, "acp-infer run directory")->required();
    er->add_option("--world", er_world, "world directory")->required();

    CommonArgs eg_args;
    std::string eg_infer, eg_world;
    auto* eg = app.add_subcommand("eval-gao", "grasps-afforded-by-objects mAP");
    add_common(eg, eg_args);
    eg->add_option("--infer", eg_infer, "acp-infer run directory")->required();
    eg->add_option("--world", eg_world, "world directory")->required();

    CommonArgs rp_args;
    std::string rp_run, rp_world;
    auto* rp = app.add_subcommand("report", "render PR curves and overlays");
    add_common(rp, rp_args);
    rp->add_option("--run", rp_run, "evaluation run directory")->required();
    rp->add_option("--world", rp_world, "world directory (for overlays)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_world(gen_args);
        if (bt->parsed()) return cmd_build_tracks(bt_args, bt_world, bt_mode, bt_external);
        if (pt->parsed()) return cmd_pretrain(pt_args, pt_tracks, pt_world, pt_mode);
        if (pr->parsed()) return cmd_probe(pr_args, pr_ckpt, pr_world, pr_random);
        if (at->parsed()) return cmd_acp_train(at_args, at_world);
        if (ai->parsed()) return cmd_acp_infer(ai_args, ai_ckpt, ai_world);
        if (er->parsed()) return cmd_eval_roi(er_args, er_infer, er_world);
        if (eg->parsed()) return cmd_eval_gao(eg_args, eg_infer, eg_world);
        if (rp->parsed()) return cmd_report(rp_args, rp_run, rp_world);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
