#include "hoi/training.hpp"

#include "hoi/errors.hpp"
#include "hoi/hashing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hoi {

namespace {

std::string frame_path(const std::string& dir, const std::string& video_id, int64_t idx) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "f%06lld.ppm", static_cast<long long>(idx));
    return dir + "/videos/" + video_id + "/" + buf;
}

}  // namespace

const Image& FrameStore::get(const std::string& video_id, int64_t frame_idx) const {
    const std::string key = video_id + "/" + std::to_string(frame_idx);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    if (cache_.size() >= cap_ && !lru_.empty()) {
        cache_.erase(lru_.front());
        lru_.pop_front();
    }
    Image img = read_ppm(frame_path(dir_, video_id, frame_idx));
    lru_.push_back(key);
    return cache_.emplace(key, std::move(img)).first->second;
}

// ---- augmentation ----

namespace {

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
    const float mx = std::max({r, g, b}), mn = std::min({r, g, b});
    v = mx;
    const float d = mx - mn;
    s = mx > 0 ? d / mx : 0.f;
    if (d <= 0) {
        h = 0.f;
        return;
    }
    if (mx == r)
        h = (g - b) / d + (g < b ? 6.f : 0.f);
    else if (mx == g)
        h = (b - r) / d + 2.f;
    else
        h = (r - g) / d + 4.f;
    h /= 6.f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
    h = h - std::floor(h);
    const float i = std::floor(h * 6.f);
    const float f = h * 6.f - i;
    const float p = v * (1.f - s);
    const float q = v * (1.f - f * s);
    const float t = v * (1.f - (1.f - f) * s);
    switch (static_cast<int>(i) % 6) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

float luma(float r, float g, float b) { return 0.299f * r + 0.587f * g + 0.114f * b; }

}  // namespace

Image augment_crop(const Image& crop, const AugmentParams& p, bool allow_flip, Rng& rng) {
    const int size = crop.w;
    // random resized crop
    const double area = rng.uniform(p.crop_scale_lo, p.crop_scale_hi);
    const double aspect = std::exp(rng.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0)));
    double cw = size * std::sqrt(area * aspect);
    double chh = size * std::sqrt(area / aspect);
    cw = std::clamp(cw, 8.0, static_cast<double>(size));
    chh = std::clamp(chh, 8.0, static_cast<double>(size));
    const double x0 = rng.uniform(0.0, size - cw);
    const double y0 = rng.uniform(0.0, size - chh);
    Image out = crop_resize(crop, {x0, y0, x0 + cw, y0 + chh}, size, size);

    if (allow_flip && rng.bernoulli(p.flip_prob)) out = flip_horizontal(out);

    if (rng.bernoulli(p.jitter_prob)) {
        const float fb = static_cast<float>(rng.uniform(std::max(0.0, 1 - p.brightness), 1 + p.brightness));
        const float fc = static_cast<float>(rng.uniform(std::max(0.0, 1 - p.contrast), 1 + p.contrast));
        const float fs = static_cast<float>(rng.uniform(std::max(0.0, 1 - p.saturation), 1 + p.saturation));
        const float fh = static_cast<float>(rng.uniform(-p.hue, p.hue));
        const size_t plane = out.plane_size();
        double mean_l = 0;
        for (size_t i = 0; i < plane; ++i)
            mean_l += luma(out.data[i], out.data[plane + i], out.data[2 * plane + i]);
        const float ml = static_cast<float>(mean_l / plane);
        for (size_t i = 0; i < plane; ++i) {
            float r = out.data[i], g = out.data[plane + i], b = out.data[2 * plane + i];
            r *= fb; g *= fb; b *= fb;
            r = (r - ml) * fc + ml; g = (g - ml) * fc + ml; b = (b - ml) * fc + ml;
            const float gl = luma(r, g, b);
            r = (r - gl) * fs + gl; g = (g - gl) * fs + gl; b = (b - gl) * fs + gl;
            if (fh != 0.f) {
                float h, s, v;
                rgb_to_hsv(std::clamp(r, 0.f, 1.f), std::clamp(g, 0.f, 1.f),
                           std::clamp(b, 0.f, 1.f), h, s, v);
                hsv_to_rgb(h + fh, s, v, r, g, b);
            }
            out.data[i] = std::clamp(r, 0.f, 1.f);
            out.data[plane + i] = std::clamp(g, 0.f, 1.f);
            out.data[2 * plane + i] = std::clamp(b, 0.f, 1.f);
        }
    }
    if (rng.bernoulli(p.grayscale_prob)) {
        const size_t plane = out.plane_size();
        for (size_t i = 0; i < plane; ++i) {
            const float g = luma(out.data[i], out.data[plane + i], out.data[2 * plane + i]);
            out.data[i] = out.data[plane + i] = out.data[2 * plane + i] = g;
        }
    }
    const double sigma = rng.uniform(p.blur_sigma_lo, p.blur_sigma_hi);
    out = gaussian_blur(out, sigma);
    return out;
}

NormStats estimate_norm_stats(const std::vector<Image>& sample) {
    if (sample.empty()) throw std::invalid_argument("norm stats: empty sample");
    NormStats n;
    const int c = sample[0].c;
    n.mean.assign(c, 0.f);
    n.stddev.assign(c, 0.f);
    std::vector<double> sum(c, 0.0), sq(c, 0.0);
    size_t count = 0;
    for (const auto& img : sample) {
        const size_t plane = img.plane_size();
        for (int ch = 0; ch < c; ++ch)
            for (size_t i = 0; i < plane; ++i) {
                const double v = img.data[ch * plane + i];
                sum[ch] += v;
                sq[ch] += v * v;
            }
        count += plane;
    }
    for (int ch = 0; ch < c; ++ch) {
        const double m = sum[ch] / count;
        n.mean[ch] = static_cast<float>(m);
        n.stddev[ch] = static_cast<float>(std::max(0.05, std::sqrt(sq[ch] / count - m * m)));
    }
    return n;
}

// ---- crop cache over track entries ----

namespace {

class CropCache {
public:
    CropCache(const FrameStore& frames, const TrackBuildResult& tracks, int size,
              double context = 1.5)
        : frames_(frames), tracks_(tracks), size_(size), context_(context) {}

    Image get(TrackKind kind, int track, int entry) {
        const uint64_t key = (static_cast<uint64_t>(kind == TrackKind::hand) << 52) |
                             (static_cast<uint64_t>(track) << 26) |
                             static_cast<uint64_t>(entry);
        auto it = cache_.find(key);
        if (it != cache_.end()) return from_u8(it->second, 3, size_, size_);
        const Track& t = kind == TrackKind::hand ? tracks_.hand_tracks[track]
                                                 : tracks_.object_tracks[track];
        const TrackEntry& e = t.entries.at(entry);
        const Image& frame = frames_.get(t.video_id, e.frame_idx);
        BBox box = scaled_about(e.box, context_, e.box.center_x(), e.box.center_y());
        Image crop = crop_resize(frame, box, size_, size_);
        cache_.emplace(key, to_u8(crop));
        return crop;
    }

private:
    const FrameStore& frames_;
    const TrackBuildResult& tracks_;
    int size_;
    double context_;
    std::unordered_map<uint64_t, std::vector<uint8_t>> cache_;
};

Mat to_double(const TensorF& t) {
    Mat m(t.dim(0), t.dim(1));
    for (int i = 0; i < t.dim(0); ++i)
        for (int j = 0; j < t.dim(1); ++j)
            m(i, j) = t.v[static_cast<size_t>(i) * t.dim(1) + j];
    return m;
}

TensorF to_float(const Mat& m) {
    TensorF t({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            t.v[static_cast<size_t>(i) * m.cols() + j] = static_cast<float>(m(i, j));
    return t;
}

void add_into(TensorF& acc, const TensorF& other) {
    for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += other.v[i];
}

// Hand-motion descriptor for a sampled quadruple: object box at the anchor,
// hand boxes from entries k-1, k, k+1 (clamped at track boundaries).
HandMotionDescriptor quad_motion(const TrackBuildResult& tracks, const QuadrupleIndex& q) {
    const Track& ot = tracks.object_tracks[q.anchor.track];
    const Track& ht = tracks.hand_tracks[q.hand_track];
    const BBox obj_box = ot.entries[q.anchor.entry].box;
    std::array<BBox, 3> hb;
    const int n = static_cast<int>(ht.entries.size());
    for (int off = -1; off <= 1; ++off)
        hb[off + 1] = ht.entries[std::clamp(q.hand_entry + off, 0, n - 1)].box;
    return hand_motion(obj_box, hb);
}

std::vector<int> parse_widths(const std::string& s, const std::vector<int>& dflt) {
    if (s.empty()) return dflt;
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

}  // namespace

PretrainConfig PretrainConfig::from_config(const Config& c, PretrainMode mode, uint64_t seed) {
    PretrainConfig p;
    p.mode = mode;
    p.seed = seed;
    p.steps = static_cast<int>(c.get_int("pretrain.steps", p.steps));
    p.batch = static_cast<int>(c.get_int("pretrain.batch", p.batch));
    p.lr = c.get_double("pretrain.lr", p.lr);
    p.cosine_lr = c.get_bool("pretrain.cosine_lr", p.cosine_lr);
    p.weight_decay = c.get_double("pretrain.weight_decay", p.weight_decay);
    p.crop_context = c.get_double("pretrain.crop_context", p.crop_context);
    p.on_hand_tracks = c.get_bool("pretrain.on_hand_tracks", p.on_hand_tracks);
    p.loss.tau = c.get_double("loss.tau", p.loss.tau);
    p.loss.lambda_h = c.get_double("loss.lambda_h", p.loss.lambda_h);
    p.loss.tcn_margin = c.get_double("loss.tcn_margin", p.loss.tcn_margin);
    p.loss.mean_reduction = c.get_bool("loss.mean_reduction", p.loss.mean_reduction);
    p.sampling.batch = p.batch;
    p.sampling.min_track_len =
        static_cast<int>(c.get_int("sampling.min_track_len", p.sampling.min_track_len));
    p.sampling.min_hand_frames =
        static_cast<int>(c.get_int("sampling.min_hand_frames", p.sampling.min_hand_frames));
    p.sampling.hand_window_s = c.get_double("sampling.hand_window_s", p.sampling.hand_window_s);
    p.trunk.input_size = static_cast<int>(c.get_int("trunk.input_size", p.trunk.input_size));
    p.trunk.embed_dim = static_cast<int>(c.get_int("trunk.embed_dim", p.trunk.embed_dim));
    p.trunk.widths = parse_widths(c.get_str("trunk.widths", ""), p.trunk.widths);
    p.aug.crop_scale_lo = c.get_double("aug.crop_scale_lo", p.aug.crop_scale_lo);
    p.aug.crop_scale_hi = c.get_double("aug.crop_scale_hi", p.aug.crop_scale_hi);
    p.aug.flip_prob = c.get_double("aug.flip_prob", p.aug.flip_prob);
    p.aug.jitter_prob = c.get_double("aug.jitter_prob", p.aug.jitter_prob);
    p.aug.brightness = c.get_double("aug.brightness", p.aug.brightness);
    p.aug.contrast = c.get_double("aug.contrast", p.aug.contrast);
    p.aug.saturation = c.get_double("aug.saturation", p.aug.saturation);
    p.aug.hue = c.get_double("aug.hue", p.aug.hue);
    p.aug.grayscale_prob = c.get_double("aug.grayscale_prob", p.aug.grayscale_prob);
    p.aug.blur_sigma_lo = c.get_double("aug.blur_sigma_lo", p.aug.blur_sigma_lo);
    p.aug.blur_sigma_hi = c.get_double("aug.blur_sigma_hi", p.aug.blur_sigma_hi);
    return p;
}

PretrainResult pretrain(const TrackBuildResult& tracks_in, const FrameStore& frames,
                        const PretrainConfig& cfg, const std::string& out_base) {
    cfg.loss.validate();
    if (cfg.on_hand_tracks && cfg.mode == PretrainMode::tsc_ohc)
        throw std::invalid_argument("pretrain: object-hand consistency needs object tracks");
    TrackBuildResult hand_view;
    if (cfg.on_hand_tracks) {
        hand_view.object_tracks = tracks_in.hand_tracks;
        for (auto& t : hand_view.object_tracks) t.hand_links.clear();
    }
    const TrackBuildResult& tracks = cfg.on_hand_tracks ? hand_view : tracks_in;
    Rng master(cfg.seed, 7);
    Rng rng_t = master.fork(1);     // temporal batch composition + augmentation
    Rng rng_h = master.fork(2);     // hand batch (tsc_ohc only)
    Rng rng_norm = master.fork(3);

    ObjectModel model;
    model.build(cfg.trunk, cfg.seed);
    HandModel hand_model;
    const bool use_hand = cfg.mode == PretrainMode::tsc_ohc && cfg.loss.lambda_h != 0.0;
    if (cfg.mode == PretrainMode::tsc_ohc) hand_model.build(cfg.trunk, cfg.seed + 0x9e37);

    std::vector<nn::Param<float>*> params;
    model.collect(params);
    if (cfg.mode == PretrainMode::tsc_ohc) hand_model.collect(params);
    nn::Adam<float> adam;
    adam.lr = cfg.lr;
    adam.weight_decay = cfg.weight_decay;

    CropCache crops(frames, tracks, cfg.trunk.input_size, cfg.crop_context);

    // channel statistics from a sample of unaugmented anchor crops
    NormStats norm;
    {
        SampleParams sp = cfg.sampling;
        sp.batch = std::min(128, std::max(16, cfg.batch));
        auto idx = sample_batch_indices(tracks, PretrainMode::tsc, sp, rng_norm);
        std::vector<Image> sample;
        for (const auto& q : idx)
            sample.push_back(crops.get(TrackKind::object, q.anchor.track, q.anchor.entry));
        norm = estimate_norm_stats(sample);
    }

    std::ofstream metrics(out_base + "_metrics.csv", std::ios::trunc);
    metrics << "step,loss\n";

    PretrainResult result;
    const PretrainMode t_mode =
        cfg.mode == PretrainMode::tsc_ohc ? PretrainMode::tsc : cfg.mode;

    for (int step = 0; step < cfg.steps; ++step) {
        nn::zero_grads(params);
        double loss_value = 0.0;

        auto batch_idx = sample_batch_indices(tracks, t_mode, cfg.sampling, rng_t);
        std::vector<Image> a_imgs, b_imgs;
        for (const auto& q : batch_idx) {
            a_imgs.push_back(augment_crop(
                crops.get(TrackKind::object, q.anchor.track, q.anchor.entry), cfg.aug, true,
                rng_t));
            b_imgs.push_back(augment_crop(
                crops.get(TrackKind::object, q.positive.track, q.positive.entry), cfg.aug, true,
                rng_t));
        }

        if (cfg.mode == PretrainMode::tcn) {
            std::vector<Image> n_imgs;
            for (const auto& q : batch_idx)
                n_imgs.push_back(augment_crop(
                    crops.get(TrackKind::object, q.negative.track, q.negative.entry), cfg.aug,
                    true, rng_t));
            ObjectModelCache ca, cb, cn;
            TensorF za = model.f_o.forward(
                model.trunk.forward(batch_images(a_imgs, norm), &ca.trunk), &ca.f_o);
            TensorF zb = model.f_o.forward(
                model.trunk.forward(batch_images(b_imgs, norm), &cb.trunk), &cb.f_o);
            TensorF zn = model.f_o.forward(
                model.trunk.forward(batch_images(n_imgs, norm), &cn.trunk), &cn.f_o);
            Grad3 g = loss_tcn_grad(to_double(za), to_double(zb), to_double(zn),
                                    cfg.loss.tcn_margin);
            loss_value = g.value;
            model.trunk.backward(model.f_o.backward(to_float(g.d_a), ca.f_o), ca.trunk);
            model.trunk.backward(model.f_o.backward(to_float(g.d_b), cb.f_o), cb.trunk);
            model.trunk.backward(model.f_o.backward(to_float(g.d_c), cn.f_o), cn.trunk);
        } else {
            ObjectModelCache ca, cb;
            TensorF za = model.f_o.forward(
                model.trunk.forward(batch_images(a_imgs, norm), &ca.trunk), &ca.f_o);
            TensorF zb = model.f_o.forward(
                model.trunk.forward(batch_images(b_imgs, norm), &cb.trunk), &cb.f_o);
            Grad2 g = loss_temporal_grad(to_double(za), to_double(zb), cfg.loss.tau,
                                         cfg.loss.mean_reduction);
            loss_value = g.value;
            model.trunk.backward(model.f_o.backward(to_float(g.d_a), ca.f_o), ca.trunk);
            model.trunk.backward(model.f_o.backward(to_float(g.d_b), cb.f_o), cb.trunk);
        }

        if (use_hand) {
            auto hand_idx = sample_batch_indices(tracks, PretrainMode::tsc_ohc, cfg.sampling,
                                                 rng_h);
            std::vector<Image> o_imgs, h_imgs;
            std::vector<std::array<double, 288>> pes;
            for (const auto& q : hand_idx) {
                // handedness-preserving: no horizontal flips on either crop
                o_imgs.push_back(augment_crop(
                    crops.get(TrackKind::object, q.anchor.track, q.anchor.entry), cfg.aug,
                    false, rng_h));
                h_imgs.push_back(augment_crop(
                    crops.get(TrackKind::hand, q.hand_track, q.hand_entry), cfg.aug, false,
                    rng_h));
                pes.push_back(positional_encode(quad_motion(tracks, q)).values);
            }
            TrunkCache co_trunk;
            HeadCache co_fh, co_fo;
            TensorF eo = model.trunk.forward(batch_images(o_imgs, norm), &co_trunk);
            TensorF z_oh = model.f_h.forward(eo, &co_fh);
            TensorF z_oo = model.f_o.forward(eo, &co_fo);

            TensorF pe({static_cast<int>(pes.size()), HandModel::kPeDim});
            for (size_t i = 0; i < pes.size(); ++i)
                for (int j = 0; j < HandModel::kPeDim; ++j)
                    pe.v[i * HandModel::kPeDim + j] = static_cast<float>(pes[i][j]);
            HandModelCache ch;
            TensorF z_h = hand_model.forward(batch_images(h_imgs, norm), pe, &ch);

            Grad3 g = loss_hand_grad(to_double(z_oh), to_double(z_h), to_double(z_oo),
                                     cfg.loss.tau, cfg.loss.mean_reduction);
            loss_value += cfg.loss.lambda_h * g.value;
            const double lam = cfg.loss.lambda_h;
            TensorF d_eo = model.f_h.backward(to_float(Mat(lam * g.d_a)), co_fh);
            add_into(d_eo, model.f_o.backward(to_float(Mat(lam * g.d_c)), co_fo));
            model.trunk.backward(d_eo, co_trunk);
            hand_model.backward(to_float(Mat(lam * g.d_b)), ch);
        }

        if (!std::isfinite(loss_value))
            throw NumericError("pretrain: loss diverged (non-finite) at step " +
                                     std::to_string(step));
        if (step == 0) result.initial_loss = loss_value;
        result.final_loss = loss_value;
        result.loss_curve.push_back(loss_value);
        metrics << step << "," << loss_value << "\n";

        if (cfg.cosine_lr)
            adam.lr = cfg.lr * 0.5 * (1.0 + std::cos(M_PI * step / std::max(1, cfg.steps)));
        adam.step(params);
    }

    std::vector<nn::Param<float>*> obj_params;
    model.collect(obj_params);
    std::map<std::string, std::string> extra{{"mode", to_string(cfg.mode)},
                                             {"steps", std::to_string(cfg.steps)}};
    save_checkpoint(out_base, "object_model", cfg.trunk.describe(), cfg.seed, norm, obj_params,
                    extra);
    if (cfg.mode == PretrainMode::tsc_ohc) {
        std::vector<nn::Param<float>*> hand_params;
        hand_model.collect(hand_params);
        save_checkpoint(out_base + "_hand", "hand_model", cfg.trunk.describe(), cfg.seed, norm,
                        hand_params, extra);
    }
    result.checkpoint_base = out_base;
    return result;
}

// ---- ACP training ----

AcpTrainConfig AcpTrainConfig::from_config(const Config& c, uint64_t seed) {
    AcpTrainConfig a;
    a.seed = seed;
    a.steps = static_cast<int>(c.get_int("acp_train.steps", a.steps));
    a.batch = static_cast<int>(c.get_int("acp_train.batch", a.batch));
    a.lr = c.get_double("acp_train.lr", a.lr);
    a.weight_decay = c.get_double("acp_train.weight_decay", a.weight_decay);
    a.model.grasp_classes = static_cast<int>(c.get_int("world.grasp_classes", a.model.grasp_classes));
    a.acp.det_conf_min = c.get_double("acp.det_conf_min", a.acp.det_conf_min);
    a.acp.det_max_side = c.get_double("acp.det_max_side", a.acp.det_max_side);
    a.acp.det_ref_width = c.get_double("acp.det_ref_width", a.acp.det_ref_width);
    a.acp.object_min_side = c.get_double("acp.object_min_side", a.acp.object_min_side);
    a.acp.pos_weight = c.get_double("acp.pos_weight", a.acp.pos_weight);
    a.acp.grasp_loss_weight = c.get_double("acp.grasp_loss_weight", a.acp.grasp_loss_weight);
    a.acp.grasp_neg_count = static_cast<int>(c.get_int("acp.grasp_neg_count", a.acp.grasp_neg_count));
    a.acp.infer_ref_width = c.get_double("acp.infer_ref_width", a.acp.infer_ref_width);
    a.acp.infer_patches_per_side =
        static_cast<int>(c.get_int("acp.infer_patches_per_side", a.acp.infer_patches_per_side));
    a.acp.smooth_sigma = c.get_double("acp.smooth_sigma", a.acp.smooth_sigma);
    a.acp.combine_weight = c.get_double("acp.combine_weight", a.acp.combine_weight);
    {
        std::string sides = c.get_str("acp.infer_context_sides", "");
        if (!sides.empty()) {
            a.acp.infer_context_sides.clear();
            std::stringstream ss(sides);
            std::string tok;
            while (std::getline(ss, tok, ',')) a.acp.infer_context_sides.push_back(std::stod(tok));
        }
    }
    a.acp.ablations.no_hand_prediction = c.get_bool("acp.no_hand_prediction", false);
    a.acp.ablations.no_hand_hiding = c.get_bool("acp.no_hand_hiding", false);
    a.acp.ablations.symmetric_context = c.get_bool("acp.symmetric_context", false);
    a.acp.ablations.no_contact_filtering = c.get_bool("acp.no_contact_filtering", false);
    a.acp.ablations.no_object_prediction = c.get_bool("acp.no_object_prediction", false);
    return a;
}

namespace {

// Boxes pasted into segmentation targets: the filtered detections.
std::vector<BBox> target_boxes(const FrameDetections& fd, const AcpConfig& cfg) {
    const double scale = cfg.det_scale(fd.width);
    const double max_side = cfg.det_max_side * scale;
    std::vector<BBox> out;
    for (const auto& d : fd.detections) {
        if (d.score < cfg.det_conf_min) continue;
        if (d.box.width() >= max_side || d.box.height() >= max_side) continue;
        if (d.kind == DetKind::hand) {
            if (cfg.ablations.no_hand_prediction) continue;
            if (!d.contact.value_or(false) && !cfg.ablations.no_contact_filtering) continue;
            out.push_back(d.box);
        } else {
            if (cfg.ablations.no_object_prediction) continue;
            out.push_back(d.box);
        }
    }
    return out;
}

// Grasp scores of the contact hand nearest a hand_pos patch center.
const Detection* find_patch_hand(const FrameDetections& fd, const PatchSpec& p,
                                 const AcpConfig& cfg) {
    const Detection* best = nullptr;
    double best_d = 1e18;
    for (const auto& d : fd.detections) {
        if (d.kind != DetKind::hand || d.score < cfg.det_conf_min) continue;
        if (!d.contact.value_or(false) && !cfg.ablations.no_contact_filtering) continue;
        const double dx = d.box.center_x() - p.cx, dy = d.box.center_y() - p.cy;
        const double dist = dx * dx + dy * dy;
        if (dist < best_d) {
            best_d = dist;
            best = &d;
        }
    }
    return best;
}

}  // namespace

AcpTrainResult train_acp(const ParsedDetections& detections, const FrameStore& frames,
                         const AcpTrainConfig& cfg, const std::string& out_base) {
    cfg.acp.validate();
    Rng master(cfg.seed, 11);
    Rng rng = master.fork(1);

    // frames with at least one usable detection
    struct FrameRef {
        const FrameDetections* fd;
    };
    std::vector<FrameRef> eligible;
    for (const auto& video : detections.videos)
        for (const auto& fd : video) {
            AcpConfig probe_cfg = cfg.acp;
            Rng peek(0, 1);
            if (!sample_training_patches(fd, probe_cfg, peek).empty()) eligible.push_back({&fd});
        }
    if (eligible.empty()) throw std::runtime_error("train_acp: no frames with usable detections");

    // channel stats from a sample of frames
    NormStats norm;
    {
        std::vector<Image> sample;
        Rng srng = master.fork(2);
        for (int i = 0; i < 24; ++i) {
            const auto& fd = *eligible[srng.uniform_int(static_cast<uint32_t>(eligible.size()))].fd;
            sample.push_back(frames.get(fd.video_id, fd.frame_idx));
        }
        norm = estimate_norm_stats(sample);
    }
    const std::vector<float> fill{norm.mean[0], norm.mean[1], norm.mean[2]};

    AcpModel model;
    model.build(cfg.model, cfg.seed);
    std::vector<nn::Param<float>*> params;
    model.collect(params);
    nn::Adam<float> adam;
    adam.lr = cfg.lr;
    adam.weight_decay = cfg.weight_decay;

    std::ofstream metrics(out_base + "_metrics.csv", std::ios::trunc);
    metrics << "step,seg_loss,grasp_loss\n";

    const int G = cfg.model.grasp_classes;
    const int seg_px = cfg.acp.mask_size * cfg.acp.mask_size;
    AcpTrainResult result;

    for (int step = 0; step < cfg.steps; ++step) {
        nn::zero_grads(params);

        std::vector<ContextSample> batch;
        int guard = 0;
        while (static_cast<int>(batch.size()) < cfg.batch) {
            if (++guard > cfg.batch * 100)
                throw std::runtime_error("train_acp: cannot assemble a batch");
            const auto& fd = *eligible[rng.uniform_int(static_cast<uint32_t>(eligible.size()))].fd;
            auto patches = sample_training_patches(fd, cfg.acp, rng);
            if (patches.empty()) continue;
            const PatchSpec& p = patches[rng.uniform_int(static_cast<uint32_t>(patches.size()))];
            const Image& img = frames.get(fd.video_id, fd.frame_idx);
            ContextSample cs = make_context(img, p, target_boxes(fd, cfg.acp), fill, cfg.acp);
            if (cs.role == PatchRole::hand_pos && !cfg.acp.ablations.no_hand_prediction) {
                const Detection* hand = find_patch_hand(fd, p, cfg.acp);
                if (hand && hand->grasp_scores)
                    cs.grasp_target = grasp_targets(*hand->grasp_scores, cfg.acp.grasp_neg_count);
            }
            batch.push_back(std::move(cs));
        }

        std::vector<Image> inputs;
        inputs.reserve(batch.size());
        for (const auto& cs : batch) inputs.push_back(cs.input);
        AcpCache cache;
        AcpForward fwd = model.forward(batch_images(inputs, norm), &cache);

        TensorF d_seg(fwd.seg_logits.shape);
        TensorF d_grasp(fwd.grasp_logits.shape);
        double seg_loss = 0.0, grasp_loss = 0.0;
        int grasp_samples = 0;
        for (size_t i = 0; i < batch.size(); ++i)
            if (!batch[i].grasp_target.empty()) ++grasp_samples;

        const float inv_batch = 1.f / static_cast<float>(batch.size());
        for (size_t i = 0; i < batch.size(); ++i) {
            const float* logits = fwd.seg_logits.v.data() + i * seg_px;
            const float* target = batch[i].seg_target.data.data();
            seg_loss += nn::BceWithLogits<float>::value(logits, target, seg_px,
                                                        static_cast<float>(cfg.acp.pos_weight));
            nn::BceWithLogits<float>::grad(logits, target, seg_px,
                                           static_cast<float>(cfg.acp.pos_weight), inv_batch,
                                           d_seg.v.data() + i * seg_px);
            if (!batch[i].grasp_target.empty()) {
                const float* gl = fwd.grasp_logits.v.data() + i * G;
                float* dg = d_grasp.v.data() + i * G;
                int used = 0;
                for (int g = 0; g < G; ++g) used += batch[i].grasp_target[g] >= 0 ? 1 : 0;
                if (used == 0) continue;
                double sample_loss = 0.0;
                for (int g = 0; g < G; ++g) {
                    if (batch[i].grasp_target[g] < 0) continue;
                    const float y = batch[i].grasp_target[g];
                    sample_loss += nn::BceWithLogits<float>::value(gl + g, &y, 1, 1.f);
                    float d1;
                    nn::BceWithLogits<float>::grad(gl + g, &y, 1, 1.f, 1.f, &d1);
                    // mean over used classes, weighted, averaged over grasp samples
                    dg[g] = d1 * static_cast<float>(cfg.acp.grasp_loss_weight) /
                            (static_cast<float>(used) * static_cast<float>(grasp_samples));
                }
                grasp_loss += sample_loss / used;
            }
        }
        seg_loss /= batch.size();
        if (grasp_samples > 0) grasp_loss /= grasp_samples;

        if (!std::isfinite(seg_loss) || !std::isfinite(grasp_loss))
            throw NumericError("train_acp: loss diverged at step " + std::to_string(step));
        metrics << step << "," << seg_loss << "," << grasp_loss << "\n";
        result.final_seg_loss = seg_loss;
        result.final_grasp_loss = grasp_loss;

        model.backward(d_seg, d_grasp, cache);
        adam.step(params);
    }

    std::map<std::string, std::string> extra{
        {"no_hand_hiding", cfg.acp.ablations.no_hand_hiding ? "1" : "0"},
        {"symmetric_context", cfg.acp.ablations.symmetric_context ? "1" : "0"},
        {"steps", std::to_string(cfg.steps)}};
    save_checkpoint(out_base, "acp_model", cfg.model.describe(), cfg.seed, norm, params, extra);
    result.checkpoint_base = out_base;
    return result;
}

// ---- probe data ----

ProbeData collect_probe_data(const std::string& world_dir, const FrameStore& frames,
                             int crop_size, int frame_stride, int test_participant_from,
                             int max_per_video) {
    WorldGtIndex idx = read_world_index(world_dir);
    const int n_states = idx.cfg.states_per_object;
    ProbeData out;
    for (size_t vi = 0; vi < idx.video_ids.size(); ++vi) {
        VideoGt gt = read_video_gt(world_dir, idx.video_ids[vi]);
        int taken = 0;
        for (size_t fi = 0; fi < gt.frames.size(); fi += frame_stride) {
            const auto& f = gt.frames[fi];
            for (const auto& o : f.objects) {
                if (max_per_video > 0 && taken >= max_per_video) break;
                // State-neutral square framing around the body, with seeded
                // scale/offset jitter (annotation-noise analog). The jitter is
                // keyed per (video, frame, object) so the dataset is a pure
                // function of the world.
                Rng jrng(hash_str64(gt.video_id) ^
                             (static_cast<uint64_t>(f.frame_idx) * 0x9e3779b97f4a7c15ULL),
                         static_cast<uint64_t>(o.id) * 2 + 3);
                const double size = std::max(o.body.width(), o.body.height());
                const double half = 0.5 * jrng.uniform(1.4, 2.2) * size;
                const double jx = jrng.uniform(-0.30, 0.30) * size;
                const double jy = jrng.uniform(-0.30, 0.30) * size;
                BBox square{o.body.center_x() + jx - half, o.body.center_y() + jy - half,
                            o.body.center_x() + jx + half, o.body.center_y() + jy + half};
                if (!square.valid()) continue;
                // states are probed on the object alone; crops containing the
                // (pose-bearing) hand would measure hand reading instead
                if (f.hand_box && iou(square, *f.hand_box) > 0.0) continue;
                // sample the square as-is (border samples clamp); clipping it
                // would re-introduce state-correlated framing
                const Image& frame = frames.get(gt.video_id, f.frame_idx);
                out.crops.push_back(crop_resize(frame, square, crop_size, crop_size));
                std::vector<uint8_t> label(n_states, 0);
                label[o.state % n_states] = 1;
                out.labels.push_back(std::move(label));
                out.participants.push_back(gt.participant);
                out.is_test.push_back(gt.participant >= test_participant_from ? 1 : 0);
                ++taken;
            }
        }
    }
    if (out.crops.empty()) throw std::runtime_error("probe: empty dataset");
    return out;
}

Eigen::MatrixXd extract_features(const ObjectModel& model, const NormStats& norm,
                                 const std::vector<Image>& crops, int batch) {
    const int d = model.trunk.spec.embed_dim;
    Eigen::MatrixXd feats(crops.size(), d);
    for (size_t start = 0; start < crops.size(); start += batch) {
        const size_t n = std::min(crops.size() - start, static_cast<size_t>(batch));
        std::vector<Image> chunk(crops.begin() + start, crops.begin() + start + n);
        TensorF e = encode_object(model, chunk, norm);
        for (size_t i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) feats(start + i, j) = e.v[i * d + j];
    }
    return feats;
}

ProbeResult probe_checkpoint(const ObjectModel& model, const NormStats& norm,
                             const ProbeData& data) {
    Eigen::MatrixXd feats = extract_features(model, norm, data.crops);
    return linear_probe(feats, data.labels, data.is_test);
}

}  // namespace hoi
