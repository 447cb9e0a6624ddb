#include "hoi/acp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hoi {

void AcpConfig::validate() const {
    if (!(hand_scale_lo <= hand_scale_hi) || !(object_scale_lo <= object_scale_hi))
        throw std::invalid_argument("acp: scale ranges must be ordered");
    if (pos_weight <= 0 || grasp_loss_weight < 0)
        throw std::invalid_argument("acp: weights must be positive");
    if (grasp_neg_count < 1) throw std::invalid_argument("acp: grasp_neg_count must be >= 1");
    if (infer_context_sides.empty()) throw std::invalid_argument("acp: no inference sides");
    if (infer_patches_per_side < 1) throw std::invalid_argument("acp: patches per side < 1");
    if (context_size != 2 * mask_size)
        throw std::invalid_argument("acp: context must be twice the mask size");
}

namespace {

bool rects_overlap(const BBox& a, const BBox& b) {
    return std::min(a.x2, b.x2) > std::max(a.x1, b.x1) &&
           std::min(a.y2, b.y2) > std::max(a.y1, b.y1);
}

}  // namespace

std::vector<PatchSpec> sample_training_patches(const FrameDetections& frame,
                                               const AcpConfig& cfg, Rng& rng) {
    cfg.validate();
    const double scale = cfg.det_scale(frame.width);
    const double max_side = cfg.det_max_side * scale;
    const double min_obj_side = cfg.object_min_side * scale;

    std::vector<PatchSpec> out;
    std::vector<BBox> hand_boxes;  // negatives avoid these
    for (const auto& d : frame.detections)
        if (d.kind == DetKind::hand) hand_boxes.push_back(d.box);

    for (const auto& d : frame.detections) {
        if (d.score < cfg.det_conf_min) continue;
        if (d.box.width() >= max_side || d.box.height() >= max_side) continue;

        if (d.kind == DetKind::hand && !cfg.ablations.no_hand_prediction) {
            const bool in_contact = d.contact.value_or(false);
            if (!in_contact && !cfg.ablations.no_contact_filtering) continue;
            const double base = std::max(d.box.width(), d.box.height());
            if (!(base > 0)) continue;
            PatchSpec pos;
            pos.role = PatchRole::hand_pos;
            pos.side = rng.uniform(cfg.hand_scale_lo, cfg.hand_scale_hi) * base;
            pos.cx = d.box.center_x();
            pos.cy = d.box.center_y();
            out.push_back(pos);

            // one negative per hand positive, located away from all hand boxes
            for (int attempt = 0; attempt < 50; ++attempt) {
                PatchSpec neg;
                neg.role = PatchRole::negative;
                neg.side = pos.side;
                neg.cx = rng.uniform(neg.side / 2, frame.width - neg.side / 2);
                neg.cy = rng.uniform(neg.side / 2, frame.height - neg.side / 2);
                bool clear = true;
                for (const auto& hb : hand_boxes)
                    if (rects_overlap(neg.rect(), hb)) clear = false;
                if (clear) {
                    out.push_back(neg);
                    break;
                }
            }
        } else if (d.kind == DetKind::object && !cfg.ablations.no_object_prediction) {
            if (d.box.width() <= min_obj_side || d.box.height() <= min_obj_side) continue;
            const double base = std::min(d.box.width(), d.box.height());
            PatchSpec pos;
            pos.role = PatchRole::object_pos;
            pos.side = rng.uniform(cfg.object_scale_lo, cfg.object_scale_hi) * base;
            if (!(pos.side > 0)) continue;
            // uniform placement with the patch fully inside the object box
            pos.cx = rng.uniform(d.box.x1 + pos.side / 2, d.box.x2 - pos.side / 2);
            pos.cy = rng.uniform(d.box.y1 + pos.side / 2, d.box.y2 - pos.side / 2);
            out.push_back(pos);
        }
    }
    return out;
}

namespace {

// Context window around a patch; patch sits at the bottom center (or the center
// for the symmetric-context ablation). Clamping shifts the window into the image.
BBox context_rect(const PatchSpec& p, int img_w, int img_h, bool symmetric) {
    const double s = p.side;
    double x1 = p.cx - s;
    double y1 = symmetric ? p.cy - s : p.cy - 1.5 * s;
    double w = 2 * s, h = 2 * s;
    if (w > img_w) {
        x1 = 0;
        w = img_w;
    } else {
        x1 = std::clamp(x1, 0.0, img_w - w);
    }
    if (h > img_h) {
        y1 = 0;
        h = img_h;
    } else {
        y1 = std::clamp(y1, 0.0, img_h - h);
    }
    return {x1, y1, x1 + w, y1 + h};
}

}  // namespace

ContextSample make_context(const Image& image, const PatchSpec& patch,
                           const std::vector<BBox>& gt_boxes,
                           const std::vector<float>& fill_rgb, const AcpConfig& cfg) {
    if (!(patch.side > 0)) throw std::invalid_argument("make_context: zero-area patch");
    if (image.c != 3) throw std::invalid_argument("make_context: expects RGB image");
    if (static_cast<int>(fill_rgb.size()) != 3)
        throw std::invalid_argument("make_context: fill must have 3 channels");

    const int cs = cfg.context_size;
    const BBox ctx = context_rect(patch, image.w, image.h, cfg.ablations.symmetric_context);
    ContextSample out;
    out.role = patch.role;
    out.input = crop_resize(image, ctx, cs, cs);

    // mask rectangle: the patch mapped into resized-context coordinates
    const BBox pr = patch.rect();
    const double fx = cs / ctx.width();
    const double fy = cs / ctx.height();
    int mx0 = static_cast<int>(std::lround((pr.x1 - ctx.x1) * fx));
    int my0 = static_cast<int>(std::lround((pr.y1 - ctx.y1) * fy));
    int mx1 = static_cast<int>(std::lround((pr.x2 - ctx.x1) * fx));
    int my1 = static_cast<int>(std::lround((pr.y2 - ctx.y1) * fy));
    mx0 = std::clamp(mx0, 0, cs);
    my0 = std::clamp(my0, 0, cs);
    mx1 = std::clamp(mx1, mx0, cs);
    my1 = std::clamp(my1, my0, cs);
    out.mask_x = mx0;
    out.mask_y = my0;
    out.mask_w = mx1 - mx0;
    out.mask_h = my1 - my0;

    if (!cfg.ablations.no_hand_hiding) {
        for (int ch = 0; ch < 3; ++ch)
            for (int y = my0; y < my1; ++y)
                for (int x = mx0; x < mx1; ++x) out.input.at(ch, y, x) = fill_rgb[ch];
    }

    // Segmentation target: pasted boxes restricted to the masked (patch) region,
    // rasterized at native patch resolution then resized with 0.5 binarization.
    const int ts = cfg.mask_size;
    out.seg_target = Image(1, ts, ts, 0.f);
    if (!gt_boxes.empty()) {
        const int native = std::max(2, static_cast<int>(std::lround(patch.side)));
        Image raster(1, native, native, 0.f);
        for (int gy = 0; gy < native; ++gy) {
            const double py = pr.y1 + (gy + 0.5) * patch.side / native;
            for (int gx = 0; gx < native; ++gx) {
                const double px = pr.x1 + (gx + 0.5) * patch.side / native;
                for (const auto& b : gt_boxes) {
                    if (px >= b.x1 && px < b.x2 && py >= b.y1 && py < b.y2) {
                        raster.at(0, gy, gx) = 1.f;
                        break;
                    }
                }
            }
        }
        Image resized = resize_bilinear(raster, ts, ts);
        for (int y = 0; y < ts; ++y)
            for (int x = 0; x < ts; ++x)
                out.seg_target.at(0, y, x) = resized.at(0, y, x) >= 0.5f ? 1.f : 0.f;
    }
    return out;
}

std::vector<int8_t> grasp_targets(const std::vector<double>& scores, int neg_count) {
    const int g = static_cast<int>(scores.size());
    if (g < 2) throw std::invalid_argument("grasp_targets: need at least 2 classes");
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("grasp_targets: non-finite score");

    std::vector<int8_t> labels(g, -1);
    int pos = 0;
    for (int i = 1; i < g; ++i)
        if (scores[i] > scores[pos]) pos = i;  // lowest index wins ties
    labels[pos] = 1;

    std::vector<int> order(g);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[a] < scores[b]; });
    int need = std::min(neg_count, g - 1);
    for (int idx : order) {
        if (need == 0) break;
        if (idx == pos) continue;
        labels[idx] = 0;
        --need;
    }
    return labels;
}

namespace {

double bce_with_logit(double x, double y, double pos_weight) {
    const double sp_pos = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    const double sp_neg = sp_pos - x;  // softplus(-x)
    return pos_weight * y * sp_neg + (1.0 - y) * sp_pos;
}

}  // namespace

double acp_loss(const std::vector<float>& seg_logits, const Image& seg_target,
                const std::vector<float>& grasp_logits,
                const std::vector<int8_t>& grasp_target, const AcpConfig& cfg) {
    if (seg_logits.size() != seg_target.data.size())
        throw std::invalid_argument("acp_loss: seg shape mismatch");
    double seg = 0.0;
    for (size_t i = 0; i < seg_logits.size(); ++i)
        seg += bce_with_logit(seg_logits[i], seg_target.data[i], cfg.pos_weight);
    seg /= static_cast<double>(seg_logits.size());

    double grasp = 0.0;
    if (!grasp_target.empty()) {
        if (grasp_logits.size() != grasp_target.size())
            throw std::invalid_argument("acp_loss: grasp shape mismatch");
        int used = 0;
        for (size_t i = 0; i < grasp_target.size(); ++i) {
            if (grasp_target[i] < 0) continue;
            grasp += bce_with_logit(grasp_logits[i], grasp_target[i], 1.0);
            ++used;
        }
        if (used > 0) grasp /= used;
    }
    return seg + cfg.grasp_loss_weight * grasp;
}

Heatmaps infer_heatmaps(const Image& image, const AcpModel& model, const NormStats& norm,
                        const AcpConfig& cfg) {
    const int g = model.spec.grasp_classes;
    const int ts = cfg.mask_size;
    AcpRunner runner = [&](const std::vector<Image>& contexts) {
        AcpForward fwd = acp_forward(model, contexts, norm);
        std::vector<AcpPrediction> out(contexts.size());
        for (size_t i = 0; i < contexts.size(); ++i) {
            out[i].seg_prob = Image(1, ts, ts);
            const float* logits = fwd.seg_logits.v.data() + i * ts * ts;
            for (int j = 0; j < ts * ts; ++j)
                out[i].seg_prob.data[j] = nn::sigmoid(logits[j]);
            out[i].grasp_prob.resize(g);
            for (int c = 0; c < g; ++c)
                out[i].grasp_prob[c] = nn::sigmoid(fwd.grasp_logits.v[i * g + c]);
        }
        return out;
    };
    return infer_heatmaps_with(image, runner, g, norm, cfg);
}

std::vector<PatchSpec> inference_patch_grid(int image_w, int image_h, const AcpConfig& cfg) {
    cfg.validate();
    std::vector<PatchSpec> patches;
    for (double side_ref : cfg.infer_context_sides) {
        const double ctx_side = std::max(4.0, side_ref * cfg.infer_scale(image_w));
        const double patch_side = ctx_side / 2.0;
        const int count = cfg.infer_patches_per_side;
        int nx = std::max(1, static_cast<int>(std::lround(
                                 std::sqrt(static_cast<double>(count) * image_w / image_h))));
        int ny = std::max(1, (count + nx - 1) / nx);
        const double max_x = std::max(0.0, image_w - ctx_side);
        const double max_y = std::max(0.0, image_h - ctx_side);
        for (int iy = 0; iy < ny; ++iy) {
            const double cy0 = ny == 1 ? max_y / 2 : max_y * iy / (ny - 1);
            for (int ix = 0; ix < nx; ++ix) {
                const double cx0 = nx == 1 ? max_x / 2 : max_x * ix / (nx - 1);
                PatchSpec p;
                p.side = patch_side;
                p.cx = cx0 + ctx_side / 2;
                p.cy = cfg.ablations.symmetric_context ? cy0 + ctx_side / 2
                                                       : cy0 + 1.5 * patch_side;
                patches.push_back(p);
            }
        }
    }
    // canonical (side, y, x) order: results must not depend on side order
    std::stable_sort(patches.begin(), patches.end(), [](const PatchSpec& a, const PatchSpec& b) {
        if (a.side != b.side) return a.side < b.side;
        if (a.cy != b.cy) return a.cy < b.cy;
        return a.cx < b.cx;
    });
    return patches;
}

std::string patch_to_json(const PatchSpec& p) {
    const char* role = p.role == PatchRole::hand_pos
                           ? "hand_pos"
                           : p.role == PatchRole::object_pos ? "object_pos" : "negative";
    std::ostringstream ss;
    ss.precision(17);
    ss << "{\"cx\":" << p.cx << ",\"cy\":" << p.cy << ",\"side\":" << p.side << ",\"role\":\""
       << role << "\"}";
    return ss.str();
}

Heatmaps infer_heatmaps_with(const Image& image, const AcpRunner& runner, int grasp_classes,
                             const NormStats& norm, const AcpConfig& cfg) {
    const int W = image.w, H = image.h;
    const int g_classes = grasp_classes;
    std::vector<PatchSpec> patches = inference_patch_grid(W, H, cfg);
    if (patches.empty()) throw std::runtime_error("infer_heatmaps: no patches generated");

    Heatmaps out;
    out.roi = Image(1, H, W, 0.f);
    out.coverage = Image(1, H, W, 0.f);
    out.grasps.assign(g_classes, Image(1, H, W, 0.f));
    std::vector<double> roi_sum(static_cast<size_t>(H) * W, 0.0);
    std::vector<double> count(static_cast<size_t>(H) * W, 0.0);
    std::vector<std::vector<double>> grasp_sum(g_classes,
                                               std::vector<double>(static_cast<size_t>(H) * W));

    const std::vector<BBox> no_boxes;
    const std::vector<float> fill{norm.mean[0], norm.mean[1], norm.mean[2]};
    const int batch = 64;
    for (size_t start = 0; start < patches.size(); start += batch) {
        const size_t n = std::min(patches.size() - start, static_cast<size_t>(batch));
        std::vector<Image> inputs;
        inputs.reserve(n);
        for (size_t i = 0; i < n; ++i)
            inputs.push_back(make_context(image, patches[start + i], no_boxes, fill, cfg).input);
        std::vector<AcpPrediction> preds = runner(inputs);
        if (preds.size() != n) throw std::runtime_error("infer_heatmaps: runner batch mismatch");

        for (size_t i = 0; i < n; ++i) {
            const PatchSpec& p = patches[start + i];
            const BBox pr = p.rect();
            const int x0 = std::max(0, static_cast<int>(std::floor(pr.x1)));
            const int y0 = std::max(0, static_cast<int>(std::floor(pr.y1)));
            const int x1 = std::min(W, static_cast<int>(std::ceil(pr.x2)));
            const int y1 = std::min(H, static_cast<int>(std::ceil(pr.y2)));
            if (x1 <= x0 || y1 <= y0) continue;

            // paste this patch's prediction over its pixel footprint
            Image up = resize_bilinear(preds[i].seg_prob, x1 - x0, y1 - y0);
            const std::vector<double>& gs = preds[i].grasp_prob;
            if (static_cast<int>(gs.size()) != g_classes)
                throw std::runtime_error("infer_heatmaps: grasp vector size mismatch");

            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) {
                    const size_t at = static_cast<size_t>(y) * W + x;
                    roi_sum[at] += up.at(0, y - y0, x - x0);
                    count[at] += 1.0;
                    for (int c = 0; c < g_classes; ++c) grasp_sum[c][at] += gs[c];
                }
        }
    }

    for (size_t i = 0; i < roi_sum.size(); ++i) {
        out.coverage.data[i] = static_cast<float>(count[i]);
        if (count[i] > 0) {
            out.roi.data[i] = static_cast<float>(roi_sum[i] / count[i]);
            for (int c = 0; c < g_classes; ++c)
                out.grasps[c].data[i] = static_cast<float>(grasp_sum[c][i] / count[i]);
        }
    }

    if (cfg.smooth_sigma > 0) {
        const double sigma = cfg.smooth_sigma * cfg.infer_scale(W);
        if (sigma > 0.25) out.roi = gaussian_blur(out.roi, sigma);
    }
    return out;
}

Image combine_heatmaps(const Image& p_ext, const Image& p_acp, double w) {
    if (p_ext.w != p_acp.w || p_ext.h != p_acp.h || p_ext.c != p_acp.c)
        throw std::invalid_argument("combine_heatmaps: shape mismatch");
    if (w < 0 || w > 1) throw std::invalid_argument("combine_heatmaps: w outside [0,1]");
    Image out = p_ext;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = static_cast<float>(w * p_ext.data[i] + (1.0 - w) * p_acp.data[i]);
    return out;
}

}  // namespace hoi
