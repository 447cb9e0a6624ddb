#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hoi/bbox.hpp"
#include "hoi/detections.hpp"
#include "hoi/image.hpp"
#include "hoi/models.hpp"
#include "hoi/rng.hpp"

namespace hoi {

enum class PatchRole { hand_pos, object_pos, negative };

// Square patch; the training/inference context is the 2s x 2s window with this
// patch at its bottom center (centered for the symmetric-context ablation).
struct PatchSpec {
    double cx = 0.0;
    double cy = 0.0;
    double side = 0.0;
    PatchRole role = PatchRole::negative;

    BBox rect() const { return {cx - side / 2, cy - side / 2, cx + side / 2, cy + side / 2}; }
};

struct ContextSample {
    Image input;       // 3 x 128 x 128, masked region filled exactly
    Image seg_target;  // 1 x 64 x 64, binary
    std::vector<int8_t> grasp_target;  // per class 1=pos 0=neg -1=ignore; hand_pos only
    PatchRole role = PatchRole::negative;
    // mask rectangle within input (bottom-center 64x64 unless clamped at borders)
    int mask_x = 32, mask_y = 64, mask_w = 64, mask_h = 64;
};

struct AcpAblations {
    bool no_hand_prediction = false;   // hand boxes unused: no grasp loss, no hand pasting
    bool no_hand_hiding = false;       // skip masking (negative control for blindness)
    bool symmetric_context = false;    // mask at context center
    bool no_contact_filtering = false; // use hands regardless of contact state
    bool no_object_prediction = false; // no object patches / pasting
};

struct AcpConfig {
    double hand_scale_lo = 1.0, hand_scale_hi = 1.3;
    double object_scale_lo = 0.5, object_scale_hi = 0.75;
    double det_conf_min = 0.8;
    double det_max_side = 150.0;      // at det_ref_width, scaled proportionally
    double det_ref_width = 456.0;
    double object_min_side = 20.0;    // at det_ref_width
    double pos_weight = 4.0;
    double grasp_loss_weight = 0.5;
    int grasp_neg_count = 15;         // K, clamped to G-1
    std::vector<double> infer_context_sides = {60.0, 100.0, 160.0};  // at infer_ref_width
    double infer_ref_width = 1920.0;
    int infer_patches_per_side = 300;  // 4000 recovers the full-scale setting
    double smooth_sigma = 25.0;        // at infer_ref_width; <= 0 disables
    double combine_weight = 2.0 / 3.0;
    int context_size = 128;
    int mask_size = 64;
    AcpAblations ablations;

    double det_scale(double image_w) const { return image_w / det_ref_width; }
    double infer_scale(double image_w) const { return image_w / infer_ref_width; }
    void validate() const;
};

// Patches for one frame: positives centered on contact hands (scale 1..1.3x),
// positives inside object boxes (0.5..0.75x), one negative per hand positive
// placed away from hand boxes.
std::vector<PatchSpec> sample_training_patches(const FrameDetections& frame,
                                               const AcpConfig& cfg, Rng& rng);

// Crop the asymmetric context, resize to 128x128, mask, and rasterize targets.
// gt_boxes are pasted (union) and restricted to the masked region.
ContextSample make_context(const Image& image, const PatchSpec& patch,
                           const std::vector<BBox>& gt_boxes,
                           const std::vector<float>& fill_rgb, const AcpConfig& cfg);

// Exactly one positive (argmax, lowest index on ties), min(K, G-1) negatives
// (lowest scores), remainder ignored.
std::vector<int8_t> grasp_targets(const std::vector<double>& scores, int neg_count);

// Per-sample loss: mean-pixel weighted BCE (positive weight cfg.pos_weight) plus
// cfg.grasp_loss_weight times the mean BCE over non-ignored grasp classes.
// Pass empty grasp vectors for samples without grasp supervision.
double acp_loss(const std::vector<float>& seg_logits, const Image& seg_target,
                const std::vector<float>& grasp_logits,
                const std::vector<int8_t>& grasp_target, const AcpConfig& cfg);

struct Heatmaps {
    Image roi;                 // 1 x H x W mean interaction probability
    std::vector<Image> grasps; // G maps
    Image coverage;            // patches covering each pixel (0 => never predicted)
};

// Per-patch prediction: probabilities for the masked region plus grasp scores.
struct AcpPrediction {
    Image seg_prob;                  // 1 x 64 x 64 in [0,1]
    std::vector<double> grasp_prob;  // length G
};
using AcpRunner = std::function<std::vector<AcpPrediction>(const std::vector<Image>&)>;

// Uniform context grids per configured side, in canonical (side, y, x) order.
std::vector<PatchSpec> inference_patch_grid(int image_w, int image_h, const AcpConfig& cfg);
std::string patch_to_json(const PatchSpec& p);

// Dense multi-scale inference: predictions pasted back over each patch's
// masked footprint and averaged. Patches are aggregated in canonical
// (side, y, x) order, so the result does not depend on enumeration order.
Heatmaps infer_heatmaps(const Image& image, const AcpModel& model, const NormStats& norm,
                        const AcpConfig& cfg);
Heatmaps infer_heatmaps_with(const Image& image, const AcpRunner& runner, int grasp_classes,
                             const NormStats& norm, const AcpConfig& cfg);

Image combine_heatmaps(const Image& p_ext, const Image& p_acp, double w);

}  // namespace hoi
