#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "hoi/image.hpp"

namespace hoi {

// Average precision with tied scores treated as one threshold block (precision
// taken at the block end). A constant predictor therefore scores exactly the
// positive prevalence. Throws when labels contain no positive.
double average_precision(const std::vector<double>& scores,
                         const std::vector<uint8_t>& labels);

// Points of the tie-aware PR curve, for report rendering.
std::vector<std::pair<double, double>> pr_curve(const std::vector<double>& scores,
                                                const std::vector<uint8_t>& labels);

struct ProbeResult {
    double map = 0.0;
    std::vector<double> per_state_ap;   // NaN for excluded states
    std::vector<int> excluded_states;   // states lacking positives in a split
};

// One L2-regularized logistic regression per state on frozen features,
// full-batch Newton iterations (no training stochasticity). is_test marks the
// held-out rows; features are standardized with train-split statistics.
ProbeResult linear_probe(const Eigen::MatrixXd& features,
                         const std::vector<std::vector<uint8_t>>& labels,
                         const std::vector<uint8_t>& is_test, double l2 = 1e-4);

struct RoiApResult {
    double ap = 0.0;
    size_t evaluated = 0;
    size_t excluded = 0;
};

// Pixel-level AP. With slack_px > 0, pixels within slack_px (Euclidean, both
// sides) of the positive-region boundary are excluded from scoring. Boundary
// pixels are positives 4-adjacent to an in-image negative.
RoiApResult roi_ap_detailed(const Image& heatmap, const Image& gt_mask, double slack_px);
double roi_ap(const Image& heatmap, const Image& gt_mask, double slack_px);

inline int slack_for_width(int image_width, double fraction = 0.01) {
    return static_cast<int>(std::lround(fraction * image_width));
}

// Mean heatmap value over mask pixels, one score per grasp map.
std::vector<double> gao_scores(const std::vector<Image>& grasp_heatmaps,
                               const Image& object_mask);

struct GaoExample {
    std::vector<double> scores;
    std::vector<uint8_t> labels;
};

struct GaoResult {
    double map = 0.0;
    double chance = 0.0;   // mean positive prevalence over scored grasps
    std::vector<int> grasps_present;
    std::vector<double> per_grasp_ap;
    std::vector<double> per_grasp_chance;
};

// AP per grasp across objects, averaged over grasps present in the eval set.
GaoResult gao_map(const std::vector<GaoExample>& objects);

// Exact squared Euclidean distance transform (Felzenszwalb-Huttenlocher) to the
// nearest set pixel; pixels in the set get 0. Used for the slack band.
std::vector<double> squared_distance_transform(const std::vector<uint8_t>& set_mask, int h,
                                               int w);

}  // namespace hoi
