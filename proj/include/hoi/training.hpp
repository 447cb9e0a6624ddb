#pragma once

#include <list>
#include <string>
#include <unordered_map>
#include <vector>

#include "hoi/acp.hpp"
#include "hoi/config.hpp"
#include "hoi/eval.hpp"
#include "hoi/losses.hpp"
#include "hoi/models.hpp"
#include "hoi/synthworld.hpp"
#include "hoi/tracker.hpp"

namespace hoi {

// Frame loader over a world directory with a small LRU cache.
class FrameStore {
public:
    FrameStore(std::string dir, size_t capacity = 96) : dir_(std::move(dir)), cap_(capacity) {}
    const Image& get(const std::string& video_id, int64_t frame_idx) const;

private:
    std::string dir_;
    size_t cap_;
    mutable std::unordered_map<std::string, Image> cache_;
    mutable std::list<std::string> lru_;
};

// SimCLR-style augmentation parameters (resized crop, flip, color jitter,
// grayscale, Gaussian blur).
struct AugmentParams {
    double crop_scale_lo = 0.5, crop_scale_hi = 1.0;
    double flip_prob = 0.5;
    double jitter_prob = 0.8;
    double brightness = 0.8, contrast = 0.8, saturation = 0.8, hue = 0.2;
    double grayscale_prob = 0.2;
    double blur_sigma_lo = 0.1, blur_sigma_hi = 2.0;
};

Image augment_crop(const Image& crop, const AugmentParams& p, bool allow_flip, Rng& rng);

struct PretrainConfig {
    PretrainMode mode = PretrainMode::tsc;
    int steps = 500;
    int batch = 32;
    double lr = 1e-4;
    bool cosine_lr = false;  // cosine decay to 0; constant lr when off
    double weight_decay = 0.0;
    double crop_context = 1.5;  // box expansion factor when extracting crops
    // Train on hand tracks instead of object tracks (the grasp-scorer
    // adaptation setup: temporal consistency on hands; tsc_ohc excluded).
    bool on_hand_tracks = false;
    LossConfig loss;
    SampleParams sampling;
    TrunkSpec trunk;
    AugmentParams aug;
    uint64_t seed = 0;

    static PretrainConfig from_config(const Config& c, PretrainMode mode, uint64_t seed);
};

struct PretrainResult {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::vector<double> loss_curve;
    std::string checkpoint_base;
};

// Seeded pretraining over object/hand tracks; saves the final checkpoint
// (object model at <out_base>, hand model at <out_base>_hand for tsc_ohc)
// and a per-step metrics CSV at <out_base>_metrics.csv.
// Throws on loss divergence (NaN).
PretrainResult pretrain(const TrackBuildResult& tracks, const FrameStore& frames,
                        const PretrainConfig& cfg, const std::string& out_base);

struct AcpTrainConfig {
    int steps = 400;
    int batch = 16;
    double lr = 1e-4;
    double weight_decay = 0.0;
    AcpSpec model;
    AcpConfig acp;
    uint64_t seed = 0;

    static AcpTrainConfig from_config(const Config& c, uint64_t seed);
};

struct AcpTrainResult {
    double final_seg_loss = 0.0;
    double final_grasp_loss = 0.0;
    std::string checkpoint_base;
};

AcpTrainResult train_acp(const ParsedDetections& detections, const FrameStore& frames,
                         const AcpTrainConfig& cfg, const std::string& out_base);

// ---- probe data: ground-truth object crops with state labels ----

struct ProbeData {
    std::vector<Image> crops;                 // resized to the trunk input size
    std::vector<std::vector<uint8_t>> labels; // one-hot state, S columns
    std::vector<uint8_t> is_test;             // held-out participants
    std::vector<int> participants;
};

// Samples every `frame_stride`-th frame of each video; participants with
// id >= test_participant_from go to the held-out split.
ProbeData collect_probe_data(const std::string& world_dir, const FrameStore& frames,
                             int crop_size, int frame_stride, int test_participant_from,
                             int max_per_video = 0);

// Frozen-feature probe: trunk embeddings -> per-state logistic regression mAP.
ProbeResult probe_checkpoint(const ObjectModel& model, const NormStats& norm,
                             const ProbeData& data);

Eigen::MatrixXd extract_features(const ObjectModel& model, const NormStats& norm,
                                 const std::vector<Image>& crops, int batch = 64);

NormStats estimate_norm_stats(const std::vector<Image>& sample);

}  // namespace hoi
