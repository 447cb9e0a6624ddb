#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "hoi/image.hpp"
#include "hoi/motion.hpp"
#include "hoi/rng.hpp"
#include "hoi/tracker.hpp"

namespace hoi {

using Mat = Eigen::MatrixXd;

struct LossConfig {
    double tau = 0.1;        // temperature
    double lambda_h = 1.0;   // weight on the object-hand term
    double tcn_margin = 2.0;
    bool mean_reduction = false;  // losses sum over the batch unless set

    void validate() const;
};

// One training tuple: object crop, its temporal augmentation, the corresponding
// hand crop, and the hand-motion descriptor.
struct Quadruple {
    Image o;
    Image o_prime;
    Image h_a;
    HandMotionDescriptor h_m;
};

// Scaled cosine similarities: entry (i,j) = cos(U_i, V_j) / tau.
// Throws on zero-norm rows.
Mat similarity_matrix(const Mat& U, const Mat& V, double tau);

struct Grad2 {
    double value = 0.0;
    Mat d_a, d_b;
};
struct Grad3 {
    double value = 0.0;
    Mat d_a, d_b, d_c;
};

// Temporal contrastive loss over matched rows of z_o (embeddings of o_i) and
// z_op (embeddings of o'_i). Two NT-Xent terms: one anchored at o_i with
// within-view negatives s^{oo}, one anchored at o'_i with negatives s^{o'o'};
// the positive similarity s^{oo'}_{ii} appears in both denominators.
double loss_temporal(const Mat& z_o, const Mat& z_op, double tau, bool mean = false);
Grad2 loss_temporal_grad(const Mat& z_o, const Mat& z_op, double tau, bool mean = false);

// Object-hand consistency loss. Row i of each input corresponds to quadruple i:
// z_oh = f_h(o_i), z_h = g_h(h_i), z_oo = f_o(o_i) (the object-object negatives).
double loss_hand(const Mat& z_oh, const Mat& z_h, const Mat& z_oo, double tau,
                 bool mean = false);
Grad3 loss_hand_grad(const Mat& z_oh, const Mat& z_h, const Mat& z_oo, double tau,
                     bool mean = false);

// L_t + lambda * L_h over independently sampled batches. With lambda == 0 the
// hand batch is not evaluated at all, so the result is bit-identical to L_t.
struct JointBatch {
    Mat z_o, z_op;          // temporal batch
    Mat z_oh, z_h, z_oo;    // hand batch (may be empty when lambda == 0)
};
double loss_joint(const JointBatch& b, const LossConfig& cfg);

// Triplet margin loss, mean over rows: max(0, |a-p|^2 + margin - |a-n|^2).
double loss_tcn(const Mat& anchor, const Mat& positive, const Mat& negative, double margin);
Grad3 loss_tcn_grad(const Mat& anchor, const Mat& positive, const Mat& negative, double margin);

// ---- batch composition ----

enum class PretrainMode { tsc, tsc_ohc, tcn, simclr, simclr_tcn };
PretrainMode pretrain_mode_from_string(const std::string& s);
std::string to_string(PretrainMode m);

struct CropRef {
    int track = -1;
    int entry = -1;
};

struct QuadrupleIndex {
    CropRef anchor;            // o_i
    CropRef positive;          // o'_i (equals anchor for simclr)
    CropRef negative;          // o''_i, tcn only
    int hand_track = -1;       // OHC: sampled hand entry k
    int hand_entry = -1;
};

struct SampleParams {
    int batch = 32;
    int min_track_len = 4;
    int min_hand_frames = 4;     // OHC eligibility: linked entries per track
    double hand_window_s = 0.3;  // |t_k - t_i| bound when sampling the hand crop
};

// Index-level batch sampling; crops are materialized by the caller. Modes:
//   tsc / simclr_tcn : positive within floor(w/4) of the anchor
//   simclr           : positive == anchor (two independent augmentations)
//   tcn              : negative at least ceil(w/2) from both anchor and positive
//   tsc_ohc          : anchors restricted to hand-linked entries; hand crop k
//                      sampled within hand_window_s of the anchor time
// Throws when no track satisfies the mode's constraints, naming the constraint.
std::vector<QuadrupleIndex> sample_batch_indices(const TrackBuildResult& tracks,
                                                 PretrainMode mode, const SampleParams& params,
                                                 Rng& rng);

}  // namespace hoi
