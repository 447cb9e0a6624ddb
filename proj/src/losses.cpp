#include "hoi/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace hoi {

void LossConfig::validate() const {
    if (!(tau > 0)) throw std::invalid_argument("loss: tau must be > 0");
    if (lambda_h < 0) throw std::invalid_argument("loss: lambda_h must be >= 0");
    if (!(tcn_margin > 0)) throw std::invalid_argument("loss: tcn_margin must be > 0");
}

namespace {

// Unit-normalized rows; throws on zero norms. Returns norms for chain rule use.
Mat unit_rows(const Mat& m, Eigen::VectorXd* norms, const char* what) {
    Mat out(m.rows(), m.cols());
    if (norms) norms->resize(m.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        double n = m.row(i).norm();
        if (!(n > 0.0) || !std::isfinite(n))
            throw std::invalid_argument(std::string(what) + ": zero-norm or non-finite row " +
                                        std::to_string(i));
        out.row(i) = m.row(i) / n;
        if (norms) (*norms)(i) = n;
    }
    return out;
}

// Row-wise log-sum-exp with max subtraction over selected entries.
// mask(i,j) false excludes the entry.
Eigen::VectorXd masked_row_lse(const Mat& s, const Eigen::Array<bool, Eigen::Dynamic,
                                                                 Eigen::Dynamic>& mask) {
    const Eigen::Index n = s.rows(), m = s.cols();
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < m; ++j)
            if (mask(i, j)) mx = std::max(mx, s(i, j));
        double acc = 0.0;
        for (Eigen::Index j = 0; j < m; ++j)
            if (mask(i, j)) acc += std::exp(s(i, j) - mx);
        out(i) = mx + std::log(acc);
    }
    return out;
}

// Gradient of a batch of cosine-similarity sums through the normalization:
// given dL/dS for S_ij = cos(u_i, v_j)/tau, accumulate dL/dU and dL/dV.
void backprop_cosine(const Mat& G, const Mat& u_hat, const Eigen::VectorXd& u_norm,
                     const Mat& v_hat, const Eigen::VectorXd& v_norm, const Mat& cos_m,
                     double tau, Mat* dU, Mat* dV) {
    if (dU) {
        Mat a = G * v_hat;                                     // N x D
        Eigen::VectorXd w = (G.array() * cos_m.array()).rowwise().sum();
        for (Eigen::Index i = 0; i < u_hat.rows(); ++i)
            dU->row(i) += ((a.row(i) - w(i) * u_hat.row(i)) / (tau * u_norm(i)));
    }
    if (dV) {
        Mat b = G.transpose() * u_hat;                         // M x D
        Eigen::VectorXd w = (G.array() * cos_m.array()).colwise().sum();
        for (Eigen::Index j = 0; j < v_hat.rows(); ++j)
            dV->row(j) += ((b.row(j) - w(j) * v_hat.row(j)) / (tau * v_norm(j)));
    }
}

using BoolArr = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

BoolArr offdiag_mask(Eigen::Index n) {
    BoolArr m = BoolArr::Constant(n, n, true);
    for (Eigen::Index i = 0; i < n; ++i) m(i, i) = false;
    return m;
}

// Shared core of L_t and L_h. Both losses have the same shape:
//   term1_i: positive s_cross(i,i), negatives { s_aa(i,j) j != i } + { s_cross(i,k) all k }
//   term2_i: positive s_cross(i,i), negatives { s_bb(i,j) j != i } + { s_cross(k,i) all k }
// where s_cross pairs the two views/modalities, s_aa is within the anchor view
// and s_bb within the other view.
struct NtXentPair {
    double value = 0.0;
    Mat g_cross, g_aa, g_bb;  // dL/dS for each similarity matrix
};

NtXentPair ntxent_pair(const Mat& s_cross, const Mat& s_aa, const Mat& s_bb) {
    const Eigen::Index n = s_cross.rows();
    NtXentPair out;
    BoolArr off = offdiag_mask(n);
    BoolArr all = BoolArr::Constant(n, n, true);

    // log D1_i over { s_aa(i,j) j!=i } u { s_cross(i,k) }
    Eigen::VectorXd lse_aa = n > 1 ? masked_row_lse(s_aa, off) : Eigen::VectorXd();
    Eigen::VectorXd lse_cross_rows = masked_row_lse(s_cross, all);
    Eigen::VectorXd lse_bb = n > 1 ? masked_row_lse(s_bb, off) : Eigen::VectorXd();
    Eigen::VectorXd lse_cross_cols = masked_row_lse(Mat(s_cross.transpose()), all);

    auto merge = [](double a, double b) {  // log(exp(a) + exp(b))
        double m = std::max(a, b);
        return m + std::log(std::exp(a - m) + std::exp(b - m));
    };

    Eigen::VectorXd log_d1(n), log_d2(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        log_d1(i) = n > 1 ? merge(lse_aa(i), lse_cross_rows(i)) : lse_cross_rows(i);
        log_d2(i) = n > 1 ? merge(lse_bb(i), lse_cross_cols(i)) : lse_cross_cols(i);
        out.value += -2.0 * s_cross(i, i) + log_d1(i) + log_d2(i);
    }

    out.g_cross = Mat::Zero(n, n);
    out.g_aa = Mat::Zero(n, n);
    out.g_bb = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < n; ++k) {
            out.g_cross(i, k) += std::exp(s_cross(i, k) - log_d1(i));  // term 1, row i
            out.g_cross(k, i) += std::exp(s_cross(k, i) - log_d2(i));  // term 2, column i
            if (k != i) {
                out.g_aa(i, k) = std::exp(s_aa(i, k) - log_d1(i));
                out.g_bb(i, k) = std::exp(s_bb(i, k) - log_d2(i));
            }
        }
        out.g_cross(i, i) -= 2.0;
    }
    return out;
}

void check_batch(const Mat& m, const char* what) {
    if (m.rows() == 0) throw std::invalid_argument(std::string(what) + ": empty batch (N=0)");
    if (m.cols() == 0) throw std::invalid_argument(std::string(what) + ": zero-dim embeddings");
}

}  // namespace

Mat similarity_matrix(const Mat& U, const Mat& V, double tau) {
    if (!(tau > 0)) throw std::invalid_argument("similarity_matrix: tau must be > 0");
    if (U.cols() != V.cols())
        throw std::invalid_argument("similarity_matrix: dimension mismatch");
    Mat u_hat = unit_rows(U, nullptr, "similarity_matrix.U");
    Mat v_hat = unit_rows(V, nullptr, "similarity_matrix.V");
    return (u_hat * v_hat.transpose()) / tau;
}

double loss_temporal(const Mat& z_o, const Mat& z_op, double tau, bool mean) {
    return loss_temporal_grad(z_o, z_op, tau, mean).value;
}

Grad2 loss_temporal_grad(const Mat& z_o, const Mat& z_op, double tau, bool mean) {
    check_batch(z_o, "loss_temporal");
    if (z_o.rows() != z_op.rows() || z_o.cols() != z_op.cols())
        throw std::invalid_argument("loss_temporal: shape mismatch between views");
    if (!(tau > 0)) throw std::invalid_argument("loss_temporal: tau must be > 0");

    Eigen::VectorXd n_o, n_op;
    Mat o_hat = unit_rows(z_o, &n_o, "loss_temporal.z_o");
    Mat op_hat = unit_rows(z_op, &n_op, "loss_temporal.z_op");

    Mat cos_oo = o_hat * o_hat.transpose();
    Mat cos_cross = o_hat * op_hat.transpose();
    Mat cos_pp = op_hat * op_hat.transpose();

    NtXentPair core = ntxent_pair(cos_cross / tau, cos_oo / tau, cos_pp / tau);

    Grad2 out;
    out.d_a = Mat::Zero(z_o.rows(), z_o.cols());
    out.d_b = Mat::Zero(z_op.rows(), z_op.cols());
    backprop_cosine(core.g_cross, o_hat, n_o, op_hat, n_op, cos_cross, tau, &out.d_a, &out.d_b);
    backprop_cosine(core.g_aa, o_hat, n_o, o_hat, n_o, cos_oo, tau, &out.d_a, &out.d_a);
    backprop_cosine(core.g_bb, op_hat, n_op, op_hat, n_op, cos_pp, tau, &out.d_b, &out.d_b);
    out.value = core.value;
    if (mean) {
        const double inv = 1.0 / static_cast<double>(z_o.rows());
        out.value *= inv;
        out.d_a *= inv;
        out.d_b *= inv;
    }
    return out;
}

double loss_hand(const Mat& z_oh, const Mat& z_h, const Mat& z_oo, double tau, bool mean) {
    return loss_hand_grad(z_oh, z_h, z_oo, tau, mean).value;
}

Grad3 loss_hand_grad(const Mat& z_oh, const Mat& z_h, const Mat& z_oo, double tau, bool mean) {
    check_batch(z_oh, "loss_hand");
    if (z_oh.rows() != z_h.rows() || z_oh.rows() != z_oo.rows())
        throw std::invalid_argument("loss_hand: row count mismatch (quadruples must align)");
    if (z_oh.cols() != z_h.cols() || z_oh.cols() != z_oo.cols())
        throw std::invalid_argument("loss_hand: embedding dimension mismatch");
    if (!(tau > 0)) throw std::invalid_argument("loss_hand: tau must be > 0");

    Eigen::VectorXd n_oh, n_h, n_oo;
    Mat oh_hat = unit_rows(z_oh, &n_oh, "loss_hand.z_oh");
    Mat h_hat = unit_rows(z_h, &n_h, "loss_hand.z_h");
    Mat oo_hat = unit_rows(z_oo, &n_oo, "loss_hand.z_oo");

    Mat cos_cross = oh_hat * h_hat.transpose();   // s^{oh}
    Mat cos_oo = oo_hat * oo_hat.transpose();     // s^{oo}
    Mat cos_hh = h_hat * h_hat.transpose();       // s^{hh}

    NtXentPair core = ntxent_pair(cos_cross / tau, cos_oo / tau, cos_hh / tau);

    Grad3 out;
    out.d_a = Mat::Zero(z_oh.rows(), z_oh.cols());
    out.d_b = Mat::Zero(z_h.rows(), z_h.cols());
    out.d_c = Mat::Zero(z_oo.rows(), z_oo.cols());
    backprop_cosine(core.g_cross, oh_hat, n_oh, h_hat, n_h, cos_cross, tau, &out.d_a, &out.d_b);
    backprop_cosine(core.g_aa, oo_hat, n_oo, oo_hat, n_oo, cos_oo, tau, &out.d_c, &out.d_c);
    backprop_cosine(core.g_bb, h_hat, n_h, h_hat, n_h, cos_hh, tau, &out.d_b, &out.d_b);
    out.value = core.value;
    if (mean) {
        const double inv = 1.0 / static_cast<double>(z_oh.rows());
        out.value *= inv;
        out.d_a *= inv;
        out.d_b *= inv;
        out.d_c *= inv;
    }
    return out;
}

double loss_joint(const JointBatch& b, const LossConfig& cfg) {
    cfg.validate();
    double v = loss_temporal(b.z_o, b.z_op, cfg.tau, cfg.mean_reduction);
    if (cfg.lambda_h != 0.0)
        v += cfg.lambda_h * loss_hand(b.z_oh, b.z_h, b.z_oo, cfg.tau, cfg.mean_reduction);
    return v;
}

double loss_tcn(const Mat& anchor, const Mat& positive, const Mat& negative, double margin) {
    return loss_tcn_grad(anchor, positive, negative, margin).value;
}

Grad3 loss_tcn_grad(const Mat& anchor, const Mat& positive, const Mat& negative, double margin) {
    check_batch(anchor, "loss_tcn");
    if (anchor.rows() != positive.rows() || anchor.rows() != negative.rows() ||
        anchor.cols() != positive.cols() || anchor.cols() != negative.cols())
        throw std::invalid_argument("loss_tcn: shape mismatch");
    Grad3 out;
    out.d_a = Mat::Zero(anchor.rows(), anchor.cols());
    out.d_b = Mat::Zero(anchor.rows(), anchor.cols());
    out.d_c = Mat::Zero(anchor.rows(), anchor.cols());
    const double inv = 1.0 / static_cast<double>(anchor.rows());
    for (Eigen::Index i = 0; i < anchor.rows(); ++i) {
        Eigen::RowVectorXd ap = anchor.row(i) - positive.row(i);
        Eigen::RowVectorXd an = anchor.row(i) - negative.row(i);
        const double l = ap.squaredNorm() + margin - an.squaredNorm();
        if (l > 0.0) {
            out.value += l * inv;
            out.d_a.row(i) = 2.0 * inv * (ap - an);
            out.d_b.row(i) = -2.0 * inv * ap;
            out.d_c.row(i) = 2.0 * inv * an;
        }
    }
    return out;
}

// ---- batch composition ----

PretrainMode pretrain_mode_from_string(const std::string& s) {
    if (s == "tsc") return PretrainMode::tsc;
    if (s == "tsc_ohc") return PretrainMode::tsc_ohc;
    if (s == "tcn") return PretrainMode::tcn;
    if (s == "simclr") return PretrainMode::simclr;
    if (s == "simclr_tcn") return PretrainMode::simclr_tcn;
    throw std::invalid_argument("unknown pretrain mode: " + s);
}

std::string to_string(PretrainMode m) {
    switch (m) {
        case PretrainMode::tsc: return "tsc";
        case PretrainMode::tsc_ohc: return "tsc_ohc";
        case PretrainMode::tcn: return "tcn";
        case PretrainMode::simclr: return "simclr";
        case PretrainMode::simclr_tcn: return "simclr_tcn";
    }
    throw std::invalid_argument("unknown pretrain mode enum");
}

namespace {

int temporal_window(int track_len) { return track_len / 4; }  // floor(w/4)
int negative_window(int track_len) { return (track_len + 1) / 2; }  // ceil(w/2)

int sample_positive(int i, int w, int win, Rng& rng) {
    const int lo = std::max(0, i - win);
    const int hi = std::min(w - 1, i + win);
    return rng.uniform_int(lo, hi);
}

}  // namespace

std::vector<QuadrupleIndex> sample_batch_indices(const TrackBuildResult& tracks,
                                                 PretrainMode mode, const SampleParams& params,
                                                 Rng& rng) {
    if (params.batch <= 0) throw std::invalid_argument("sample_batch: batch must be > 0");

    std::vector<int> eligible;
    for (size_t ti = 0; ti < tracks.object_tracks.size(); ++ti) {
        const Track& t = tracks.object_tracks[ti];
        const int w = static_cast<int>(t.entries.size());
        if (w < params.min_track_len) continue;
        if (mode == PretrainMode::tsc_ohc && t.linked_entry_count() < params.min_hand_frames)
            continue;
        eligible.push_back(static_cast<int>(ti));
    }
    if (eligible.empty()) {
        std::string why = "no eligible track: need length >= " +
                          std::to_string(params.min_track_len);
        if (mode == PretrainMode::tsc_ohc)
            why += " and >= " + std::to_string(params.min_hand_frames) + " hand-linked entries";
        throw std::runtime_error(why);
    }

    std::vector<QuadrupleIndex> out;
    out.reserve(params.batch);
    int guard = 0;
    while (static_cast<int>(out.size()) < params.batch) {
        if (++guard > params.batch * 200)
            throw std::runtime_error("sample_batch: constraints unsatisfiable for mode " +
                                     to_string(mode));
        const int ti = eligible[rng.uniform_int(static_cast<uint32_t>(eligible.size()))];
        const Track& t = tracks.object_tracks[ti];
        const int w = static_cast<int>(t.entries.size());

        QuadrupleIndex q;
        q.anchor.track = ti;

        switch (mode) {
            case PretrainMode::simclr: {
                q.anchor.entry = rng.uniform_int(0, w - 1);
                q.positive = q.anchor;
                break;
            }
            case PretrainMode::tsc:
            case PretrainMode::simclr_tcn: {
                q.anchor.entry = rng.uniform_int(0, w - 1);
                q.positive.track = ti;
                q.positive.entry = sample_positive(q.anchor.entry, w, temporal_window(w), rng);
                break;
            }
            case PretrainMode::tcn: {
                q.anchor.entry = rng.uniform_int(0, w - 1);
                q.positive.track = ti;
                q.positive.entry = sample_positive(q.anchor.entry, w, temporal_window(w), rng);
                const int nwin = negative_window(w);
                std::vector<int> cand;
                for (int n = 0; n < w; ++n)
                    if (std::abs(n - q.anchor.entry) >= nwin &&
                        std::abs(n - q.positive.entry) >= nwin)
                        cand.push_back(n);
                if (cand.empty()) continue;  // resample; anchors near the middle can be stuck
                q.negative.track = ti;
                q.negative.entry = cand[rng.uniform_int(static_cast<uint32_t>(cand.size()))];
                break;
            }
            case PretrainMode::tsc_ohc: {
                std::vector<int> linked;
                for (size_t e = 0; e < t.hand_links.size(); ++e)
                    if (t.hand_links[e]) linked.push_back(static_cast<int>(e));
                if (static_cast<int>(linked.size()) < params.min_hand_frames) continue;
                q.anchor.entry = linked[rng.uniform_int(static_cast<uint32_t>(linked.size()))];
                q.positive.track = ti;
                q.positive.entry = sample_positive(q.anchor.entry, w, temporal_window(w), rng);

                const HandLink& link = *t.hand_links[q.anchor.entry];
                const Track& ht = tracks.hand_tracks[link.hand_track];
                const double t_obj = t.entries[q.anchor.entry].timestamp_s;
                std::vector<int> ks;
                for (size_t e = 0; e < ht.entries.size(); ++e)
                    if (std::abs(ht.entries[e].timestamp_s - t_obj) <= params.hand_window_s)
                        ks.push_back(static_cast<int>(e));
                if (ks.empty()) continue;
                q.hand_track = link.hand_track;
                q.hand_entry = ks[rng.uniform_int(static_cast<uint32_t>(ks.size()))];
                break;
            }
        }
        out.push_back(q);
    }
    return out;
}

}  // namespace hoi
