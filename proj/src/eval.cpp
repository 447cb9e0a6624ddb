#include "hoi/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hoi {

namespace {

struct Ranked {
    std::vector<size_t> order;  // score-descending
    size_t positives = 0;
};

Ranked rank_scores(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("average_precision: size mismatch");
    if (scores.empty()) throw std::invalid_argument("average_precision: empty input");
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("average_precision: non-finite score");
    Ranked r;
    for (uint8_t l : labels) r.positives += l ? 1 : 0;
    if (r.positives == 0) throw std::invalid_argument("average_precision: no positive labels");
    r.order.resize(scores.size());
    std::iota(r.order.begin(), r.order.end(), size_t{0});
    std::stable_sort(r.order.begin(), r.order.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });
    return r;
}

}  // namespace

double average_precision(const std::vector<double>& scores,
                         const std::vector<uint8_t>& labels) {
    Ranked r = rank_scores(scores, labels);
    // Walk tie blocks; precision is evaluated at the end of each block. The
    // (block/positives)*(tp/seen) factoring makes the constant-predictor case
    // collapse to exactly positives/n.
    double ap = 0.0;
    size_t tp = 0, seen = 0, i = 0;
    const size_t n = r.order.size();
    while (i < n) {
        size_t j = i;
        size_t block_pos = 0;
        while (j < n && scores[r.order[j]] == scores[r.order[i]]) {
            block_pos += labels[r.order[j]] ? 1 : 0;
            ++j;
        }
        tp += block_pos;
        seen += j - i;
        if (block_pos > 0)
            ap += (static_cast<double>(block_pos) / static_cast<double>(r.positives)) *
                  (static_cast<double>(tp) / static_cast<double>(seen));
        i = j;
    }
    return ap;
}

std::vector<std::pair<double, double>> pr_curve(const std::vector<double>& scores,
                                                const std::vector<uint8_t>& labels) {
    Ranked r = rank_scores(scores, labels);
    std::vector<std::pair<double, double>> pts;  // (recall, precision)
    size_t tp = 0, seen = 0, i = 0;
    const size_t n = r.order.size();
    while (i < n) {
        size_t j = i;
        size_t block_pos = 0;
        while (j < n && scores[r.order[j]] == scores[r.order[i]]) {
            block_pos += labels[r.order[j]] ? 1 : 0;
            ++j;
        }
        tp += block_pos;
        seen += j - i;
        pts.emplace_back(static_cast<double>(tp) / static_cast<double>(r.positives),
                         static_cast<double>(tp) / static_cast<double>(seen));
        i = j;
    }
    return pts;
}

ProbeResult linear_probe(const Eigen::MatrixXd& features,
                         const std::vector<std::vector<uint8_t>>& labels,
                         const std::vector<uint8_t>& is_test, double l2) {
    const Eigen::Index n = features.rows();
    const Eigen::Index d = features.cols();
    if (static_cast<Eigen::Index>(labels.size()) != n ||
        static_cast<Eigen::Index>(is_test.size()) != n)
        throw std::invalid_argument("linear_probe: row count mismatch");
    if (n == 0 || labels[0].empty()) throw std::invalid_argument("linear_probe: empty input");
    const size_t n_states = labels[0].size();

    std::vector<Eigen::Index> train_rows, test_rows;
    for (Eigen::Index i = 0; i < n; ++i)
        (is_test[i] ? test_rows : train_rows).push_back(i);
    if (train_rows.empty() || test_rows.empty())
        throw std::invalid_argument("linear_probe: both splits must be nonempty");

    // standardize with train statistics; constant columns get unit scale
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(d);
    for (Eigen::Index i : train_rows) mean += features.row(i);
    mean /= static_cast<double>(train_rows.size());
    Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(d);
    for (Eigen::Index i : train_rows) {
        Eigen::RowVectorXd c = features.row(i) - mean;
        var += c.cwiseProduct(c);
    }
    var /= static_cast<double>(train_rows.size());
    Eigen::RowVectorXd scale = (var.array() + 1e-12).sqrt().inverse();

    auto design = [&](const std::vector<Eigen::Index>& rows) {
        Eigen::MatrixXd x(rows.size(), d + 1);
        for (size_t r = 0; r < rows.size(); ++r) {
            x.row(r).head(d) = (features.row(rows[r]) - mean).cwiseProduct(scale);
            x(r, d) = 1.0;
        }
        return x;
    };
    Eigen::MatrixXd x_train = design(train_rows);
    Eigen::MatrixXd x_test = design(test_rows);

    ProbeResult out;
    out.per_state_ap.assign(n_states, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> valid_aps;
    for (size_t s = 0; s < n_states; ++s) {
        Eigen::VectorXd y(train_rows.size());
        size_t train_pos = 0, test_pos = 0;
        for (size_t r = 0; r < train_rows.size(); ++r) {
            y(r) = labels[train_rows[r]][s] ? 1.0 : 0.0;
            train_pos += labels[train_rows[r]][s] ? 1 : 0;
        }
        for (Eigen::Index i : test_rows) test_pos += labels[i][s] ? 1 : 0;
        if (train_pos == 0 || test_pos == 0) {
            out.excluded_states.push_back(static_cast<int>(s));
            continue;
        }

        Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
        for (int iter = 0; iter < 40; ++iter) {
            Eigen::VectorXd z = x_train * w;
            Eigen::VectorXd p = (1.0 + (-z.array()).exp()).inverse();
            Eigen::VectorXd g = x_train.transpose() * (p - y) + l2 * w;
            if (g.norm() < 1e-9) break;
            Eigen::VectorXd r_diag = (p.array() * (1.0 - p.array())).max(1e-10);
            Eigen::MatrixXd h = x_train.transpose() * r_diag.asDiagonal() * x_train;
            h.diagonal().array() += l2;
            Eigen::VectorXd step = h.ldlt().solve(g);
            w -= step;
            if (step.norm() < 1e-10) break;
        }

        Eigen::VectorXd margin = x_test * w;
        std::vector<double> sc(margin.data(), margin.data() + margin.size());
        std::vector<uint8_t> lb(test_rows.size());
        for (size_t r = 0; r < test_rows.size(); ++r) lb[r] = labels[test_rows[r]][s];
        out.per_state_ap[s] = average_precision(sc, lb);
        valid_aps.push_back(out.per_state_ap[s]);
    }
    if (valid_aps.empty()) throw std::runtime_error("linear_probe: no scorable states");
    out.map = std::accumulate(valid_aps.begin(), valid_aps.end(), 0.0) /
              static_cast<double>(valid_aps.size());
    return out;
}

// 1D squared distance transform (Felzenszwalb & Huttenlocher lower envelope).
namespace {

void dt_1d(const std::vector<double>& f, std::vector<double>& out) {
    const int n = static_cast<int>(f.size());
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = q - v[k];
        out[q] = dq * dq + f[v[k]];
    }
}

}  // namespace

std::vector<double> squared_distance_transform(const std::vector<uint8_t>& set_mask, int h,
                                               int w) {
    if (static_cast<int>(set_mask.size()) != h * w)
        throw std::invalid_argument("distance_transform: size mismatch");
    const double inf = 1e18;
    std::vector<double> d(set_mask.size());
    for (size_t i = 0; i < set_mask.size(); ++i) d[i] = set_mask[i] ? 0.0 : inf;

    std::vector<double> col(h), out_col(h);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) col[y] = d[static_cast<size_t>(y) * w + x];
        dt_1d(col, out_col);
        for (int y = 0; y < h; ++y) d[static_cast<size_t>(y) * w + x] = out_col[y];
    }
    std::vector<double> row(w), out_row(w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) row[x] = d[static_cast<size_t>(y) * w + x];
        dt_1d(row, out_row);
        for (int x = 0; x < w; ++x) d[static_cast<size_t>(y) * w + x] = out_row[x];
    }
    return d;
}

RoiApResult roi_ap_detailed(const Image& heatmap, const Image& gt_mask, double slack_px) {
    if (heatmap.w != gt_mask.w || heatmap.h != gt_mask.h || heatmap.c != 1 || gt_mask.c != 1)
        throw std::invalid_argument("roi_ap: heatmap and mask must be single-channel, same size");
    if (slack_px < 0) throw std::invalid_argument("roi_ap: slack must be >= 0");
    const int w = gt_mask.w, h = gt_mask.h;

    size_t n_pos = 0;
    for (float v : gt_mask.data) n_pos += v >= 0.5f ? 1 : 0;
    if (n_pos == 0) throw std::invalid_argument("roi_ap: ground truth has no positive pixels");

    std::vector<uint8_t> excluded(static_cast<size_t>(w) * h, 0);
    if (slack_px > 0) {
        // boundary: positive pixels with an in-image 4-neighbor negative
        std::vector<uint8_t> boundary(static_cast<size_t>(w) * h, 0);
        bool any = false;
        auto pos_at = [&](int y, int x) { return gt_mask.at(0, y, x) >= 0.5f; };
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (!pos_at(y, x)) continue;
                const bool edge = (x > 0 && !pos_at(y, x - 1)) ||
                                  (x + 1 < w && !pos_at(y, x + 1)) ||
                                  (y > 0 && !pos_at(y - 1, x)) ||
                                  (y + 1 < h && !pos_at(y + 1, x));
                if (edge) {
                    boundary[static_cast<size_t>(y) * w + x] = 1;
                    any = true;
                }
            }
        if (any) {
            std::vector<double> d2 = squared_distance_transform(boundary, h, w);
            const double lim = slack_px * slack_px;
            for (size_t i = 0; i < excluded.size(); ++i)
                if (d2[i] <= lim) excluded[i] = 1;
        }
    }

    std::vector<double> scores;
    std::vector<uint8_t> labels;
    scores.reserve(static_cast<size_t>(w) * h);
    RoiApResult out;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (excluded[static_cast<size_t>(y) * w + x]) {
                ++out.excluded;
                continue;
            }
            scores.push_back(heatmap.at(0, y, x));
            labels.push_back(gt_mask.at(0, y, x) >= 0.5f ? 1 : 0);
        }
    out.evaluated = scores.size();
    out.ap = average_precision(scores, labels);
    return out;
}

double roi_ap(const Image& heatmap, const Image& gt_mask, double slack_px) {
    return roi_ap_detailed(heatmap, gt_mask, slack_px).ap;
}

std::vector<double> gao_scores(const std::vector<Image>& grasp_heatmaps,
                               const Image& object_mask) {
    if (object_mask.c != 1) throw std::invalid_argument("gao_scores: mask must be 1-channel");
    size_t count = 0;
    for (float v : object_mask.data) count += v >= 0.5f ? 1 : 0;
    if (count == 0) throw std::invalid_argument("gao_scores: empty object mask");
    std::vector<double> out;
    out.reserve(grasp_heatmaps.size());
    for (const auto& hm : grasp_heatmaps) {
        if (hm.w != object_mask.w || hm.h != object_mask.h || hm.c != 1)
            throw std::invalid_argument("gao_scores: heatmap/mask shape mismatch");
        double acc = 0.0;
        for (size_t i = 0; i < hm.data.size(); ++i)
            if (object_mask.data[i] >= 0.5f) acc += hm.data[i];
        out.push_back(acc / static_cast<double>(count));
    }
    return out;
}

GaoResult gao_map(const std::vector<GaoExample>& objects) {
    if (objects.empty()) throw std::invalid_argument("gao_map: no objects");
    const size_t g = objects[0].scores.size();
    for (const auto& o : objects)
        if (o.scores.size() != g || o.labels.size() != g)
            throw std::invalid_argument("gao_map: inconsistent grasp counts");

    GaoResult out;
    out.per_grasp_ap.assign(g, std::numeric_limits<double>::quiet_NaN());
    out.per_grasp_chance.assign(g, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> aps, chances;
    for (size_t c = 0; c < g; ++c) {
        std::vector<double> sc;
        std::vector<uint8_t> lb;
        size_t pos = 0;
        for (const auto& o : objects) {
            sc.push_back(o.scores[c]);
            lb.push_back(o.labels[c]);
            pos += o.labels[c] ? 1 : 0;
        }
        if (pos == 0) continue;  // grasp absent from the eval set
        out.grasps_present.push_back(static_cast<int>(c));
        out.per_grasp_ap[c] = average_precision(sc, lb);
        out.per_grasp_chance[c] = static_cast<double>(pos) / static_cast<double>(objects.size());
        aps.push_back(out.per_grasp_ap[c]);
        chances.push_back(out.per_grasp_chance[c]);
    }
    if (aps.empty()) throw std::runtime_error("gao_map: no grasp present in the eval set");
    out.map = std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
    out.chance =
        std::accumulate(chances.begin(), chances.end(), 0.0) / static_cast<double>(chances.size());
    return out;
}

}  // namespace hoi
