#pragma once

#include <utility>
#include <vector>

namespace hoi {

struct Assignment {
    std::vector<std::pair<int, int>> pairs;  // (row, col), sorted by row
    double total = 0.0;
    std::vector<int> unmatched_rows;
    std::vector<int> unmatched_cols;
};

// Exact maximum-total-score bipartite assignment over admissible pairs
// (score[r][c] > min_admissible). Rows and columns may stay unmatched at zero
// contribution. Ties on total are broken toward the lexicographically smallest
// pair list, comparing (row, col) pairs in row order.
//
// Solved by depth-first branch and bound over rows; admissible graphs here are
// sparse (IoU-gated detections), so this stays cheap at tracker scales.
Assignment max_score_assignment(const std::vector<std::vector<double>>& score,
                                double min_admissible);

}  // namespace hoi
