#include "hoi/assignment.hpp"

#include <algorithm>
#include <stdexcept>

namespace hoi {

namespace {

struct Search {
    const std::vector<std::vector<double>>* score = nullptr;
    double min_admissible = 0.0;
    int rows = 0;
    int cols = 0;
    std::vector<char> col_used;
    std::vector<int> chosen;        // chosen[r] = col or -1
    std::vector<double> row_best;   // max admissible score per row (bound)
    std::vector<double> suffix_bound;

    std::vector<int> best_chosen;
    double best_total = 0.0;
    bool have_best = false;

    bool admissible(int r, int c) const { return (*score)[r][c] > min_admissible; }

    // DFS visits candidate assignments in lexicographic pair-list order: for each
    // row ascending, matched columns ascending first, then the skip option. The
    // first solution found at any given total is therefore the lex-smallest one,
    // so ties never replace an earlier best.
    void dfs(int r, double acc) {
        if (have_best && acc + suffix_bound[r] <= best_total) return;
        if (r == rows) {
            if (!have_best || acc > best_total) {
                best_total = acc;
                best_chosen = chosen;
                have_best = true;
            }
            return;
        }
        for (int c = 0; c < cols; ++c) {
            if (col_used[c] || !admissible(r, c)) continue;
            col_used[c] = 1;
            chosen[r] = c;
            dfs(r + 1, acc + (*score)[r][c]);
            chosen[r] = -1;
            col_used[c] = 0;
        }
        dfs(r + 1, acc);  // leave row r unmatched
    }
};

}  // namespace

Assignment max_score_assignment(const std::vector<std::vector<double>>& score,
                                double min_admissible) {
    Assignment out;
    const int rows = static_cast<int>(score.size());
    const int cols = rows == 0 ? 0 : static_cast<int>(score[0].size());
    for (const auto& row : score)
        if (static_cast<int>(row.size()) != cols)
            throw std::invalid_argument("assignment: ragged score matrix");

    if (rows == 0 || cols == 0) {
        for (int r = 0; r < rows; ++r) out.unmatched_rows.push_back(r);
        for (int c = 0; c < cols; ++c) out.unmatched_cols.push_back(c);
        return out;
    }

    Search s;
    s.score = &score;
    s.min_admissible = min_admissible;
    s.rows = rows;
    s.cols = cols;
    s.col_used.assign(cols, 0);
    s.chosen.assign(rows, -1);
    s.row_best.assign(rows, 0.0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (s.admissible(r, c)) s.row_best[r] = std::max(s.row_best[r], score[r][c]);
    s.suffix_bound.assign(rows + 1, 0.0);
    for (int r = rows - 1; r >= 0; --r) s.suffix_bound[r] = s.suffix_bound[r + 1] + s.row_best[r];

    s.dfs(0, 0.0);

    std::vector<char> col_matched(cols, 0);
    for (int r = 0; r < rows; ++r) {
        int c = s.best_chosen[r];
        if (c >= 0) {
            out.pairs.emplace_back(r, c);
            out.total += score[r][c];
            col_matched[c] = 1;
        } else {
            out.unmatched_rows.push_back(r);
        }
    }
    for (int c = 0; c < cols; ++c)
        if (!col_matched[c]) out.unmatched_cols.push_back(c);
    return out;
}

}  // namespace hoi
