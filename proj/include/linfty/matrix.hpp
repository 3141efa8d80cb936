#pragma once

/**
 * Exact sparse linear algebra over the rationals: rank, kernel, and linear
 * solve by fraction-reduced Gaussian elimination. Deterministic pivoting.
 */

#include <map>
#include <vector>

#include "core.hpp"

namespace linfty {

/* Rows are sparse maps column -> value. */
struct SparseMatrix {
    int cols = 0;
    std::vector<std::map<int, Rational>> rows;

    void add(int r, int c, const Rational& v) {
        if (v == 0) return;
        if (r >= static_cast<int>(rows.size())) rows.resize(r + 1);
        auto& row = rows[r];
        auto it = row.find(c);
        if (it == row.end()) row.emplace(c, v);
        else {
            it->second += v;
            if (it->second == 0) row.erase(it);
        }
        if (c >= cols) cols = c + 1;
    }
    int nrows() const { return static_cast<int>(rows.size()); }
};

/**
 * Row echelon elimination. Returns rank; if `rhs` is non-null it is reduced
 * alongside (for solving). Operates on a copy-by-value basis: callers pass
 * the matrix by value when they need to keep the original.
 */
inline int eliminate(std::vector<std::map<int, Rational>>& rows,
                     std::vector<Rational>* rhs = nullptr) {
    int rank = 0;
    const int nr = static_cast<int>(rows.size());
    std::vector<char> used(nr, 0);
    // collect all columns present
    std::map<int, char> colset;
    for (auto& row : rows)
        for (auto& [c, v] : row) colset[c] = 1;
    for (auto& [col, unused_] : colset) {
        // pick the unused row with an entry at `col` having fewest nonzeros
        int pick = -1;
        size_t best = 0;
        for (int r = 0; r < nr; ++r) {
            if (used[r]) continue;
            auto it = rows[r].find(col);
            if (it == rows[r].end()) continue;
            if (pick < 0 || rows[r].size() < best) { pick = r; best = rows[r].size(); }
        }
        if (pick < 0) continue;
        used[pick] = 1;
        ++rank;
        const Rational pv = rows[pick][col];
        for (int r = 0; r < nr; ++r) {
            if (r == pick) continue;
            auto it = rows[r].find(col);
            if (it == rows[r].end()) continue;
            const Rational factor = it->second / pv;
            for (auto& [c, v] : rows[pick]) {
                auto jt = rows[r].find(c);
                if (jt == rows[r].end()) {
                    rows[r].emplace(c, -factor * v);
                } else {
                    jt->second -= factor * v;
                    if (jt->second == 0) rows[r].erase(jt);
                }
            }
            if (rhs) (*rhs)[r] -= factor * (*rhs)[pick];
        }
    }
    return rank;
}

inline int rank(SparseMatrix m) { return eliminate(m.rows); }

/**
 * Solve A x = b (columns of A indexed 0..cols-1). Returns one solution if
 * consistent, nullopt otherwise.
 */
inline std::optional<std::vector<Rational>> solve(const SparseMatrix& A,
                                                  const std::vector<Rational>& b) {
    // augment: column `cols` holds b
    auto rows = A.rows;
    rows.resize(std::max<size_t>(rows.size(), b.size()));
    const int bcol = A.cols;
    for (size_t r = 0; r < b.size(); ++r)
        if (b[r] != 0) rows[r][bcol] = b[r];
    // eliminate only on the A-columns
    const int nr = static_cast<int>(rows.size());
    std::vector<int> pivot_row_of_col(A.cols, -1);
    std::vector<char> used(nr, 0);
    for (int col = 0; col < A.cols; ++col) {
        int pick = -1;
        size_t best = 0;
        for (int r = 0; r < nr; ++r) {
            if (used[r]) continue;
            auto it = rows[r].find(col);
            if (it == rows[r].end()) continue;
            if (pick < 0 || rows[r].size() < best) { pick = r; best = rows[r].size(); }
        }
        if (pick < 0) continue;
        used[pick] = 1;
        pivot_row_of_col[col] = pick;
        const Rational pv = rows[pick][col];
        for (int r = 0; r < nr; ++r) {
            if (r == pick) continue;
            auto it = rows[r].find(col);
            if (it == rows[r].end()) continue;
            const Rational factor = it->second / pv;
            for (auto& [c, v] : rows[pick]) {
                auto jt = rows[r].find(c);
                if (jt == rows[r].end()) rows[r].emplace(c, -factor * v);
                else {
                    jt->second -= factor * v;
                    if (jt->second == 0) rows[r].erase(jt);
                }
            }
        }
    }
    // inconsistency: a row with only the b-column nonzero
    for (int r = 0; r < nr; ++r) {
        if (used[r]) continue;
        if (rows[r].size() == 1 && rows[r].count(bcol)) return std::nullopt;
        if (!rows[r].empty() && rows[r].size() != 0) {
            // rows not used as pivots must be entirely zero on A-columns
            bool only_b = true;
            for (auto& [c, v] : rows[r])
                if (c != bcol) { only_b = false; break; }
            if (only_b && !rows[r].empty()) return std::nullopt;
        }
    }
    std::vector<Rational> x(A.cols, Rational(0));
    for (int col = 0; col < A.cols; ++col) {
        int pr = pivot_row_of_col[col];
        if (pr < 0) continue;
        auto itb = rows[pr].find(bcol);
        if (itb == rows[pr].end()) continue;
        x[col] = itb->second / rows[pr][col];
    }
    return x;
}

}  // namespace linfty
