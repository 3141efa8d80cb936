#pragma once

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "linf.hpp"
#include "matrix.hpp"

namespace linfty {

/******** Graded monomial basis ********/

struct GradedBasis {
    std::vector<Monomial> monomials;
    std::map<int, std::vector<int>> by_degree;  // degree -> indices
    std::map<Monomial, int> position;

    int dim(int degree) const {
        auto it = by_degree.find(degree);
        return it == by_degree.end() ? 0 : static_cast<int>(it->second.size());
    }
};

inline GradedBasis graded_basis(const CtxPtr& ctx, int W, int hbar_cap = 0, int u_cap = 0,
                                int hbar_min = 0) {
    GradedBasis b;
    enumerate_monomials(ctx, W, b.monomials, hbar_cap, u_cap, hbar_min);
    for (size_t i = 0; i < b.monomials.size(); ++i) {
        b.by_degree[b.monomials[i].degree(*ctx)].push_back(static_cast<int>(i));
        b.position.emplace(b.monomials[i], static_cast<int>(i));
    }
    return b;
}

/******** Block complex ********/

/**
 * A homogeneous operator acting on the weight-truncated monomial basis,
 * presented degreewise as sparse blocks. The truncation is compatible with
 * the grading, so cohomology of the truncated complex is computed block by
 * block: betti_d = n_d - rank(block_d) - rank(block_{d - op_degree}).
 */
class BlockComplex {
public:
    BlockComplex(CtxPtr ctx, GradedBasis basis, std::function<Poly(const Poly&)> op,
                 int op_degree, bool check_square = true)
        : ctx_(std::move(ctx)), basis_(std::move(basis)), op_(std::move(op)),
          op_degree_(op_degree), check_square_(check_square) {}

    const GradedBasis& basis() const { return basis_; }

    Poly monomial_poly(int idx, int W, int hmin = 0, int hmax = kNoHbarCap) const {
        Poly p(ctx_, W, hmin, hmax);
        p.add_monomial(basis_.monomials[idx], Coefficient(1));
        return p;
    }

    /* Equations-by-target block: rows indexed by degree d+op_degree basis,
       columns by degree d basis; entry = coefficient of row monomial in
       op(column monomial). */
    SparseMatrix block(int d, int W, int hmin = 0, int hmax = kNoHbarCap) const {
        auto st = basis_.by_degree.find(d);
        SparseMatrix m;
        m.cols = basis_.dim(d);
        if (st == basis_.by_degree.end()) return m;
        auto tt = basis_.by_degree.find(d + op_degree_);
        std::map<int, int> tpos;  // global index -> row
        if (tt != basis_.by_degree.end())
            for (size_t r = 0; r < tt->second.size(); ++r)
                tpos.emplace(tt->second[r], static_cast<int>(r));
        m.rows.resize(tpos.size());
        for (size_t c = 0; c < st->second.size(); ++c) {
            Poly img = op_(monomial_poly(st->second[c], W, hmin, hmax));
            if (check_square_) {
                Poly sq = op_(img);
                if (!sq.is_zero())
                    throw StructureError("operator does not square to zero on the truncated block");
            }
            for (const auto& [mono, coef] : img.terms()) {
                auto it = basis_.position.find(mono);
                if (it == basis_.position.end())
                    throw StructureError("operator leaves the enumerated basis");
                if (coef.twoPiI != 0)
                    throw StructureError("operator produces scale-carrying coefficients");
                auto rp = tpos.find(it->second);
                if (rp == tpos.end())
                    throw StructureError("operator is not homogeneous of the declared degree");
                m.add(rp->second, static_cast<int>(c), coef.rational);
            }
        }
        return m;
    }

    std::map<int, int> betti(int lo, int hi, int W, int hmin = 0, int hmax = kNoHbarCap) const {
        std::map<int, int> rk;
        for (const auto& [d, v] : basis_.by_degree)
            rk[d] = rank(block(d, W, hmin, hmax));
        std::map<int, int> out;
        for (int d = lo; d <= hi; ++d) {
            const int n = basis_.dim(d);
            if (n == 0) continue;
            int r_out = rk.count(d) ? rk[d] : 0;
            int r_in = rk.count(d - op_degree_) ? rk[d - op_degree_] : 0;
            const int b = n - r_out - r_in;
            if (b != 0) out[d] = b;
        }
        return out;
    }

    /* Solve op(x) = target inside the graded blocks; x = 0 on empty target. */
    std::optional<Poly> solve_preimage(const Poly& target, int W, int hmin = 0,
                                       int hmax = kNoHbarCap) const {
        if (target.is_zero()) return Poly(ctx_, W, hmin, hmax);
        auto td = target.homogeneous_degree();
        const int d = *td - op_degree_;
        auto st = basis_.by_degree.find(d);
        if (st == basis_.by_degree.end()) return std::nullopt;
        auto tt = basis_.by_degree.find(*td);
        std::map<int, int> tpos;
        if (tt != basis_.by_degree.end())
            for (size_t r = 0; r < tt->second.size(); ++r)
                tpos.emplace(tt->second[r], static_cast<int>(r));
        SparseMatrix A = block(d, W, hmin, hmax);
        std::vector<Rational> b(tpos.size(), Rational(0));
        for (const auto& [mono, coef] : target.terms()) {
            auto it = basis_.position.find(mono);
            if (it == basis_.position.end()) return std::nullopt;
            auto rp = tpos.find(it->second);
            if (rp == tpos.end()) return std::nullopt;
            b[rp->second] = coef.rational;
        }
        auto x = solve(A, b);
        if (!x) return std::nullopt;
        Poly r(ctx_, W, hmin, hmax);
        for (size_t c = 0; c < x->size(); ++c)
            if ((*x)[c] != 0)
                r.add_monomial(basis_.monomials[st->second[c]], Coefficient((*x)[c]));
        return r;
    }

private:
    CtxPtr ctx_;
    GradedBasis basis_;
    std::function<Poly(const Poly&)> op_;
    int op_degree_;
    bool check_square_;
};

/******** Chevalley-Eilenberg cohomology ********/

/**
 * Betti numbers of the weight-truncated Chevalley-Eilenberg complex in the
 * given degree window. Truncation by weight is exact degreewise because the
 * differential preserves weight filtration, so each block is an honest
 * complex; the square-zero check guards structures that fail this.
 */
inline std::map<int, int> ce_cohomology(const CurvedLInfinity& g, int W, int lo, int hi) {
    CEComplex ce = ce_differential(g, W);
    BlockComplex bc(ce.ctx, graded_basis(ce.ctx, W),
                    [&ce](const Poly& p) { return ce.d.apply(p); }, 1);
    return bc.betti(lo, hi, W);
}

}  // namespace linfty
