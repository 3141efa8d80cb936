#pragma once

/**
 * Order-two operators: a first-order (derivation) part given on generators
 * plus a pure second-order symbol on generator pairs.
 *
 * A stored symbol entry (a <= b by rank, value s) acts as s * d_a d_b for
 * a < b and as s * (1/2) d_a d_a on the diagonal, with d the graded left
 * partial derivative. The failure of the operator to be a derivation,
 *   {p, q} = D(pq) - D(p) q - (-1)^{|D||p|} p D(q),
 * depends only on the symbol and is the bracket this operator generates.
 */

#include <map>
#include <utility>

#include "derivation.hpp"

namespace linfty {

class SecondOrder {
public:
    SecondOrder() = default;
    SecondOrder(CtxPtr ctx, int degree, int W = kDefaultTruncationWeight)
        : ctx_(std::move(ctx)), degree_(degree), W_(W) {}

    const CtxPtr& ctx() const { return ctx_; }
    int degree() const { return degree_; }
    int truncation_weight() const { return W_; }
    const std::map<int, Poly>& first_order() const { return first_; }
    const std::map<std::pair<int, int>, Poly>& symbol() const { return symbol_; }

    void set_first(int gen_id, Poly value) {
        require_same_ctx(ctx_, value.ctx());
        const int want = ctx_->gen(gen_id).degree + degree_;
        if (!value.is_homogeneous(want))
            throw StructureError("first-order value on '" + ctx_->gen(gen_id).name +
                                 "' not homogeneous of degree " + std::to_string(want));
        if (value.is_zero()) first_.erase(gen_id);
        else first_.insert_or_assign(gen_id, std::move(value));
    }

    /* Symbol entry by generator ids; stored keyed by ascending rank. */
    void set_symbol(int gen_a, int gen_b, Poly value) {
        require_same_ctx(ctx_, value.ctx());
        int ra = ctx_->rank(gen_a), rb = ctx_->rank(gen_b);
        if (ra > rb)
            throw ArgumentError("symbol entries are stored on rank-sorted pairs; pass (a,b) with "
                                "rank(a) <= rank(b)");
        const int want = ctx_->gen(gen_a).degree + ctx_->gen(gen_b).degree + degree_;
        if (!value.is_homogeneous(want))
            throw StructureError("symbol value not homogeneous of degree " + std::to_string(want));
        auto key = std::make_pair(ra, rb);
        if (value.is_zero()) symbol_.erase(key);
        else symbol_.insert_or_assign(key, std::move(value));
    }

    Poly apply(const Poly& p) const {
        require_same_ctx(ctx_, p.ctx());
        Poly r(ctx_, std::min(W_, p.truncation_weight()), p.hbar_min(), p.hbar_max());
        if (!first_.empty()) {
            Derivation d(ctx_, degree_, W_);
            for (const auto& [id, v] : first_) d.set_value(id, v);
            r += d.apply(p);
        }
        for (const auto& [key, s] : symbol_) {
            const int ida = ctx_->id_of_rank(key.first);
            const int idb = ctx_->id_of_rank(key.second);
            Poly dd = p.derivative(idb).derivative(ida);
            if (key.first == key.second) dd.scale(Coefficient(Rational(1, 2)));
            r += s * dd;
        }
        return r;
    }

    /* Bracket generated by the symbol, in the odd-bracket normalization
       {p, q} = -(-1)^{|p|} (D(pq) - D(p)q - (-1)^{|p||D|} p D(q)).
       Mixed-parity p is split, since the signs depend on the parity of p. */
    Poly bracket(const Poly& p, const Poly& q) const {
        const bool dodd = degree_ % 2 != 0;
        Poly res(ctx_, std::min(W_, p.truncation_weight()), p.hbar_min(), p.hbar_max());
        for (bool podd : {false, true}) {
            Poly pp = p.parity_part(podd);
            if (pp.is_zero()) continue;
            Poly pq = apply(pp * q) - apply(pp) * q;
            Poly t = pp * apply(q);
            if (dodd && podd) pq += t;
            else pq -= t;
            if (!podd) pq = -pq;
            res += pq;
        }
        return res;
    }

    /* Second-order test: the triple failure
       D(abc) - sum of Leibniz corrections vanishes iff order <= 2.
       Implemented as: bracket(a, -) is itself a derivation in the second slot:
       {a, bc} - {a,b} c - (-1)^{(|D|+|a|)|b|} b {a,c} = 0. */
    Poly order_two_defect(const Poly& a, const Poly& b, const Poly& c) const {
        auto da = a.homogeneous_degree();
        auto db = b.homogeneous_degree();
        int sa = da ? *da : 0, sb = db ? *db : 0;
        Poly lhs = bracket(a, b * c) - bracket(a, b) * c;
        Poly t = b * bracket(a, c);
        if (((degree_ + sa) % 2 != 0) && (sb % 2 != 0)) lhs += t;
        else lhs -= t;
        return lhs;
    }

    SecondOrder& operator+=(const SecondOrder& o) {
        require_same_ctx(ctx_, o.ctx_);
        if (degree_ != o.degree_) throw ArgumentError("adding operators of unequal degree");
        for (const auto& [id, v] : o.first_) {
            Poly nv = value_first(id) + v;
            if (nv.is_zero()) first_.erase(id);
            else first_.insert_or_assign(id, std::move(nv));
        }
        for (const auto& [key, v] : o.symbol_) {
            auto it = symbol_.find(key);
            Poly nv = (it == symbol_.end()) ? v : it->second + v;
            if (nv.is_zero()) symbol_.erase(key);
            else symbol_.insert_or_assign(key, std::move(nv));
        }
        return *this;
    }

    Poly value_first(int gen_id) const {
        auto it = first_.find(gen_id);
        if (it != first_.end()) return it->second;
        return Poly(ctx_, W_);
    }

    /* C*-weight homogeneity: applying to a monomial of cx-weight w must yield
       cx-weight w + k terms only. Returns false on the first violation. */
    bool cx_weight_homogeneous(int k, int scan_weight) const {
        std::vector<Monomial> basis;
        enumerate_monomials(ctx_, scan_weight, basis);
        for (const Monomial& m : basis) {
            Poly p(ctx_, W_);
            p.add_monomial(m, Coefficient(1));
            Poly im = apply(p);
            const int want = m.cx_weight(*ctx_) + k;
            for (const auto& [n, c] : im.terms())
                if (n.cx_weight(*ctx_) != want) return false;
        }
        return true;
    }

private:
    CtxPtr ctx_;
    int degree_ = 0;
    int W_ = kDefaultTruncationWeight;
    std::map<int, Poly> first_;
    std::map<std::pair<int, int>, Poly> symbol_;
};

}  // namespace linfty
