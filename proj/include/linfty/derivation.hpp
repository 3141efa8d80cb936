#pragma once

/**
 * Derivations of a polynomial context, given by their values on generators
 * and extended by the signed Leibniz rule
 *   D(pq) = D(p) q + (-1)^{|D||p|} p D(q).
 */

#include <map>

#include "poly.hpp"

namespace linfty {

class Derivation {
public:
    Derivation() = default;
    Derivation(CtxPtr ctx, int degree, int W = kDefaultTruncationWeight)
        : ctx_(std::move(ctx)), degree_(degree), W_(W) {}

    const CtxPtr& ctx() const { return ctx_; }
    int degree() const { return degree_; }
    int truncation_weight() const { return W_; }
    const std::map<int, Poly>& values() const { return vals_; }

    /* Set D(generator id) = value; value degree must be |gen| + |D| on all terms. */
    void set_value(int gen_id, Poly value) {
        require_same_ctx(ctx_, value.ctx());
        const int want = ctx_->gen(gen_id).degree + degree_;
        if (!value.is_homogeneous(want))
            throw StructureError("derivation value on '" + ctx_->gen(gen_id).name +
                                 "' is not homogeneous of degree " + std::to_string(want));
        if (value.is_zero()) vals_.erase(gen_id);
        else vals_.insert_or_assign(gen_id, std::move(value));
    }
    Poly value(int gen_id) const {
        auto it = vals_.find(gen_id);
        if (it != vals_.end()) return it->second;
        return Poly(ctx_, W_);
    }

    Poly apply(const Poly& p) const {
        require_same_ctx(ctx_, p.ctx());
        Poly r(ctx_, std::min(W_, p.truncation_weight()), p.hbar_min(), p.hbar_max());
        const bool dodd = degree_ % 2 != 0;
        for (const auto& [m, c] : p.terms()) {
            // D over each word position: sign (-1)^{|D| * |prefix|}
            int prefix_odd = 0;
            for (size_t i = 0; i < m.word.size(); ++i) {
                const int id = ctx_->id_of_rank(m.word[i]);
                auto it = vals_.find(id);
                if (it != vals_.end()) {
                    Poly pre(p.ctx(), r.truncation_weight(), p.hbar_min(), p.hbar_max());
                    Monomial mp;
                    mp.word.assign(m.word.begin(), m.word.begin() + static_cast<long>(i));
                    mp.hbar = m.hbar;
                    mp.u = m.u;
                    pre.add_monomial(mp, (dodd && prefix_odd % 2) ? -c : c);
                    Poly suf(p.ctx(), r.truncation_weight(), p.hbar_min(), p.hbar_max());
                    Monomial ms;
                    ms.word.assign(m.word.begin() + static_cast<long>(i) + 1, m.word.end());
                    suf.add_monomial(ms, Coefficient(1));
                    r += pre * it->second * suf;
                }
                if (ctx_->odd_rank(m.word[i])) ++prefix_odd;
            }
        }
        return r;
    }

    /* Graded commutator [D1, D2] = D1 D2 - (-1)^{|D1||D2|} D2 D1 (again a derivation). */
    static Derivation commutator(const Derivation& a, const Derivation& b) {
        require_same_ctx(a.ctx_, b.ctx_);
        Derivation r(a.ctx_, a.degree_ + b.degree_, std::min(a.W_, b.W_));
        const bool both_odd = (a.degree_ % 2 != 0) && (b.degree_ % 2 != 0);
        for (int id = 0; id < a.ctx_->size(); ++id) {
            Poly v = a.apply(b.value(id));
            Poly w = b.apply(a.value(id));
            Poly val = both_odd ? v + w : v - w;
            if (!val.is_zero()) r.set_value(id, val);
        }
        return r;
    }

    /* D(D(gen)) for every generator; zero map iff D^2 = 0 at truncation (odd D). */
    std::map<int, Poly> square_on_generators() const {
        std::map<int, Poly> res;
        for (int id = 0; id < ctx_->size(); ++id) {
            Poly s = apply(value(id));
            if (!s.is_zero()) res.emplace(id, std::move(s));
        }
        return res;
    }

private:
    CtxPtr ctx_;
    int degree_ = 0;
    int W_ = kDefaultTruncationWeight;
    std::map<int, Poly> vals_;
};

/**
 * Largest amount by which applying D can raise the coupled weight of a
 * monomial: the maximum over stored values of (term weight - generator
 * weight), at least 0.  Identities that pass through D and an operator that
 * lowers weight hold verbatim only on arguments of weight at most
 * W - weight_gain(D): beyond that, D clips terms above the window whose
 * images under the lowering operator would have landed back inside.
 */
inline int weight_gain(const Derivation& D) {
    int gain = 0;
    const GeneratorContext& ctx = *D.ctx();
    for (const auto& [id, v] : D.values()) {
        const int gw = ctx.gen(id).weight;
        for (const auto& [m, c] : v.terms()) gain = std::max(gain, m.weight(ctx) - gw);
    }
    return gain;
}

}  // namespace linfty
