#pragma once

/**
 * Graded-commutative polynomials with Koszul signs, a coupled truncation
 * weight, and formal hbar / u variables.
 *
 * Monomial words store generator *ranks* (positions in the canonical
 * (degree, name) order) ascending; odd generators never repeat. The coupled
 * weight of a term is sum of generator weights + 2*(hbar degree); hbar may be
 * negative inside a declared Laurent window [hmin, hmax]. u has degree 2 and
 * weight 0. Every operation truncates: terms above the weight cap or outside
 * the hbar window are dropped silently, so all equalities are "modulo weight
 * > W" by construction.
 */

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "context.hpp"

namespace linfty {

constexpr int kNoHbarCap = 1 << 20;
constexpr int kDefaultTruncationWeight = 6;

struct Monomial {
    std::vector<int> word;  // generator ranks, ascending
    int hbar = 0;
    int u = 0;

    bool operator<(const Monomial& o) const {
        if (word != o.word) return word < o.word;
        if (hbar != o.hbar) return hbar < o.hbar;
        return u < o.u;
    }
    bool operator==(const Monomial& o) const {
        return word == o.word && hbar == o.hbar && u == o.u;
    }

    bool is_unit() const { return word.empty() && hbar == 0 && u == 0; }

    int degree(const GeneratorContext& ctx) const {
        int d = 2 * u;
        for (int r : word) d += ctx.gen_of_rank(r).degree;
        return d;
    }
    int weight(const GeneratorContext& ctx) const {
        int w = 2 * hbar;
        for (int r : word) w += ctx.gen_of_rank(r).weight;
        return w;
    }
    int cx_weight(const GeneratorContext& ctx) const {
        int c = -hbar;
        for (int r : word) c += ctx.gen_of_rank(r).cx_weight;
        return c;
    }
    bool odd(const GeneratorContext& ctx) const { return degree(ctx) % 2 != 0; }
};

/**
 * Sort a rank word into canonical ascending order, accumulating the Koszul
 * sign of the sorting permutation. Returns 0 if an odd generator repeats.
 * Insertion sort: each adjacent swap of parities (p,q) contributes
 * (-1)^{p q}.
 */
inline int normalize_word(std::vector<int>& w, const GeneratorContext& ctx) {
    int sign = 1;
    for (size_t i = 1; i < w.size(); ++i) {
        int v = w[i];
        const bool pv = ctx.odd_rank(v);
        size_t j = i;
        while (j > 0 && w[j - 1] > v) {
            if (pv && ctx.odd_rank(w[j - 1])) sign = -sign;
            w[j] = w[j - 1];
            --j;
        }
        w[j] = v;
    }
    for (size_t i = 1; i < w.size(); ++i)
        if (w[i] == w[i - 1] && ctx.odd_rank(w[i])) return 0;
    return sign;
}

class Poly {
public:
    Poly() = default;
    explicit Poly(CtxPtr ctx, int W = kDefaultTruncationWeight, int hmin = 0,
                  int hmax = kNoHbarCap)
        : ctx_(std::move(ctx)), W_(W), hmin_(hmin), hmax_(hmax) {}

    static Poly unit(const CtxPtr& ctx, Coefficient c = Coefficient(1),
                     int W = kDefaultTruncationWeight, int hmin = 0, int hmax = kNoHbarCap) {
        Poly p(ctx, W, hmin, hmax);
        p.add_monomial(Monomial{}, c);
        return p;
    }
    static Poly generator(const CtxPtr& ctx, int id, int W = kDefaultTruncationWeight,
                          int hmin = 0, int hmax = kNoHbarCap) {
        Poly p(ctx, W, hmin, hmax);
        Monomial m;
        m.word.push_back(ctx->rank(id));
        p.add_monomial(m, Coefficient(1));
        return p;
    }
    static Poly hbar(const CtxPtr& ctx, int power, int W = kDefaultTruncationWeight,
                     int hmin = 0, int hmax = kNoHbarCap) {
        Poly p(ctx, W, hmin, hmax);
        Monomial m;
        m.hbar = power;
        p.add_monomial(m, Coefficient(1));
        return p;
    }

    const CtxPtr& ctx() const { return ctx_; }
    int truncation_weight() const { return W_; }
    int hbar_min() const { return hmin_; }
    int hbar_max() const { return hmax_; }
    const std::map<Monomial, Coefficient>& terms() const { return t_; }
    bool is_zero() const { return t_.empty(); }
    size_t size() const { return t_.size(); }

    bool admissible(const Monomial& m) const {
        if (m.hbar < hmin_ || m.hbar > hmax_ || m.u < 0) return false;
        return m.weight(*ctx_) <= W_;
    }

    /* Insert an already-normalized monomial (dropped if not admissible). */
    void add_monomial(const Monomial& m, const Coefficient& c) {
        if (c.is_zero() || !admissible(m)) return;
        auto it = t_.find(m);
        if (it == t_.end()) {
            t_.emplace(m, c);
        } else {
            it->second += c;
            if (it->second.is_zero()) t_.erase(it);
        }
    }

    /* Insert a term given by generator *ids* in arbitrary order. */
    void add_term(const std::vector<int>& gen_ids, const Coefficient& c, int hbar_pow = 0,
                  int u_pow = 0) {
        Monomial m;
        m.word.reserve(gen_ids.size());
        for (int id : gen_ids) m.word.push_back(ctx_->rank(id));
        m.hbar = hbar_pow;
        m.u = u_pow;
        int s = normalize_word(m.word, *ctx_);
        if (s == 0) return;
        add_monomial(m, s < 0 ? -c : c);
    }

    Poly& operator+=(const Poly& o) {
        merge_bounds(o);
        for (const auto& [m, c] : o.t_) add_monomial(m, c);
        return *this;
    }
    Poly& operator-=(const Poly& o) {
        merge_bounds(o);
        for (const auto& [m, c] : o.t_) add_monomial(m, -c);
        return *this;
    }
    friend Poly operator+(Poly a, const Poly& b) { a += b; return a; }
    friend Poly operator-(Poly a, const Poly& b) { a -= b; return a; }
    Poly operator-() const {
        Poly r(ctx_, W_, hmin_, hmax_);
        for (const auto& [m, c] : t_) r.t_.emplace(m, -c);
        return r;
    }

    Poly& scale(const Coefficient& c) {
        if (c.is_zero()) { t_.clear(); return *this; }
        for (auto& [m, v] : t_) v *= c;
        return *this;
    }
    friend Poly operator*(const Coefficient& c, Poly p) { p.scale(c); return p; }

    friend Poly operator*(const Poly& a, const Poly& b) {
        require_same_ctx(a.ctx_, b.ctx_);
        Poly r(a.ctx_, std::min(a.W_, b.W_), std::max(a.hmin_, b.hmin_),
               std::min(a.hmax_, b.hmax_));
        for (const auto& [ma, ca] : a.t_)
            for (const auto& [mb, cb] : b.t_) {
                Monomial m;
                int sign = mul_words(ma.word, mb.word, *a.ctx_, m.word);
                if (sign == 0) continue;
                m.hbar = ma.hbar + mb.hbar;
                m.u = ma.u + mb.u;
                Coefficient c = ca * cb;
                r.add_monomial(m, sign < 0 ? -c : c);
            }
        return r;
    }
    Poly& operator*=(const Poly& o) { *this = *this * o; return *this; }

    friend bool operator==(const Poly& a, const Poly& b) {
        require_same_ctx(a.ctx_, b.ctx_);
        return a.t_ == b.t_;
    }
    friend bool operator!=(const Poly& a, const Poly& b) { return !(a == b); }

    /* Multiply by hbar^k (k may be negative inside the window). */
    Poly shift_hbar(int k) const {
        Poly r(ctx_, W_, hmin_, hmax_);
        for (const auto& [m, c] : t_) {
            Monomial n = m;
            n.hbar += k;
            r.add_monomial(n, c);
        }
        return r;
    }
    Poly shift_u(int k) const {
        Poly r(ctx_, W_, hmin_, hmax_);
        for (const auto& [m, c] : t_) {
            Monomial n = m;
            n.u += k;
            r.add_monomial(n, c);
        }
        return r;
    }

    /* Restrict to weight <= Wp (Wp <= W required). */
    Poly truncate(int Wp) const {
        if (Wp > W_) throw ArgumentError("truncate: target weight exceeds current truncation");
        Poly r(ctx_, Wp, hmin_, hmax_);
        for (const auto& [m, c] : t_) r.add_monomial(m, c);
        return r;
    }
    /* Same terms, relaxed/changed bookkeeping bounds (terms outside are dropped). */
    Poly with_bounds(int W, int hmin, int hmax) const {
        Poly r(ctx_, W, hmin, hmax);
        for (const auto& [m, c] : t_) r.add_monomial(m, c);
        return r;
    }

    /* Graded left partial derivative by the generator with the given id:
       d/dg (g.m) = m; each occurrence signs past the prefix parities. */
    Poly derivative(int gen_id) const {
        const int rk = ctx_->rank(gen_id);
        const bool podd = ctx_->odd_rank(rk);
        Poly r(ctx_, W_, hmin_, hmax_);
        for (const auto& [m, c] : t_) {
            int prefix_odd = 0;
            for (size_t i = 0; i < m.word.size(); ++i) {
                if (m.word[i] == rk) {
                    Monomial n = m;
                    n.word.erase(n.word.begin() + static_cast<long>(i));
                    bool neg = podd && (prefix_odd % 2 != 0);
                    r.add_monomial(n, neg ? -c : c);
                }
                if (ctx_->odd_rank(m.word[i])) ++prefix_odd;
            }
        }
        return r;
    }

    /* Collect the coefficient polynomial of hbar^k (hbar removed). */
    Poly hbar_coefficient(int k) const {
        Poly r(ctx_, W_ + 2 * std::abs(k) + 2, hmin_ - std::abs(k), hmax_ + std::abs(k));
        for (const auto& [m, c] : t_)
            if (m.hbar == k) {
                Monomial n = m;
                n.hbar = 0;
                r.add_monomial(n, c);
            }
        return r.with_bounds(W_ + 2 * std::abs(k), 0, kNoHbarCap);
    }

    /* Terms whose word is empty (constants in the generators; may carry hbar/u). */
    Poly field_free_part() const {
        Poly r(ctx_, W_, hmin_, hmax_);
        for (const auto& [m, c] : t_)
            if (m.word.empty()) r.add_monomial(m, c);
        return r;
    }

    /* Sub-polynomial of terms with the given total-degree parity. */
    Poly parity_part(bool odd) const {
        Poly r(ctx_, W_, hmin_, hmax_);
        for (const auto& [m, c] : t_)
            if (m.odd(*ctx_) == odd) r.add_monomial(m, c);
        return r;
    }

    bool is_homogeneous(int degree) const {
        for (const auto& [m, c] : t_)
            if (m.degree(*ctx_) != degree) return false;
        return true;
    }
    /* Degree if homogeneous (zero polynomial: nullopt treated as any). */
    std::optional<int> homogeneous_degree() const {
        std::optional<int> d;
        for (const auto& [m, c] : t_) {
            int md = m.degree(*ctx_);
            if (!d) d = md;
            else if (*d != md) throw StructureError("polynomial is not degree-homogeneous");
        }
        return d;
    }

    int min_term_weight() const {
        int w = kNoHbarCap;
        for (const auto& [m, c] : t_) w = std::min(w, m.weight(*ctx_));
        return w;
    }

    /**
     * Truncated exponential. Requires every term to have coupled weight >= 1
     * (then X^m dies for m > W and the series is finite).
     */
    Poly exp() const {
        if (min_term_weight() < 1)
            throw ArgumentError("exp: term of coupled weight < 1 present, series would not terminate");
        Poly acc = Poly::unit(ctx_, Coefficient(1), W_, hmin_, hmax_);
        Poly pw = acc;
        Rational fact(1);
        for (int m = 1; m <= W_; ++m) {
            pw = pw * (*this);
            if (pw.is_zero()) break;
            fact *= m;
            Poly term = pw;
            term.scale(Coefficient(Rational(1) / fact));
            acc += term;
        }
        return acc;
    }

    /**
     * Truncated exponential where termination may also come from the hbar
     * window: every term must have coupled weight >= 1 (dies by weight) or
     * carry hbar <= -1 (powers march below the hbar window floor).
     */
    Poly exp_window() const {
        for (const auto& [m, c] : t_) {
            if (m.weight(*ctx_) >= 1 || m.hbar <= -1) continue;
            throw ArgumentError("exp_window: term neither weight-positive nor hbar-negative");
        }
        const int h = hmin_ < 0 ? -hmin_ : 0;
        const int cap = W_ + 2 * h * h + h + 1;
        Poly acc = Poly::unit(ctx_, Coefficient(1), W_, hmin_, hmax_);
        Poly pw = acc;
        Rational fact(1);
        for (int m = 1; m <= cap; ++m) {
            pw = pw * (*this);
            if (pw.is_zero()) break;
            fact *= m;
            Poly term = pw;
            term.scale(Coefficient(Rational(1) / fact));
            acc += term;
        }
        return acc;
    }

    /**
     * Truncated log(1 + X) where *this = 1 + X; X must have all terms of
     * coupled weight >= 1.
     */
    Poly log1() const {
        Poly X = *this;
        Poly one = Poly::unit(ctx_, Coefficient(1), W_, hmin_, hmax_);
        X -= one;
        if (X.min_term_weight() < 1)
            throw ArgumentError("log: term of coupled weight < 1 present");
        Poly acc(ctx_, W_, hmin_, hmax_);
        Poly pw = one;
        for (int m = 1; m <= W_; ++m) {
            pw = pw * X;
            if (pw.is_zero()) break;
            Poly term = pw;
            term.scale(Coefficient(Rational((m % 2) ? 1 : -1, m)));
            acc += term;
        }
        return acc;
    }

    /**
     * Substitute generators: map from generator id (of this context) to its
     * image polynomial over `target`. Images must match source parity.
     * Unmapped generators must exist in `target` under the same name.
     */
    Poly substitute(const CtxPtr& target, const std::map<int, Poly>& images) const {
        Poly r(target, W_, hmin_, hmax_);
        for (const auto& [m, c] : t_) {
            Poly acc = Poly::unit(target, c, W_, hmin_, hmax_);
            acc = acc.shift_hbar(m.hbar).shift_u(m.u);
            for (int rk : m.word) {
                const int id = ctx_->id_of_rank(rk);
                auto it = images.find(id);
                if (it != images.end()) {
                    acc = acc * it->second;
                } else {
                    const Generator& g = ctx_->gen(id);
                    acc = acc * Poly::generator(target, target->id(g.name), W_, hmin_, hmax_);
                }
                if (acc.is_zero()) break;
            }
            r += acc;
        }
        return r;
    }

    /* Transport to a context containing generators of the same names. */
    Poly transport(const CtxPtr& target) const {
        return substitute(target, {});
    }

private:
    void merge_bounds(const Poly& o) {
        if (!ctx_) { ctx_ = o.ctx_; W_ = o.W_; hmin_ = o.hmin_; hmax_ = o.hmax_; return; }
        require_same_ctx(ctx_, o.ctx_);
        W_ = std::min(W_, o.W_);
        hmin_ = std::max(hmin_, o.hmin_);
        hmax_ = std::min(hmax_, o.hmax_);
        // re-filter under the narrowed bounds
        for (auto it = t_.begin(); it != t_.end();)
            it = admissible(it->first) ? std::next(it) : t_.erase(it);
    }

    /* Merge two sorted words with the Koszul crossing sign; 0 on odd square. */
    static int mul_words(const std::vector<int>& a, const std::vector<int>& b,
                         const GeneratorContext& ctx, std::vector<int>& out) {
        out.clear();
        out.reserve(a.size() + b.size());
        size_t i = 0, j = 0;
        int sign = 1;
        int odd_rest_a = 0;
        for (int r : a) odd_rest_a += ctx.odd_rank(r) ? 1 : 0;
        while (i < a.size() && j < b.size()) {
            if (a[i] <= b[j]) {
                odd_rest_a -= ctx.odd_rank(a[i]) ? 1 : 0;
                out.push_back(a[i++]);
            } else {
                // b[j] crosses the remaining elements of a
                if (ctx.odd_rank(b[j]) && (odd_rest_a % 2 != 0)) sign = -sign;
                out.push_back(b[j++]);
            }
        }
        while (i < a.size()) out.push_back(a[i++]);
        while (j < b.size()) out.push_back(b[j++]);
        for (size_t k = 1; k < out.size(); ++k)
            if (out[k] == out[k - 1] && ctx.odd_rank(out[k])) return 0;
        return sign;
    }

    CtxPtr ctx_;
    int W_ = kDefaultTruncationWeight;
    int hmin_ = 0;
    int hmax_ = kNoHbarCap;
    std::map<Monomial, Coefficient> t_;
};

/* All admissible monomials of the context: weight <= W, hbar in [hmin,hmax]
   intersected with [0, hbar_cap], u <= u_cap. Deterministic order. */
inline void enumerate_monomials(const CtxPtr& ctx, int W, std::vector<Monomial>& out,
                                int hbar_cap = 0, int u_cap = 0, int hbar_min = 0) {
    out.clear();
    const int n = ctx->size();
    std::function<void(Monomial&, int, int)> rec = [&](Monomial& m, int next_rank, int wleft) {
        for (int r = next_rank; r < n; ++r) {
            const Generator& g = ctx->gen_of_rank(r);
            if (g.weight > wleft) continue;
            m.word.push_back(r);
            out.push_back(m);
            if (!g.odd()) rec(m, r, wleft - g.weight);
            else rec(m, r + 1, wleft - g.weight);
            m.word.pop_back();
        }
    };
    Monomial m;
    out.push_back(m);
    rec(m, 0, W);
    // decorate with hbar and u powers
    std::vector<Monomial> base = out;
    out.clear();
    for (const Monomial& b : base) {
        int wb = b.weight(*ctx);
        for (int h = hbar_min; h <= hbar_cap; ++h) {
            if (wb + 2 * h > W) continue;
            for (int uu = 0; uu <= u_cap; ++uu) {
                Monomial mm = b;
                mm.hbar = h;
                mm.u = uu;
                out.push_back(mm);
            }
        }
    }
    std::sort(out.begin(), out.end());
}

}  // namespace linfty
