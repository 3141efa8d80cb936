#pragma once

/**
 * Atiyah classes and characteristic forms of the shifted tangent module.
 *
 * The negatively graded form algebra of a curved L-infinity algebra is
 * realized as the dual context of the doubled module (geometry.hpp): the
 * copy coordinate xi_{v.e} plays the role of the one-form symbol of xi_v,
 * and the odd derivation ddr : xi_v -> xi_{v.e} is the universal
 * differential.  The tangent module itself is the free span of the copy
 * coordinates, with module differential read off the copy columns of the
 * extended differential.  Against the trivialization connection (which
 * kills the frame sections) the Atiyah class is the matrix of one-forms
 *   At[c][b] = ddr(A[c][b]),   D(xi_{c.e}) = sum_b A[c][b] xi_{b.e},
 * with coefficients on the left and the basis factor on the right.  All
 * entries are homogeneous of operator degree zero once the form degree is
 * absorbed into the dual grading, so powers multiply without sign twists.
 */

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <vector>

#include "geometry.hpp"

namespace linfty {

/******** Bernoulli numbers and the A-hat coefficients ********/

/** B_0 .. B_n with B_1 = -1/2, by the convolution recursion
 *  sum_{j<=n} C(n+1, j) B_j = 0. */
inline std::vector<Rational> bernoulli_numbers(int nmax) {
    if (nmax < 0) throw ArgumentError("bernoulli_numbers: negative order");
    std::vector<Rational> B(static_cast<size_t>(nmax) + 1);
    B[0] = 1;
    for (int n = 1; n <= nmax; ++n) {
        Rational acc = 0;
        for (int j = 0; j < n; ++j) acc += Rational(binomial(n + 1, j)) * B[j];
        B[n] = -acc / Rational(n + 1);
    }
    return B;
}

/** Coefficients c_k = -B_{2k} / (2k) of the log A-hat expansion; entry k-1
 *  holds c_k, k = 1..kmax. */
inline std::vector<Rational> ahat_series_coefficients(int kmax) {
    if (kmax < 1) throw ArgumentError("ahat_series_coefficients: kmax must be positive");
    const auto B = bernoulli_numbers(2 * kmax);
    std::vector<Rational> c;
    c.reserve(static_cast<size_t>(kmax));
    for (int k = 1; k <= kmax; ++k) c.push_back(-B[static_cast<size_t>(2 * k)] / Rational(2 * k));
    return c;
}

/******** Connection and Atiyah class ********/

/**
 * The trivialization connection on the tangent module: on a section written
 * f . v_b (coefficient left) it acts as (ddr f) . v_b, killing the frame
 * sections themselves.  It is flat: ddr squares to zero.
 */
struct ConnectionSpec {
    TangentFrame tf;
    bool flat = true;

    /* coefficient part of nabla(f . v_b) */
    Poly apply_coefficient(const Poly& f) const { return tf.ddr.apply(f); }
};

inline ConnectionSpec trivialization_connection(const CurvedLInfinity& g, int W = 0) {
    if (W <= 0) W = g.base.W;
    return ConnectionSpec{detail::tangent_frame(g, W), true};
}

/**
 * The Atiyah class of the tangent module against the trivialization
 * connection: A is the copy-column matrix of the extended differential and
 * At = ddr(A).  At entry (c, b) is homogeneous of dual degree |b| - |c|.
 */
struct AtiyahClass {
    TangentFrame tf;
    std::vector<std::vector<Poly>> A;   // module differential matrix
    std::vector<std::vector<Poly>> At;  // Atiyah matrix of one-forms
    int W = 0;
};

namespace detail {

/* Ratio of two coefficients (the divisor a plain nonzero rational). */
inline Coefficient coefficient_ratio(const Coefficient& num, const Coefficient& den) {
    if (den.rational == 0) throw ArithmeticError("coefficient ratio: zero divisor");
    return Coefficient(num.rational / den.rational, num.twoPiI - den.twoPiI);
}

/* Split a copy-linear polynomial into columns, v = sum_b col[b] xi_{b.e}
   with coefficients on the left: each term carries exactly one fiber
   coordinate, stripped against a witness product so that reassembling
   through the ring multiplication is exact. */
inline std::vector<Poly> copy_columns(const TangentFrame& tf, const Poly& v) {
    const int m = tf.dim0;
    const int W = v.truncation_weight();
    std::vector<Poly> cols(static_cast<size_t>(m), Poly(tf.ctx, W));
    for (const auto& [mono, q] : v.terms()) {
        int pos = -1;
        for (size_t i = 0; i < mono.word.size(); ++i) {
            const int id = tf.ctx->id_of_rank(mono.word[i]);
            if (!tf.frame.is_base_id(id) && tf.frame.module_index_of(id) >= m) {
                if (pos >= 0)
                    throw StructureError("copy-linear split: two fiber coordinates in one term");
                pos = static_cast<int>(i);
            }
        }
        if (pos < 0) throw StructureError("copy-linear split: missing fiber coordinate");
        const int copy_id = tf.ctx->id_of_rank(mono.word[static_cast<size_t>(pos)]);
        const int b = tf.frame.module_index_of(copy_id) - m;
        Monomial stripped = mono;
        stripped.word.erase(stripped.word.begin() + pos);
        // witness: the stripped word times the coordinate reproduces mono
        Poly w(tf.ctx, W);
        w.add_monomial(stripped, Coefficient(1));
        Poly img = w * Poly::generator(tf.ctx, copy_id, W);
        auto it = img.terms().find(mono);
        if (it == img.terms().end())
            throw StructureError("copy-linear split: witness product lost the term");
        cols[static_cast<size_t>(b)].add_monomial(stripped, coefficient_ratio(q, it->second));
    }
    return cols;
}

}  // namespace detail

inline AtiyahClass atiyah_class(const CurvedLInfinity& g, int W = 0) {
    if (W <= 0) W = g.base.W;
    AtiyahClass at{detail::tangent_frame(g, W), {}, {}, W};
    const int m = at.tf.dim0;
    at.A.reserve(static_cast<size_t>(m));
    at.At.reserve(static_cast<size_t>(m));
    for (int c = 0; c < m; ++c) {
        Poly dc = at.tf.D.value(at.tf.ctx->id(g.module[static_cast<size_t>(c)].name + ".e"));
        at.A.push_back(detail::copy_columns(at.tf, dc));
        std::vector<Poly> row;
        row.reserve(static_cast<size_t>(m));
        for (int b = 0; b < m; ++b) row.push_back(at.tf.ddr.apply(at.A.back()[static_cast<size_t>(b)]));
        at.At.push_back(std::move(row));
    }
    return at;
}

/******** Endomorphism calculus ********/

/**
 * Differential on matrices of operator degree opdeg acting on the fiber
 * coordinate span, induced by the ambient differential and the module
 * differential matrix A:
 *   (dF)[c][b] = D(F[c][b]) + sum_e (-1)^{|F[c][e]|} F[c][e] A[e][b]
 *                - (-1)^{opdeg (1 + |A[c][e]|) + 1} ... A[c][e] F[e][b],
 * with entry parities from operator homogeneity.  The Atiyah class is a
 * cocycle for this differential.
 */
inline std::vector<std::vector<Poly>> end_differential(const AtiyahClass& at,
                                                       const std::vector<std::vector<Poly>>& F,
                                                       int opdeg) {
    const int m = at.tf.dim0;
    auto par = [](int x) { return ((x % 2) + 2) % 2; };
    std::vector<int> deg;
    deg.reserve(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) deg.push_back(at.tf.shell.module[static_cast<size_t>(i)].degree);
    std::vector<std::vector<Poly>> out(static_cast<size_t>(m),
                                       std::vector<Poly>(static_cast<size_t>(m), Poly(at.tf.ctx, at.W)));
    for (int c = 0; c < m; ++c)
        for (int b = 0; b < m; ++b) {
            Poly r = at.tf.D.apply(F[static_cast<size_t>(c)][static_cast<size_t>(b)]);
            for (int e = 0; e < m; ++e) {
                Poly t1 = F[static_cast<size_t>(c)][static_cast<size_t>(e)] *
                          at.A[static_cast<size_t>(e)][static_cast<size_t>(b)];
                if (par(opdeg + deg[static_cast<size_t>(c)] + deg[static_cast<size_t>(e)])) t1 = -t1;
                r += t1;
                Poly t2 = at.A[static_cast<size_t>(c)][static_cast<size_t>(e)] *
                          F[static_cast<size_t>(e)][static_cast<size_t>(b)];
                const int s = 1 + opdeg + opdeg * (1 + deg[static_cast<size_t>(c)] + deg[static_cast<size_t>(e)]);
                if (par(s)) t2 = -t2;
                r += t2;
            }
            out[static_cast<size_t>(c)][static_cast<size_t>(b)] = std::move(r);
        }
    return out;
}

/** k-th matrix power of the Atiyah class (degree-zero entries compose
 *  without sign twists). */
inline std::vector<std::vector<Poly>> atiyah_power(const AtiyahClass& at, int k) {
    const int m = at.tf.dim0;
    std::vector<std::vector<Poly>> P(static_cast<size_t>(m),
                                     std::vector<Poly>(static_cast<size_t>(m), Poly(at.tf.ctx, at.W)));
    for (int i = 0; i < m; ++i)
        P[static_cast<size_t>(i)][static_cast<size_t>(i)] = Poly::unit(at.tf.ctx, Coefficient(1), at.W);
    for (int s = 0; s < k; ++s) {
        std::vector<std::vector<Poly>> N(static_cast<size_t>(m),
                                         std::vector<Poly>(static_cast<size_t>(m), Poly(at.tf.ctx, at.W)));
        for (int c = 0; c < m; ++c)
            for (int e = 0; e < m; ++e) {
                if (at.At[static_cast<size_t>(c)][static_cast<size_t>(e)].is_zero()) continue;
                for (int b = 0; b < m; ++b)
                    N[static_cast<size_t>(c)][static_cast<size_t>(b)] +=
                        at.At[static_cast<size_t>(c)][static_cast<size_t>(e)] *
                        P[static_cast<size_t>(e)][static_cast<size_t>(b)];
            }
        P = std::move(N);
    }
    return P;
}

/** Supertrace over the fiber coordinate span: sign from the parity of the
 *  copy generators (|v| + 1). */
inline Poly supertrace(const AtiyahClass& at, const std::vector<std::vector<Poly>>& F) {
    Poly s(at.tf.ctx, at.W);
    for (int c = 0; c < at.tf.dim0; ++c) {
        const int pd = at.tf.shell.module[static_cast<size_t>(c)].degree + 1;
        if (((pd % 2) + 2) % 2)
            s -= F[static_cast<size_t>(c)][static_cast<size_t>(c)];
        else
            s += F[static_cast<size_t>(c)][static_cast<size_t>(c)];
    }
    return s;
}

/******** Taylor coefficients ********/

/**
 * Rebuild the arity-(n+2) bracket table from the Atiyah matrix alone, by
 * inverting in turn the one-form symbol map, the fiber-coordinate split,
 * and the doubling of the table.  Entries recovered through different copy
 * slots are cross-checked for consistency.  Requires n + 2 <= W so the
 * truncation retains the arity-(n+2) words.
 */
inline std::map<std::vector<int>, BracketValue> atiyah_taylor(const AtiyahClass& at, int n) {
    const int arity = n + 2;
    if (n < 0) throw ArgumentError("atiyah_taylor: negative derivative order");
    if (arity > at.W)
        throw StructureError("atiyah_taylor: truncation weight " + std::to_string(at.W) +
                             " cannot hold arity " + std::to_string(arity) + " words");
    const int m = at.tf.dim0;
    const CtxPtr& ctx = at.tf.ctx;
    auto par = [](int x) { return ((x % 2) + 2) % 2; };

    // 1 + 2: invert the symbol map on words of n+1 dual factors and
    // reassemble the copy columns of a differential.  Preimage words are
    // unique per term; their coefficients are read off witness images of
    // the symbol map itself.
    Derivation Dp(ctx, 1, at.W);
    for (int c = 0; c < m; ++c) {
        Poly col(ctx, at.W);
        for (int b = 0; b < m; ++b) {
            Poly E(ctx, at.W);
            std::set<std::vector<int>> seen;
            const Poly& entry = at.At[static_cast<size_t>(c)][static_cast<size_t>(b)];
            for (const auto& [mono, q] : entry.terms()) {
                int nxi = 0, pos = -1;
                for (size_t i = 0; i < mono.word.size(); ++i) {
                    const int id = ctx->id_of_rank(mono.word[i]);
                    if (at.tf.frame.is_base_id(id)) continue;
                    ++nxi;
                    if (at.tf.frame.module_index_of(id) >= m) {
                        if (pos >= 0) throw StructureError("atiyah_taylor: malformed one-form term");
                        pos = static_cast<int>(i);
                    }
                }
                if (nxi != n + 1) continue;  // other arities
                if (pos < 0) throw StructureError("atiyah_taylor: term without a one-form factor");
                const int a =
                    at.tf.frame.module_index_of(ctx->id_of_rank(mono.word[static_cast<size_t>(pos)])) - m;
                Monomial pre = mono;
                pre.word[static_cast<size_t>(pos)] =
                    ctx->rank(ctx->id(at.tf.shell.module[static_cast<size_t>(a)].name));
                if (normalize_word(pre.word, *ctx) == 0)
                    throw StructureError("atiyah_taylor: degenerate preimage word");
                if (!seen.insert(pre.word).second) continue;  // already recovered
                // witness: the symbol image of the preimage word
                Poly w(ctx, at.W);
                w.add_monomial(pre, Coefficient(1));
                Poly img = at.tf.ddr.apply(w);
                auto it = img.terms().find(mono);
                if (it == img.terms().end() || it->second.is_zero())
                    throw StructureError("atiyah_taylor: witness image lost the term");
                auto here = entry.terms().find(mono);
                E.add_monomial(pre, detail::coefficient_ratio(here->second, it->second));
            }
            col += E * Poly::generator(ctx, ctx->id(at.tf.shell.module[static_cast<size_t>(b)].name + ".e"),
                                       at.W);
        }
        if (!col.is_zero())
            Dp.set_value(ctx->id(at.tf.shell.module[static_cast<size_t>(c)].name + ".e"), col);
    }

    // 3: extract the doubled table from the rebuilt copy columns
    CEComplex fr = at.tf.frame;
    fr.d = Dp;
    detail::set_base_columns(fr.d, fr, at.tf.shell.base);
    CurvedLInfinity doubled = extract_brackets(fr, at.tf.shell.base);

    // 4: undo the doubling: a copy entry determines the plain entry through
    // the one-slot substitution law of the tangent table.
    std::vector<int> pdeg, tdeg;
    for (const Generator& gen : at.tf.shell.module) tdeg.push_back(gen.degree);
    for (int i = 0; i < m; ++i) pdeg.push_back(tdeg[static_cast<size_t>(i)]);
    std::map<std::vector<int>, BracketValue> result;
    for (const auto& [N, table] : doubled.brackets) {
        if (N != arity)
            throw StructureError("atiyah_taylor: unexpected arity in rebuilt table");
        for (const auto& [tuple, value] : table) {
            const int a = tuple.back() - m;
            if (a < 0) throw StructureError("atiyah_taylor: copy slot missing");
            std::vector<int> T(tuple.begin(), tuple.end() - 1);
            auto it = std::lower_bound(T.begin(), T.end(), a);
            const int j = static_cast<int>(it - T.begin());
            T.insert(it, a);
            int suffix = 0, mult = 0;
            for (size_t i = static_cast<size_t>(j) + 1; i < T.size(); ++i)
                suffix += pdeg[static_cast<size_t>(T[i])];
            for (int t : T) mult += (t == a) ? 1 : 0;
            std::vector<int> B = T;
            B[static_cast<size_t>(j)] = a + m;
            const int nu = normalize_bracket_tuple(B, tdeg);
            if (nu == 0 || B != tuple)
                throw StructureError("atiyah_taylor: tuple normalization mismatch");
            BracketValue plain;
            for (const auto& [out, p] : value) {
                const int oc = out - m;
                if (oc < 0) throw StructureError("atiyah_taylor: plain output in copy column");
                const int law = par(pdeg[static_cast<size_t>(a)] + suffix + pdeg[static_cast<size_t>(oc)])
                                    ? -1
                                    : 1;
                Poly pp = p;
                pp.scale(Coefficient(Rational(nu * law) / Rational(mult)));
                plain.emplace(oc, std::move(pp));
            }
            auto found = result.find(T);
            if (found == result.end()) {
                result.emplace(std::move(T), std::move(plain));
            } else {
                // a second copy slot must tell the same story
                BracketValue diff = bv_sub(found->second, plain);
                if (!bv_zero(diff))
                    throw StructureError("atiyah_taylor: inconsistent recovery across copy slots");
            }
        }
    }
    return result;
}

/******** Characteristic forms ********/

/**
 * Chern character forms ch_k = Str(At^k) / (k! (-2 pi i)^k), k = 1..kmax.
 * Each form is homogeneous of degree zero in the dual grading and carries
 * the exact 2-pi-i exponent -k on every coefficient.
 */
inline std::vector<Poly> chern_character(const AtiyahClass& at, int kmax) {
    if (kmax < 1) throw ArgumentError("chern_character: kmax must be positive");
    if (2 * kmax > at.W)
        throw ArgumentError("chern_character: kmax exceeds half the truncation weight");
    std::vector<Poly> out;
    out.reserve(static_cast<size_t>(kmax));
    std::vector<std::vector<Poly>> P = atiyah_power(at, 1);
    for (int k = 1; k <= kmax; ++k) {
        if (k > 1) {
            const int m = at.tf.dim0;
            std::vector<std::vector<Poly>> N(static_cast<size_t>(m),
                                             std::vector<Poly>(static_cast<size_t>(m), Poly(at.tf.ctx, at.W)));
            for (int c = 0; c < m; ++c)
                for (int e = 0; e < m; ++e) {
                    if (at.At[static_cast<size_t>(c)][static_cast<size_t>(e)].is_zero()) continue;
                    for (int b = 0; b < m; ++b)
                        N[static_cast<size_t>(c)][static_cast<size_t>(b)] +=
                            at.At[static_cast<size_t>(c)][static_cast<size_t>(e)] *
                            P[static_cast<size_t>(e)][static_cast<size_t>(b)];
                }
            P = std::move(N);
        }
        Poly s = supertrace(at, P);
        const Rational r = Rational((k % 2) ? -1 : 1) / Rational(factorial(k));
        s.scale(Coefficient(r, -k));
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<Poly> chern_character(const CurvedLInfinity& g, int kmax, int W = 0) {
    return chern_character(atiyah_class(g, W), kmax);
}

/**
 * log A-hat form: sum_k c_k Str(At^{2k}) / (2k)! with c_k = -B_{2k}/(2k).
 * The zeta normalization cancels every 2-pi-i factor of the Chern forms, so
 * all coefficients carry exponent zero.
 */
inline Poly log_ahat(const AtiyahClass& at, int kmax) {
    if (kmax < 1) throw ArgumentError("log_ahat: kmax must be positive");
    const auto c = ahat_series_coefficients(kmax);
    Poly out(at.tf.ctx, at.W);
    std::vector<std::vector<Poly>> P = atiyah_power(at, 0);
    for (int k = 1; k <= kmax; ++k) {
        for (int step = 0; step < 2; ++step) {
            const int m = at.tf.dim0;
            std::vector<std::vector<Poly>> N(static_cast<size_t>(m),
                                             std::vector<Poly>(static_cast<size_t>(m), Poly(at.tf.ctx, at.W)));
            for (int cc = 0; cc < m; ++cc)
                for (int e = 0; e < m; ++e) {
                    if (at.At[static_cast<size_t>(cc)][static_cast<size_t>(e)].is_zero()) continue;
                    for (int b = 0; b < m; ++b)
                        N[static_cast<size_t>(cc)][static_cast<size_t>(b)] +=
                            at.At[static_cast<size_t>(cc)][static_cast<size_t>(e)] *
                            P[static_cast<size_t>(e)][static_cast<size_t>(b)];
                }
            P = std::move(N);
        }
        Poly s = supertrace(at, P);
        s.scale(Coefficient(c[static_cast<size_t>(k - 1)] / Rational(factorial(2 * k))));
        out += s;
    }
    return out;
}

inline Poly log_ahat(const CurvedLInfinity& g, int kmax, int W = 0) {
    return log_ahat(atiyah_class(g, W), kmax);
}

/******** The u-mixed complex ********/

/**
 * The form algebra with total differential D + u ddr, u a central even
 * variable of degree 2.  Squares to zero because D and ddr each do and
 * commute.
 */
struct MixedComplexU {
    TangentFrame tf;
    Derivation d_total;
};

inline MixedComplexU mixed_complex_u(const CurvedLInfinity& g, int W = 0) {
    if (W <= 0) W = g.base.W;
    TangentFrame tf = detail::tangent_frame(g, W);
    Poly u(tf.ctx, W);
    {
        Monomial mu;
        mu.u = 1;
        u.add_monomial(mu, Coefficient(1));
    }
    Derivation dt(tf.ctx, 1, W);
    for (int id = 0; id < tf.ctx->size(); ++id) {
        Poly v = tf.D.value(id);
        Poly w = tf.ddr.value(id);
        if (!w.is_zero()) v += u * w;
        if (!v.is_zero()) dt.set_value(id, v);
    }
    for (const auto& [id, p] : dt.square_on_generators())
        throw StructureError("mixed differential fails square-zero on '" + tf.ctx->gen(id).name +
                             "'");
    MixedComplexU out{std::move(tf), std::move(dt)};
    return out;
}

/**
 * u-weighted log A-hat form in the mixed complex: the k-th term of
 * log_ahat carries the extra factor u^{2k}.
 */
inline Poly log_ahat_u(const CurvedLInfinity& g, int kmax, int W = 0) {
    if (W <= 0) W = g.base.W;
    AtiyahClass at = atiyah_class(g, W);
    const auto c = ahat_series_coefficients(kmax);
    Poly out(at.tf.ctx, W);
    for (int k = 1; k <= kmax; ++k) {
        Poly s = supertrace(at, atiyah_power(at, 2 * k));
        s.scale(Coefficient(c[static_cast<size_t>(k - 1)] / Rational(factorial(2 * k))));
        Poly uk(at.tf.ctx, W);
        Monomial mu;
        mu.u = 2 * k;
        uk.add_monomial(mu, Coefficient(1));
        out += s * uk;
    }
    return out;
}

}  // namespace linfty
