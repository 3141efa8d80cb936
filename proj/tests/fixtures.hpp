#pragma once

#include <functional>

#include <linfty/linf.hpp>

namespace fixtures {

using namespace linfty;

/* sl2 with basis e, f, h in degree 0: [e,f]=h, [h,e]=2e, [h,f]=-2f. */
inline CurvedLInfinity sl2(int W = kDefaultTruncationWeight) {
    CurvedLInfinity g(BaseRing::rationals(W),
                      {Generator{"e", 0}, Generator{"f", 0}, Generator{"h", 0}});
    g.add_bracket(2, {"e", "f"}, "h", Rational(1));
    g.add_bracket(2, {"h", "e"}, "e", Rational(2));
    g.add_bracket(2, {"h", "f"}, "f", Rational(-2));
    return g;
}

/* Four-dimensional filiform nilpotent Lie algebra:
   [e1,e2]=e3, [e1,e3]=e4. */
inline CurvedLInfinity n4(int W = kDefaultTruncationWeight) {
    CurvedLInfinity g(BaseRing::rationals(W),
                      {Generator{"e1", 0}, Generator{"e2", 0}, Generator{"e3", 0},
                       Generator{"e4", 0}});
    g.add_bracket(2, {"e1", "e2"}, "e3", Rational(1));
    g.add_bracket(2, {"e1", "e3"}, "e4", Rational(1));
    return g;
}

/* Mixed-parity two-dimensional algebra: x in degree 0, s in degree 1,
   [x,s] = s. */
inline CurvedLInfinity bt2(int W = kDefaultTruncationWeight) {
    CurvedLInfinity g(BaseRing::rationals(W), {Generator{"x", 0}, Generator{"s", 1}});
    g.add_bracket(2, {"x", "s"}, "s", Rational(1));
    return g;
}

/* Abelian one-dimensional algebra in the given degree. */
inline CurvedLInfinity abelian_line(int degree, int W = kDefaultTruncationWeight) {
    return CurvedLInfinity(BaseRing::rationals(W), {Generator{"z", degree}});
}

/* Abelian algebra of the given dimension concentrated in one degree. */
inline CurvedLInfinity abelian(int n, int degree, int W = kDefaultTruncationWeight) {
    std::vector<Generator> mod;
    for (int i = 1; i <= n; ++i) mod.push_back(Generator{"a" + std::to_string(i), degree});
    return CurvedLInfinity(BaseRing::rationals(W), std::move(mod));
}

/* Abelian two-dimensional algebra in degrees 1 and 2 (trivial brackets). */
inline CurvedLInfinity abelian_uw(int W = kDefaultTruncationWeight) {
    return CurvedLInfinity(BaseRing::rationals(W),
                           {Generator{"u1", 1}, Generator{"w2", 2}});
}

/**
 * Build an algebra from an explicitly given dual differential. The builder
 * receives the function context (base generators then duals, named after the
 * module) and fills in the values; brackets are then read off. Keeps fixture
 * definitions convention-independent.
 */
inline CurvedLInfinity from_dual(BaseRing base, std::vector<Generator> module, int W,
                                 const std::function<void(const CtxPtr&, Derivation&)>& fill) {
    CurvedLInfinity shell(base, module);
    CEComplex ce;
    ce.ctx = ce_context(shell);
    ce.W = W;
    ce.base_ctx = base.ctx;
    ce.module = module;
    for (int i = 0; i < base.ctx->size(); ++i)
        ce.base_ids.push_back(ce.ctx->id(base.ctx->gen(i).name));
    for (const Generator& m : module) ce.xi_of_module.push_back(ce.ctx->id(m.name));
    ce.d = Derivation(ce.ctx, 1, W);
    fill(ce.ctx, ce.d);
    for (const auto& [id, p] : ce.d.square_on_generators())
        throw StructureError("fixture dual differential does not square to zero on '" +
                             ce.ctx->gen(id).name + "'");
    return extract_brackets(ce, base);
}

/**
 * Curved fixture over the exterior base on eta1, eta2 (degree 1, weight 2 so
 * the curvature strictly raises weight): v, w in degree 1, dual differential
 *   d xi_v = eta1 + eta2 xi_w + eta1 xi_v xi_w,   d xi_w = eta1 xi_w^2,
 * which squares to zero. Carries curvature, a unary bracket with ideal
 * coefficient, a mixed binary bracket, and a repeated-input binary bracket.
 */
inline CurvedLInfinity curved(int W = kDefaultTruncationWeight) {
    BaseRing base =
        BaseRing::free_graded({Generator{"eta1", 1, 2}, Generator{"eta2", 1, 2}}, W);
    return from_dual(base, {Generator{"v", 1}, Generator{"w", 1}}, W,
                     [&](const CtxPtr& ctx, Derivation& d) {
                         auto G = [&](const char* n) {
                             return Poly::generator(ctx, ctx->id(n), d.truncation_weight());
                         };
                         Poly dv = G("eta1") + G("eta2") * G("w") + G("eta1") * G("v") * G("w");
                         Poly dw = G("eta1") * G("w") * G("w");
                         d.set_value(ctx->id("v"), dv);
                         d.set_value(ctx->id("w"), dw);
                     });
}

/**
 * Nice fixture without curvature: module p, q in degree 1 over the exterior
 * base on n1, n2 (degree 1, weight 2), dual differential
 *   d xi_p = n1 xi_p^2 + n2 xi_p xi_q,   d xi_q = n1 xi_p xi_q + n2 xi_q^2,
 * which squares to zero by anticommutation of the base factors. The reduced
 * complex has cohomology of rank 2 in degree 1, so the algebra is nice with
 * two coordinate directions and no doubly-shifted ones.
 */
inline CurvedLInfinity nice2(int W = kDefaultTruncationWeight) {
    BaseRing base =
        BaseRing::free_graded({Generator{"n1", 1, 2}, Generator{"n2", 1, 2}}, W);
    return from_dual(base, {Generator{"p", 1}, Generator{"q", 1}}, W,
                     [&](const CtxPtr& ctx, Derivation& d) {
                         auto G = [&](const char* n) {
                             return Poly::generator(ctx, ctx->id(n), d.truncation_weight());
                         };
                         d.set_value(ctx->id("p"),
                                     G("n1") * G("p") * G("p") + G("n2") * G("p") * G("q"));
                         d.set_value(ctx->id("q"),
                                     G("n1") * G("p") * G("q") + G("n2") * G("q") * G("q"));
                     });
}

/**
 * Homotopy fixture with a genuine trinary bracket: module a1..a5 in degree 0
 * and m in degree -1, dual differential
 *   d xi4 = xi1 xi2,   d xi5 = xi3 xi4 + theta,   d theta = xi1 xi2 xi3,
 * where theta is the dual of m. Exercises the interplay of the binary
 * Jacobiator with the unary image of the trinary bracket.
 */
inline CurvedLInfinity homotopy3(int W = kDefaultTruncationWeight) {
    return from_dual(
        BaseRing::rationals(W),
        {Generator{"a1", 0}, Generator{"a2", 0}, Generator{"a3", 0}, Generator{"a4", 0},
         Generator{"a5", 0}, Generator{"m", -1}},
        W, [&](const CtxPtr& ctx, Derivation& d) {
            auto G = [&](const char* n) {
                return Poly::generator(ctx, ctx->id(n), d.truncation_weight());
            };
            d.set_value(ctx->id("a4"), G("a1") * G("a2"));
            d.set_value(ctx->id("a5"), G("a3") * G("a4") + G("m"));
            d.set_value(ctx->id("m"), G("a1") * G("a2") * G("a3"));
        });
}

}  // namespace fixtures
