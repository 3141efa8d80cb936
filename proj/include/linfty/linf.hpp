#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "derivation.hpp"
#include "matrix.hpp"
#include "poly.hpp"

namespace linfty {

/******** Base ring ********/

/**
 * Finite graded-commutative coefficient ring: a free graded polynomial ring
 * (odd generators square to zero) truncated by weight, with a distinguished
 * nilpotent ideal spanned by a subset of the generators and an optional
 * square-zero differential.
 */
struct BaseRing {
    CtxPtr ctx;
    std::vector<int> ideal;  // generator ids spanning the ideal
    int W = kDefaultTruncationWeight;
    std::optional<Derivation> dA;

    static BaseRing rationals(int W = kDefaultTruncationWeight) {
        BaseRing b;
        b.ctx = make_context({});
        b.W = W;
        return b;
    }

    /* Free graded base; every generator goes into the ideal. */
    static BaseRing free_graded(std::vector<Generator> gens, int W = kDefaultTruncationWeight) {
        BaseRing b;
        b.ctx = make_context(std::move(gens));
        b.W = W;
        for (int i = 0; i < b.ctx->size(); ++i) b.ideal.push_back(i);
        return b;
    }

    bool is_ideal_gen(int id) const {
        return std::find(ideal.begin(), ideal.end(), id) != ideal.end();
    }

    /* Every monomial of p contains at least one ideal generator. */
    bool in_ideal(const Poly& p) const {
        for (const auto& [m, c] : p.terms()) {
            bool hit = false;
            for (int r : m.word)
                if (is_ideal_gen(ctx->id_of_rank(r))) { hit = true; break; }
            if (!hit) return false;
        }
        return true;
    }

    /**
     * Smallest k with I^k = 0 at the truncation, found by exhaustively
     * multiplying ideal generators. Products of monomial generators stay
     * monomial, so the frontier is a finite monomial set.
     */
    int nilpotency_order() const {
        if (ideal.empty()) return 1;
        std::set<Monomial> frontier;
        frontier.insert(Monomial{});
        int k = 0;
        while (!frontier.empty()) {
            ++k;
            if (k > W + 2)
                throw StructureError("ideal not nilpotent at truncation weight " +
                                     std::to_string(W));
            std::set<Monomial> next;
            for (const Monomial& m : frontier)
                for (int id : ideal) {
                    Poly p(ctx, W);
                    p.add_monomial(m, Coefficient(1));
                    p = p * Poly::generator(ctx, id, W);
                    for (const auto& [n, c] : p.terms()) next.insert(n);
                }
            frontier = std::move(next);
        }
        return k;
    }

    void validate() const {
        for (int id : ideal)
            if (id < 0 || id >= ctx->size()) throw StructureError("ideal id out of range");
        if (dA) {
            require_same_ctx(ctx, dA->ctx());
            if (dA->degree() != 1) throw StructureError("base differential must have degree +1");
            if (!dA->square_on_generators().empty())
                throw StructureError("base differential does not square to zero");
        }
        nilpotency_order();  // throws if not nilpotent
    }

    /* Quotient by the ideal: drop ideal generators and terms containing them. */
    BaseRing reduced() const {
        std::vector<Generator> keep;
        for (int i = 0; i < ctx->size(); ++i)
            if (!is_ideal_gen(i)) keep.push_back(ctx->gen(i));
        BaseRing r;
        r.ctx = make_context(std::move(keep));
        r.W = W;
        return r;
    }

    /* Image of a coefficient polynomial in the reduced ring. */
    Poly reduce(const Poly& p, const BaseRing& target) const {
        Poly r(target.ctx, W);
        for (const auto& [m, c] : p.terms()) {
            bool drop = false;
            for (int rk : m.word)
                if (is_ideal_gen(ctx->id_of_rank(rk))) { drop = true; break; }
            if (drop) continue;
            Monomial n;
            n.hbar = m.hbar;
            n.u = m.u;
            for (int rk : m.word)
                n.word.push_back(target.ctx->rank(target.ctx->id(ctx->gen_of_rank(rk).name)));
            std::sort(n.word.begin(), n.word.end());
            r.add_monomial(n, c);
        }
        return r;
    }
};

/******** Bracket tables ********/

/* An element of V with coefficients in front: module index -> coefficient. */
using BracketValue = std::map<int, Poly>;

inline void bv_accumulate(BracketValue& acc, int idx, const Poly& p) {
    if (p.is_zero()) return;
    auto it = acc.find(idx);
    if (it == acc.end()) acc.emplace(idx, p);
    else {
        it->second += p;
        if (it->second.is_zero()) acc.erase(it);
    }
}

inline BracketValue bv_sub(BracketValue a, const BracketValue& b) {
    for (const auto& [i, p] : b) bv_accumulate(a, i, -p);
    return a;
}

inline bool bv_zero(const BracketValue& v) {
    for (const auto& [i, p] : v)
        if (!p.is_zero()) return false;
    return true;
}

/**
 * Antisymmetry convention for bracket inputs: swapping adjacent arguments x,y
 * multiplies the value by -(-1)^{|x||y|}. Repeated arguments of even degree
 * force the value to zero; odd-degree repeats are allowed.
 */
inline int normalize_bracket_tuple(std::vector<int>& t, const std::vector<int>& degrees) {
    int sign = 1;
    for (size_t i = 1; i < t.size(); ++i) {
        size_t j = i;
        while (j > 0 && t[j - 1] > t[j]) {
            const bool bothodd = (degrees[t[j - 1]] % 2 != 0) && (degrees[t[j]] % 2 != 0);
            sign = -(bothodd ? -sign : sign);
            std::swap(t[j - 1], t[j]);
            --j;
        }
    }
    for (size_t i = 1; i < t.size(); ++i)
        if (t[i] == t[i - 1] && degrees[t[i]] % 2 == 0) return 0;
    return sign;
}

/**
 * Sign of dualizing an n-ary bracket entry on the canonical tuple (a_1..a_n)
 * into the differential on dual generators: prod_i (-1)^{(n-i)|a_i|} with i
 * counted from 1. Calibrated so that a square-zero dual differential makes
 * the displayed three-term bracket identity hold verbatim.
 */
inline int dualization_sign(int n, const std::vector<int>& input_degrees) {
    int s = 1;
    for (int i = 0; i < n; ++i)
        if (input_degrees[i] % 2 != 0 && (n - 1 - i) % 2 != 0) s = -s;
    return s;
}

/******** Pairing ********/

struct PairingSpec {
    int degree = -2;  // -2 or -3
    std::map<std::pair<int, int>, Rational> values;  // ordered (a, b) -> <a,b>

    Rational value(int a, int b) const {
        auto it = values.find({a, b});
        return it == values.end() ? Rational(0) : it->second;
    }
};

/******** Curved L-infinity algebra ********/

class CurvedLInfinity {
public:
    BaseRing base;
    std::vector<Generator> module;
    // n -> canonical input tuple (ascending module indices) -> value
    std::map<int, std::map<std::vector<int>, BracketValue>> brackets;
    std::optional<PairingSpec> pairing;

    CurvedLInfinity() = default;
    CurvedLInfinity(BaseRing b, std::vector<Generator> mod)
        : base(std::move(b)), module(std::move(mod)) {
        std::set<std::string> names;
        for (const Generator& g : module) {
            if (!names.insert(g.name).second)
                throw StructureError("duplicate module generator '" + g.name + "'");
            if (base.ctx->has(g.name))
                throw StructureError("module generator '" + g.name + "' collides with base");
            if (g.weight <= 0)
                throw StructureError("module generator '" + g.name + "' has non-positive weight");
        }
    }

    int dim() const { return static_cast<int>(module.size()); }

    int module_id(const std::string& name) const {
        for (int i = 0; i < dim(); ++i)
            if (module[i].name == name) return i;
        throw ArgumentError("unknown module generator '" + name + "'");
    }

    std::vector<int> module_degrees() const {
        std::vector<int> d(module.size());
        for (size_t i = 0; i < module.size(); ++i) d[i] = module[i].degree;
        return d;
    }

    Poly base_unit(const Rational& c = Rational(1)) const {
        return Poly::unit(base.ctx, Coefficient(c), base.W);
    }

    /* Accumulate coeff * e_out into l_n(inputs); inputs in any order. */
    void add_bracket(int n, std::vector<int> inputs, int out, Poly coeff) {
        if (static_cast<int>(inputs.size()) != n)
            throw ArgumentError("bracket arity mismatch");
        require_same_ctx(base.ctx, coeff.ctx());
        if (coeff.is_zero()) return;
        const auto degs = module_degrees();
        int sign = normalize_bracket_tuple(inputs, degs);
        if (sign == 0)
            throw StructureError("bracket entry on a tuple annihilated by antisymmetry (n=" +
                                 std::to_string(n) + ")");
        auto cd = coeff.homogeneous_degree();
        if (!cd) throw StructureError("bracket coefficient must be homogeneous");
        int insum = 0;
        for (int i : inputs) insum += degs[i];
        if (*cd + module[out].degree != 2 - n + insum) {
            std::string names;
            for (int i : inputs) names += module[i].name + " ";
            throw StructureError("bracket degree violation at (n=" + std::to_string(n) +
                                 ", inputs= " + names + "-> " + module[out].name + ")");
        }
        if (sign < 0) coeff = -coeff;
        bv_accumulate(brackets[n][inputs], out, coeff);
        prune(n, inputs);
    }

    void add_bracket(int n, const std::vector<std::string>& in_names, const std::string& out,
                     const Rational& c, const Poly* base_mono = nullptr) {
        std::vector<int> ids;
        for (const auto& nm : in_names) ids.push_back(module_id(nm));
        Poly coeff = base_mono ? *base_mono : base_unit();
        coeff.scale(Coefficient(c));
        add_bracket(n, ids, module_id(out), std::move(coeff));
    }

    /* Value on a canonical-or-not tuple, derived by antisymmetry. */
    BracketValue bracket_value(int n, std::vector<int> inputs) const {
        const auto degs = module_degrees();
        int sign = normalize_bracket_tuple(inputs, degs);
        if (sign == 0) return {};
        auto nt = brackets.find(n);
        if (nt == brackets.end()) return {};
        auto it = nt->second.find(inputs);
        if (it == nt->second.end()) return {};
        BracketValue r = it->second;
        if (sign < 0)
            for (auto& [i, p] : r) p = -p;
        return r;
    }

    bool has_brackets(int n) const {
        auto it = brackets.find(n);
        if (it == brackets.end()) return false;
        for (const auto& [t, v] : it->second)
            if (!bv_zero(v)) return true;
        return false;
    }

    /**
     * Multilinear evaluation on module elements with polynomial coefficients
     * (written in front). Pulling a coefficient q out of slot j passes the
     * operator symbol and the preceding inputs:
     * sign (-1)^{|q| (n + |b_1| + ... + |b_{j-1}|)}.
     */
    BracketValue eval(int n, const std::vector<BracketValue>& args,
                      const CtxPtr& coeff_ctx) const {
        if (static_cast<int>(args.size()) != n) throw ArgumentError("eval arity mismatch");
        auto nt = brackets.find(n);
        BracketValue result;
        if (nt == brackets.end()) return result;
        const auto degs = module_degrees();
        // split every argument entry into parity-homogeneous coefficient parts
        struct Slot { int idx; Poly coeff; int cdeg; };
        std::vector<std::vector<Slot>> slots(n);
        for (int j = 0; j < n; ++j)
            for (const auto& [idx, p] : args[j])
                for (bool odd : {false, true}) {
                    Poly part = p.parity_part(odd);
                    if (!part.is_zero()) slots[j].push_back({idx, part, odd ? 1 : 0});
                }
        std::vector<int> pick(n, 0);
        for (int j = 0; j < n; ++j)
            if (slots[j].empty()) return result;
        while (true) {
            // transport coefficients out to the left
            int sign = 1;
            int degsum = 0;
            for (int j = 0; j < n; ++j) {
                const Slot& s = slots[j][pick[j]];
                if (s.cdeg % 2 != 0 && (n + degsum) % 2 != 0) sign = -sign;
                degsum += degs[s.idx];
            }
            std::vector<int> tuple;
            for (int j = 0; j < n; ++j) tuple.push_back(slots[j][pick[j]].idx);
            int tsign = normalize_bracket_tuple(tuple, degs);
            if (tsign != 0) {
                auto it = nt->second.find(tuple);
                if (it != nt->second.end()) {
                    Poly qprod = Poly::unit(coeff_ctx, Coefficient(sign * tsign));
                    for (int j = 0; j < n; ++j) qprod = qprod * slots[j][pick[j]].coeff;
                    if (!qprod.is_zero())
                        for (const auto& [outIdx, p] : it->second)
                            bv_accumulate(result, outIdx, qprod * p.transport(coeff_ctx));
                }
            }
            int j = n - 1;
            while (j >= 0 && pick[j] + 1 == static_cast<int>(slots[j].size())) pick[j--] = 0;
            if (j < 0) break;
            ++pick[j];
        }
        return result;
    }

    void validate() const {
        base.validate();
        auto it = brackets.find(0);
        if (it != brackets.end())
            for (const auto& [t, v] : it->second)
                for (const auto& [idx, p] : v)
                    if (!base.in_ideal(p))
                        throw StructureError("curvature coefficient on '" + module[idx].name +
                                             "' does not lie in the ideal");
        // weight filtration: the dual differential preserves weight, strictly
        // increasing it away from the unary part
        for (const auto& [n, tab] : brackets)
            for (const auto& [tuple, value] : tab) {
                int win = 0;
                for (int i : tuple) win += module[i].weight;
                for (const auto& [outIdx, p] : value)
                    for (const auto& [m, c] : p.terms()) {
                        const int lhs = m.weight(*base.ctx) + win;
                        const int rhs = module[outIdx].weight;
                        const bool ok = (n == 1) ? (lhs >= rhs) : (lhs > rhs);
                        if (!ok)
                            throw StructureError(
                                "bracket entry violates the weight filtration at (n=" +
                                std::to_string(n) + ", out=" + module[outIdx].name + ")");
                    }
            }
        if (base.dA)
            for (const auto& [id, v] : base.dA->values())
                for (const auto& [m, c] : v.terms())
                    if (m.weight(*base.ctx) < base.ctx->gen(id).weight)
                        throw StructureError("base differential lowers weight on '" +
                                             base.ctx->gen(id).name + "'");
        if (pairing) {
            if (pairing->degree != -2 && pairing->degree != -3)
                throw StructureError("pairing degree must be -2 or -3");
            SparseMatrix m;
            m.cols = dim();
            for (const auto& [key, val] : pairing->values) {
                if (val == 0) continue;
                if (module[key.first].degree + module[key.second].degree != -pairing->degree)
                    throw StructureError("pairing entry <" + module[key.first].name + ", " +
                                         module[key.second].name + "> violates its degree");
                m.add(key.first, key.second, val);
            }
            if (rank(m) != dim())
                throw StructureError("declared pairing is degenerate");
        }
    }

private:
    void prune(int n, const std::vector<int>& tuple) {
        auto& tab = brackets[n];
        auto it = tab.find(tuple);
        if (it != tab.end() && bv_zero(it->second)) tab.erase(it);
        if (tab.empty()) brackets.erase(n);
    }
};

/******** Chevalley-Eilenberg complex ********/

struct CEComplex {
    CtxPtr ctx;                     // base generators followed by dual generators
    Derivation d;                   // degree +1
    int W = kDefaultTruncationWeight;
    CtxPtr base_ctx;                // coefficient ring
    std::vector<int> base_ids;      // ctx ids of base generators
    std::vector<Generator> module;  // the module basis this complex is dual to
    std::vector<int> xi_of_module;  // module index -> ctx gen id

    bool is_base_id(int id) const {
        return std::find(base_ids.begin(), base_ids.end(), id) != base_ids.end();
    }
    int module_index_of(int ctx_id) const {
        for (size_t i = 0; i < xi_of_module.size(); ++i)
            if (xi_of_module[i] == static_cast<int>(ctx_id)) return static_cast<int>(i);
        throw ArgumentError("context id is not a dual generator");
    }
};

/* The generator context for functions on the formal neighbourhood: base
   generators plus one dual generator of degree 1-|v| per module generator. */
inline CtxPtr ce_context(const CurvedLInfinity& g) {
    std::vector<Generator> gens;
    for (int i = 0; i < g.base.ctx->size(); ++i) gens.push_back(g.base.ctx->gen(i));
    for (const Generator& m : g.module)
        gens.push_back(Generator{m.name, 1 - m.degree, m.weight, m.cx_weight});
    return make_context(std::move(gens));
}

inline CEComplex ce_differential(const CurvedLInfinity& g, int W) {
    CEComplex ce;
    ce.ctx = ce_context(g);
    ce.W = W;
    ce.base_ctx = g.base.ctx;
    ce.module = g.module;
    for (int i = 0; i < g.base.ctx->size(); ++i)
        ce.base_ids.push_back(ce.ctx->id(g.base.ctx->gen(i).name));
    for (const Generator& m : g.module) ce.xi_of_module.push_back(ce.ctx->id(m.name));

    ce.d = Derivation(ce.ctx, 1, W);
    if (g.base.dA)
        for (const auto& [id, v] : g.base.dA->values()) {
            Poly tv = v.transport(ce.ctx).truncate(std::min(W, v.truncation_weight()));
            // the value is hbar-free; store it with an open hbar window so that
            // applying d to hbar-carrying arguments never clips their terms
            ce.d.set_value(ce.ctx->id(g.base.ctx->gen(id).name),
                           tv.with_bounds(W, -kNoHbarCap, kNoHbarCap));
        }

    const auto degs = g.module_degrees();
    std::map<int, Poly> vals;  // module index -> d(xi)
    for (const auto& [n, table] : g.brackets)
        for (const auto& [tuple, value] : table) {
            std::vector<int> tdegs;
            for (int i : tuple) tdegs.push_back(degs[i]);
            const int s = dualization_sign(n, tdegs);
            Poly word = Poly::unit(ce.ctx, Coefficient(s), W);
            for (int i : tuple) word = word * Poly::generator(ce.ctx, ce.xi_of_module[i], W);
            for (const auto& [outIdx, p] : value) {
                Poly term = p.transport(ce.ctx).with_bounds(W, 0, 0) * word;
                if (term.is_zero()) continue;
                auto it = vals.find(outIdx);
                if (it == vals.end()) vals.emplace(outIdx, term);
                else it->second += term;
            }
        }
    for (auto& [idx, v] : vals)
        if (!v.is_zero())
            ce.d.set_value(ce.xi_of_module[idx],
                           v.with_bounds(W, -kNoHbarCap, kNoHbarCap));
    return ce;
}

/**
 * Inverse of ce_differential: read a bracket table off a degree +1 derivation.
 * Works monomial by monomial: each monomial of d(xi_c) is matched against the
 * forward image of a unit bracket entry on the tuple it determines, and the
 * coefficient ratio is the bracket coefficient.
 */
inline CurvedLInfinity extract_brackets(const CEComplex& ce, const BaseRing& base) {
    CurvedLInfinity g(base, ce.module);
    if (base.dA || !ce.base_ids.empty()) {
        // base differential, if any, is read off the base generators directly
        Derivation dA(base.ctx, 1, base.W);
        bool any = false;
        for (int id : ce.base_ids) {
            Poly v = ce.d.value(id);
            if (v.is_zero()) continue;
            for (const auto& [m, c] : v.terms())
                for (int rk : m.word)
                    if (!ce.is_base_id(ce.ctx->id_of_rank(rk)))
                        throw StructureError("base differential leaves the base ring");
            dA.set_value(base.ctx->id(ce.ctx->gen(id).name), v.transport(base.ctx));
            any = true;
        }
        if (any) g.base.dA = dA;
    }

    const auto degs = g.module_degrees();
    for (int c = 0; c < g.dim(); ++c) {
        Poly dxi = ce.d.value(ce.xi_of_module[c]);
        for (const auto& [m, q] : dxi.terms()) {
            if (m.hbar != 0 || m.u != 0)
                throw StructureError("differential carries hbar/u decorations");
            // split the word into base part and dual part
            Monomial mb;
            std::vector<int> xi_ids;
            for (int rk : m.word) {
                const int id = ce.ctx->id_of_rank(rk);
                if (ce.is_base_id(id)) mb.word.push_back(base.ctx->rank(base.ctx->id(ce.ctx->gen(id).name)));
                else xi_ids.push_back(id);
            }
            std::sort(mb.word.begin(), mb.word.end());
            std::vector<int> tuple;
            for (int id : xi_ids) tuple.push_back(ce.module_index_of(id));
            std::sort(tuple.begin(), tuple.end());
            const int n = static_cast<int>(tuple.size());
            std::vector<int> tdegs;
            for (int i : tuple) tdegs.push_back(degs[i]);
            // forward image of a unit entry on this tuple with this base monomial
            Poly probe = Poly::unit(ce.ctx, Coefficient(dualization_sign(n, tdegs)), ce.W);
            {
                Poly bm(base.ctx, std::max(base.W, ce.W));
                bm.add_monomial(mb, Coefficient(1));
                probe = probe * bm.transport(ce.ctx).with_bounds(ce.W, 0, 0);
            }
            for (int i : tuple) probe = probe * Poly::generator(ce.ctx, ce.xi_of_module[i], ce.W);
            if (probe.size() != 1)
                throw StructureError("bracket extraction: degenerate probe");
            const auto& [pm, pc] = *probe.terms().begin();
            if (!(pm == m))
                throw StructureError("bracket extraction: probe monomial mismatch");
            Rational ratio = q.rational / pc.rational;
            Poly coeff(base.ctx, std::max(base.W, ce.W));
            coeff.add_monomial(mb, Coefficient(ratio, q.twoPiI - pc.twoPiI));
            g.add_bracket(n, tuple, c, std::move(coeff));
        }
    }
    return g;
}

/******** Verification and residuals ********/

struct ResidualReport {
    std::map<std::string, Poly> residuals;
    bool ok() const { return residuals.empty(); }
    std::string summary() const {
        if (ok()) return "zero residual";
        std::string s = "nonzero residual on:";
        for (const auto& [name, p] : residuals)
            s += " " + name + " (" + std::to_string(p.size()) + " terms)";
        return s;
    }
};

/* d^2 on every generator of the weight-truncated complex. */
inline ResidualReport verify_linfinity(const CurvedLInfinity& g, int W) {
    CEComplex ce = ce_differential(g, W);
    ResidualReport rep;
    for (const auto& [id, p] : ce.d.square_on_generators())
        rep.residuals.emplace(ce.ctx->gen(id).name, p);
    return rep;
}

/**
 * Left side minus right side of the three-term identity relating the
 * Jacobiator of l2 to the contracting homotopy l3:
 *   (-1)^{|x||z|} l2(l2(x,y),z) + (-1)^{|y||z|} l2(l2(z,x),y)
 *     + (-1)^{|x||y|} l2(l2(y,z),x)
 *   = (-1)^{|x||z|+1} [ l1 l3(x,y,z) + l3(l1 x,y,z)
 *     + (-1)^{|x|} l3(x, l1 y, z) + (-1)^{|x|+|y|} l3(x,y,l1 z) ].
 * Only defined when no bracket of arity >= 4 is present.
 */
inline BracketValue jacobi_residual(const CurvedLInfinity& g, int x, int y, int z) {
    for (const auto& [n, tab] : g.brackets)
        if (n >= 4 && g.has_brackets(n))
            throw StructureError("unsupported: bracket of arity " + std::to_string(n) +
                                 " present; use verify_linfinity instead");
    const CtxPtr& C = g.base.ctx;
    auto unit_arg = [&](int i) {
        BracketValue v;
        v.emplace(i, g.base_unit());
        return v;
    };
    auto sgn = [](int e) { return (e % 2 != 0) ? -1 : 1; };
    const auto degs = g.module_degrees();
    const int dx = degs[x], dy = degs[y], dz = degs[z];
    BracketValue X = unit_arg(x), Y = unit_arg(y), Z = unit_arg(z);

    auto scale_bv = [](BracketValue v, int s) {
        if (s == 1) return v;
        for (auto& [i, p] : v) p = -p;
        return v;
    };

    BracketValue lhs;
    {
        BracketValue t1 = g.eval(2, {g.eval(2, {X, Y}, C), Z}, C);
        BracketValue t2 = g.eval(2, {g.eval(2, {Z, X}, C), Y}, C);
        BracketValue t3 = g.eval(2, {g.eval(2, {Y, Z}, C), X}, C);
        for (auto& [i, p] : scale_bv(t1, sgn(dx * dz))) bv_accumulate(lhs, i, p);
        for (auto& [i, p] : scale_bv(t2, sgn(dy * dz))) bv_accumulate(lhs, i, p);
        for (auto& [i, p] : scale_bv(t3, sgn(dx * dy))) bv_accumulate(lhs, i, p);
    }
    BracketValue rhs;
    {
        BracketValue r1 = g.eval(1, {g.eval(3, {X, Y, Z}, C)}, C);
        BracketValue r2 = g.eval(3, {g.eval(1, {X}, C), Y, Z}, C);
        BracketValue r3 = g.eval(3, {X, g.eval(1, {Y}, C), Z}, C);
        BracketValue r4 = g.eval(3, {X, Y, g.eval(1, {Z}, C)}, C);
        for (auto& [i, p] : r1) bv_accumulate(rhs, i, p);
        for (auto& [i, p] : r2) bv_accumulate(rhs, i, p);
        for (auto& [i, p] : scale_bv(r3, sgn(dx))) bv_accumulate(rhs, i, p);
        for (auto& [i, p] : scale_bv(r4, sgn(dx + dy))) bv_accumulate(rhs, i, p);
        rhs = scale_bv(rhs, sgn(dx * dz + 1));
    }
    return bv_sub(lhs, rhs);
}

/* Brackets over the quotient base, with every ideal-coefficient term dropped. */
inline CurvedLInfinity reduce_mod_ideal(const CurvedLInfinity& g) {
    BaseRing rb = g.base.reduced();
    CurvedLInfinity r(rb, g.module);
    r.pairing = g.pairing;
    for (const auto& [n, tab] : g.brackets)
        for (const auto& [tuple, value] : tab)
            for (const auto& [outIdx, p] : value) {
                Poly rp = g.base.reduce(p, rb);
                if (!rp.is_zero()) r.add_bracket(n, tuple, outIdx, std::move(rp));
            }
    return r;
}

/**
 * Residual of the curved Maurer-Cartan equation for a degree-1 element
 * alpha of C*(source) tensor V_target, computed as the failure of the induced
 * generator images to define a cochain map:
 *   residual_m = phi(d_target xi_m) - d_source(alpha_m).
 */
inline std::map<std::string, Poly> maurer_cartan_residual(const CurvedLInfinity& gs,
                                                          const CurvedLInfinity& gt,
                                                          const std::map<int, Poly>& alpha,
                                                          int W) {
    if (!(*gs.base.ctx == *gt.base.ctx))
        throw ArgumentError("source and target must share the base ring");
    CEComplex cs = ce_differential(gs, W);
    CEComplex ct = ce_differential(gt, W);
    // validation: degree and vanishing along the maximal ideal + base ideal
    for (const auto& [mIdx, p] : alpha) {
        if (p.is_zero()) continue;
        require_same_ctx(p.ctx(), cs.ctx);
        const int want = 1 - gt.module[mIdx].degree;
        if (!p.is_homogeneous(want))
            throw ArgumentError("alpha component on '" + gt.module[mIdx].name +
                                "' is not homogeneous of degree " + std::to_string(want));
        for (const auto& [m, c] : p.terms()) {
            bool ok = false;
            for (int rk : m.word) {
                const int id = cs.ctx->id_of_rank(rk);
                if (!cs.is_base_id(id) ||
                    gs.base.is_ideal_gen(gs.base.ctx->id(cs.ctx->gen(id).name))) {
                    ok = true;
                    break;
                }
            }
            if (!ok)
                throw ArgumentError("alpha component on '" + gt.module[mIdx].name +
                                    "' does not vanish modulo the maximal ideal");
        }
    }
    std::map<int, Poly> images;  // target ctx gen id -> image in source ctx
    for (int i = 0; i < gt.dim(); ++i) {
        auto it = alpha.find(i);
        images.emplace(ct.xi_of_module[i],
                       it == alpha.end() ? Poly(cs.ctx, W) : it->second);
    }
    std::map<std::string, Poly> res;
    for (int i = 0; i < gt.dim(); ++i) {
        Poly lhs = ct.d.value(ct.xi_of_module[i]).substitute(cs.ctx, images);
        auto it = alpha.find(i);
        Poly rhs = (it == alpha.end()) ? Poly(cs.ctx, W) : cs.d.apply(it->second);
        Poly r = lhs - rhs;
        if (!r.is_zero()) res.emplace(gt.module[i].name, r);
    }
    return res;
}

/******** Module-level complex and reduced cohomology ********/

/* Ranks of the cohomology of (V_red, l1_red); key = cohomological degree. */
inline std::map<int, int> reduced_module_cohomology(const CurvedLInfinity& g) {
    CurvedLInfinity red = reduce_mod_ideal(g);
    // l1 as a constant matrix on the module basis
    std::map<int, std::vector<int>> by_degree;  // degree -> module indices
    for (int i = 0; i < red.dim(); ++i) by_degree[red.module[i].degree].push_back(i);
    std::map<int, std::map<int, int>> pos;  // degree -> (module index -> position)
    for (auto& [d, v] : by_degree)
        for (size_t k = 0; k < v.size(); ++k) pos[d][v[k]] = static_cast<int>(k);

    std::map<int, SparseMatrix> mats;  // degree d: block V_d -> V_{d+1}
    for (auto& [d, v] : by_degree) {
        SparseMatrix m;
        m.cols = 0;
        auto jt = by_degree.find(d + 1);
        m.cols = (jt == by_degree.end()) ? 0 : static_cast<int>(jt->second.size());
        m.rows.resize(v.size());
        for (size_t k = 0; k < v.size(); ++k) {
            BracketValue img = red.bracket_value(1, {v[k]});
            for (const auto& [outIdx, p] : img) {
                Rational c(0);
                for (const auto& [mono, coef] : p.terms()) {
                    if (!mono.is_unit())
                        throw StructureError("reduced l1 is not constant-coefficient");
                    c = coef.rational;
                }
                if (c != 0) m.add(static_cast<int>(k), pos[d + 1][outIdx], c);
            }
        }
        mats.emplace(d, std::move(m));
    }
    std::map<int, int> ranks;
    for (auto& [d, m] : mats) ranks[d] = rank(m);
    std::map<int, int> betti;
    for (auto& [d, v] : by_degree) {
        int n = static_cast<int>(v.size());
        int r_out = ranks.count(d) ? ranks[d] : 0;
        int r_in = ranks.count(d - 1) ? ranks[d - 1] : 0;
        int b = n - r_out - r_in;
        if (b != 0) betti[d] = b;
    }
    return betti;
}

/******** Pairing invariance ********/

/**
 * Invariance residual <l2(a,b),c> + (-1)^{|a||b|} <b, l2(a,c)> over all basis
 * triples; the worst (largest absolute) residual is returned with its triple.
 */
struct PairingInvarianceReport {
    bool ok = true;
    std::string worst;
    Rational residual = Rational(0);
};

inline PairingInvarianceReport pairing_invariance(const CurvedLInfinity& g) {
    if (!g.pairing) throw ArgumentError("algebra carries no pairing");
    PairingInvarianceReport rep;
    const auto degs = g.module_degrees();
    auto const_coeff = [](const Poly& p) {
        Rational c(0);
        for (const auto& [m, co] : p.terms()) {
            if (!m.is_unit())
                throw StructureError("pairing invariance needs constant bracket coefficients");
            c = co.rational;
        }
        return c;
    };
    const CtxPtr& C = g.base.ctx;
    auto unit_arg = [&](int i) {
        BracketValue v;
        v.emplace(i, g.base_unit());
        return v;
    };
    for (int a = 0; a < g.dim(); ++a)
        for (int b = 0; b < g.dim(); ++b)
            for (int c = 0; c < g.dim(); ++c) {
                Rational r(0);
                for (const auto& [i, p] : g.eval(2, {unit_arg(a), unit_arg(b)}, C))
                    r += const_coeff(p) * g.pairing->value(i, c);
                Rational s(0);
                for (const auto& [i, p] : g.eval(2, {unit_arg(a), unit_arg(c)}, C))
                    s += g.pairing->value(b, i) * const_coeff(p);
                Rational total =
                    ((degs[a] * degs[b]) % 2 != 0) ? Rational(r - s) : Rational(r + s);
                if (total != 0) {
                    rep.ok = false;
                    if (abs(total) > abs(rep.residual)) {
                        rep.residual = total;
                        rep.worst = g.module[a].name + "," + g.module[b].name + "," +
                                    g.module[c].name;
                    }
                }
            }
    return rep;
}

}  // namespace linfty
