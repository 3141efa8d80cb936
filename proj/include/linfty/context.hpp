#pragma once

/**
 * Generator contexts: the named, graded, weighted variable sets every
 * polynomial refers to. A context is immutable once built and shared by
 * pointer; canonical monomial order is (degree, name), precomputed as a rank
 * permutation at construction.
 */

#include <algorithm>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "core.hpp"

namespace linfty {

struct Generator {
    std::string name;
    int degree = 0;
    int weight = 1;        // filtration weight, positive
    int cx_weight = 0;     // C*-weight as a function (cotangent-fiber generators carry -1)

    bool odd() const { return (degree % 2 + 2) % 2 == 1; }
};

class GeneratorContext;
using CtxPtr = std::shared_ptr<const GeneratorContext>;

class GeneratorContext {
public:
    explicit GeneratorContext(std::vector<Generator> gens) : gens_(std::move(gens)) {
        const int n = static_cast<int>(gens_.size());
        for (int i = 0; i < n; ++i) {
            if (gens_[i].weight <= 0)
                throw StructureError("generator '" + gens_[i].name + "' has non-positive weight");
            if (!by_name_.emplace(gens_[i].name, i).second)
                throw StructureError("duplicate generator name '" + gens_[i].name + "'");
        }
        // canonical order: (degree, name); rank_of_id_[id] = position in that order
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (gens_[a].degree != gens_[b].degree) return gens_[a].degree < gens_[b].degree;
            return gens_[a].name < gens_[b].name;
        });
        id_of_rank_ = order;
        rank_of_id_.resize(n);
        for (int r = 0; r < n; ++r) rank_of_id_[order[r]] = r;
    }

    int size() const { return static_cast<int>(gens_.size()); }

    int id(const std::string& name) const {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) throw ArgumentError("unknown generator '" + name + "'");
        return it->second;
    }
    bool has(const std::string& name) const { return by_name_.count(name) != 0; }

    const Generator& gen(int id) const { return gens_.at(id); }
    const std::vector<Generator>& gens() const { return gens_; }

    int rank(int id) const { return rank_of_id_.at(id); }
    int id_of_rank(int r) const { return id_of_rank_.at(r); }
    const Generator& gen_of_rank(int r) const { return gens_[id_of_rank_.at(r)]; }

    // parity of the generator at canonical rank r
    bool odd_rank(int r) const { return gen_of_rank(r).odd(); }

    friend bool operator==(const GeneratorContext& a, const GeneratorContext& b) {
        if (a.gens_.size() != b.gens_.size()) return false;
        for (size_t i = 0; i < a.gens_.size(); ++i) {
            const Generator &x = a.gens_[i], &y = b.gens_[i];
            if (x.name != y.name || x.degree != y.degree || x.weight != y.weight ||
                x.cx_weight != y.cx_weight)
                return false;
        }
        return true;
    }

private:
    std::vector<Generator> gens_;
    std::map<std::string, int> by_name_;
    std::vector<int> rank_of_id_;
    std::vector<int> id_of_rank_;
};

inline CtxPtr make_context(std::vector<Generator> gens) {
    return std::make_shared<GeneratorContext>(std::move(gens));
}

/* Two polynomials may combine iff their contexts are the same object or equal by value. */
inline void require_same_ctx(const CtxPtr& a, const CtxPtr& b) {
    if (a == b) return;
    if (a && b && *a == *b) return;
    throw ArgumentError("generator context mismatch");
}

/******** Koszul sign ********/

/**
 * Koszul sign of a permutation acting on homogeneous elements of the listed
 * degrees: product of (-1)^{|m_i||m_j|} over inversions (i<j, sigma(i)>sigma(j)).
 * `perm[i]` is the destination position of input slot i.
 */
inline int koszul_sign(const std::vector<int>& perm, const std::vector<int>& degrees) {
    if (perm.size() != degrees.size())
        throw ArgumentError("koszul_sign: permutation/degree length mismatch");
    const int n = static_cast<int>(perm.size());
    std::vector<char> seen(n, 0);
    for (int p : perm) {
        if (p < 0 || p >= n || seen[p]) throw ArgumentError("koszul_sign: invalid permutation");
        seen[p] = 1;
    }
    int sign = 1;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (perm[i] > perm[j] && (degrees[i] % 2) && (degrees[j] % 2)) sign = -sign;
    return sign;
}

}  // namespace linfty
