#pragma once

/**
 * Exact coefficient arithmetic and error taxonomy for the workbench.
 *
 * A Coefficient is an exact rational together with an integer exponent of
 * (2*pi*i) carried symbolically; sums require equal exponents, products add
 * them. No floating point enters this type.
 */

#include <boost/multiprecision/cpp_int.hpp>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace linfty {

using Rational = boost::multiprecision::cpp_rational;
using Integer = boost::multiprecision::cpp_int;

/******** errors ********/

/* Base class; `what` carries the diagnostic. */
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/* Bad arguments / unsupported combination (CLI exit code 2). */
struct ArgumentError : Error {
    explicit ArgumentError(const std::string& msg) : Error("argument: " + msg) {}
};

/* Input file malformed (CLI exit code 3). */
struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error("parse: " + msg) {}
};

/* A structural invariant of the data failed (CLI exit code 1). */
struct StructureError : Error {
    explicit StructureError(const std::string& msg) : Error("structure: " + msg) {}
};

/* Exact-arithmetic misuse, e.g. adding unequal (2*pi*i) exponents. */
struct ArithmeticError : Error {
    explicit ArithmeticError(const std::string& msg) : Error("arithmetic: " + msg) {}
};

/******** rational helpers ********/

inline std::string rat_str(const Rational& r) { return r.str(); }

inline Rational parse_rational(const std::string& s) {
    try {
        return Rational(s);
    } catch (const std::exception&) {
        throw ParseError("bad rational '" + s + "'");
    }
}

inline Rational rat_pow(const Rational& r, int n) {
    if (n < 0) {
        if (r == 0) throw ArithmeticError("0^negative");
        return Rational(1) / rat_pow(r, -n);
    }
    Rational acc(1), base(r);
    while (n) {
        if (n & 1) acc *= base;
        base *= base;
        n >>= 1;
    }
    return acc;
}

inline Integer factorial(int n) {
    Integer acc(1);
    for (int i = 2; i <= n; ++i) acc *= i;
    return acc;
}

inline Integer binomial(int n, int k) {
    if (k < 0 || k > n) return Integer(0);
    Integer acc(1);
    for (int i = 0; i < k; ++i) { acc *= (n - i); acc /= (i + 1); }
    return acc;
}

/******** Coefficient ********/

/**
 * Exact rational times (2*pi*i)^twoPiI. The zero coefficient is normalized
 * to exponent 0 so it can absorb into any sum.
 */
struct Coefficient {
    Rational rational{0};
    int twoPiI = 0;

    Coefficient() = default;
    Coefficient(Rational r, int e = 0) : rational(std::move(r)), twoPiI(e) {
        if (rational == 0) twoPiI = 0;
    }
    Coefficient(int n) : rational(n), twoPiI(0) {}  // NOLINT: implicit by design

    bool is_zero() const { return rational == 0; }

    Coefficient operator-() const { return Coefficient(-rational, twoPiI); }

    Coefficient& operator+=(const Coefficient& o) {
        if (o.is_zero()) return *this;
        if (is_zero()) { *this = o; return *this; }
        if (twoPiI != o.twoPiI)
            throw ArithmeticError("sum of unequal (2pi i) exponents " +
                                  std::to_string(twoPiI) + " vs " + std::to_string(o.twoPiI));
        rational += o.rational;
        if (rational == 0) twoPiI = 0;
        return *this;
    }
    Coefficient& operator*=(const Coefficient& o) {
        if (is_zero() || o.is_zero()) { *this = Coefficient(); return *this; }
        rational *= o.rational;
        twoPiI += o.twoPiI;
        return *this;
    }
    friend Coefficient operator+(Coefficient a, const Coefficient& b) { a += b; return a; }
    friend Coefficient operator*(Coefficient a, const Coefficient& b) { a *= b; return a; }
    friend bool operator==(const Coefficient& a, const Coefficient& b) {
        return a.rational == b.rational && a.twoPiI == b.twoPiI;
    }
    friend bool operator!=(const Coefficient& a, const Coefficient& b) { return !(a == b); }

    std::string str() const {
        std::string s = rat_str(rational);
        if (twoPiI != 0) s += " * (2pi i)^" + std::to_string(twoPiI);
        return s;
    }
};

}  // namespace linfty
