#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include <boost/rational.hpp>

namespace bec {

using Rational = boost::rational<std::int64_t>;

std::string to_string(const Rational& q);
// accepts "p", "p/q" and "-p/q"
Rational parse_rational(const std::string& text);
double to_double(const Rational& q);

// value + delta * d with d > 0 infinitesimal; ordered lexicographically
struct Dual {
    Rational value{0};
    Rational delta{0};

    Dual() = default;
    Dual(Rational v, Rational d = Rational(0)) : value(v), delta(d) {}
    Dual(std::int64_t v) : value(v) {}

    bool is_real() const { return delta == Rational(0); }
    double at(double d) const { return to_double(value) + to_double(delta) * d; }

    friend Dual operator+(const Dual& a, const Dual& b) { return {a.value + b.value, a.delta + b.delta}; }
    friend Dual operator-(const Dual& a, const Dual& b) { return {a.value - b.value, a.delta - b.delta}; }
    friend Dual operator-(const Dual& a) { return {-a.value, -a.delta}; }
    friend Dual operator*(const Dual& a, const Rational& q) { return {a.value * q, a.delta * q}; }
    friend Dual operator*(const Rational& q, const Dual& a) { return a * q; }
    friend bool operator==(const Dual& a, const Dual& b) = default;
    friend std::strong_ordering operator<=>(const Dual& a, const Dual& b);
};

// "-4/1209+2/3d"
std::string to_string(const Dual& x);

// Asymptotic size N^n B^b (ln N)^log up to a constant factor, with B = beta
// rho^(2/3).  Ordering is for N -> infinity at fixed B >= 1: by n (value,
// then delta), then the log power, then b.
struct Monomial {
    Dual n;
    Dual b;
    Rational log{0};

    static Monomial one() { return {}; }
    static Monomial N(Rational e = 1) { return {Dual(e), Dual(), Rational(0)}; }
    static Monomial B(Rational e = 1) { return {Dual(), Dual(e), Rational(0)}; }
    static Monomial ln_N(Rational e = 1) { return {Dual(), Dual(), e}; }

    Monomial pow(const Rational& q) const;
    // only for monomials without delta parts, or real q
    Monomial pow(const Dual& q) const;
    Monomial inverse() const { return pow(Rational(-1)); }
    // B = N^r
    Monomial substitute(const Rational& r) const;
    double evaluate(double N, double B, double delta = 0.0) const;

    friend Monomial operator*(const Monomial& x, const Monomial& y);
    friend Monomial operator/(const Monomial& x, const Monomial& y) { return x * y.inverse(); }
    friend bool operator==(const Monomial& x, const Monomial& y) = default;
};

std::strong_ordering compare(const Monomial& x, const Monomial& y);
// -> 0 as N -> infinity at fixed B
bool vanishes(const Monomial& m);
// stays bounded as N -> infinity at fixed B
bool bounded(const Monomial& m);
std::string to_string(const Monomial& m);

// sum of monomials up to constants; (x + y)^q ~ x^q + y^q for q > 0
class Posynomial {
public:
    Posynomial() = default;
    Posynomial(Monomial m) : terms_{m} {}
    Posynomial(std::vector<Monomial> terms) : terms_(std::move(terms)) {}

    const std::vector<Monomial>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }
    // throws when q <= 0 and there is more than one term
    Posynomial pow(const Rational& q) const;
    Monomial dominant() const;
    bool vanishes() const;
    bool bounded() const;

    friend Posynomial operator+(const Posynomial& x, const Posynomial& y);
    friend Posynomial operator*(const Posynomial& x, const Posynomial& y);
    friend Posynomial operator/(const Posynomial& x, const Monomial& y);

private:
    std::vector<Monomial> terms_;
};

// One error term relative to the reference scale.  Terms carrying a factor
// exp(-c arg^q) with arg growing polynomially are flagged super_small and
// rank below every power term.
struct ScalingTerm {
    std::string label;
    std::string name;
    std::string coefficient = "const";
    double coefficient_value = 1.0;
    Monomial size;
    bool super_small = false;
    Monomial decay_argument;
};

std::strong_ordering compare(const ScalingTerm& x, const ScalingTerm& y);
bool vanishes(const ScalingTerm& t);

// expands a posynomial into one term per monomial
std::vector<ScalingTerm> scaling_terms(const std::string& label, const std::string& name,
                                       const Posynomial& p);

// largest exponent over a term list after the substitution B = N^r, with the
// delta part dropped; returns the value and the index of the maximiser
std::pair<Rational, std::size_t> envelope(const std::vector<Monomial>& terms, const Rational& r);

}  // namespace bec
