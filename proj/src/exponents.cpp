#include "bec/exponents.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace bec {

std::string to_string(const Rational& q)
{
    if (q.denominator() == 1) return std::to_string(q.numerator());
    return std::to_string(q.numerator()) + "/" + std::to_string(q.denominator());
}

Rational parse_rational(const std::string& text)
{
    auto parse_int = [&](std::string_view s) {
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
            throw std::invalid_argument("parse_rational: bad rational '" + text + "'");
        return v;
    };
    std::string_view s(text);
    auto slash = s.find('/');
    if (slash == std::string_view::npos) return Rational(parse_int(s));
    std::int64_t den = parse_int(s.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("parse_rational: zero denominator");
    return Rational(parse_int(s.substr(0, slash)), den);
}

double to_double(const Rational& q)
{
    return static_cast<double>(q.numerator()) / static_cast<double>(q.denominator());
}

std::strong_ordering operator<=>(const Dual& a, const Dual& b)
{
    if (a.value != b.value) return a.value < b.value ? std::strong_ordering::less : std::strong_ordering::greater;
    if (a.delta != b.delta) return a.delta < b.delta ? std::strong_ordering::less : std::strong_ordering::greater;
    return std::strong_ordering::equal;
}

std::string to_string(const Dual& x)
{
    std::string s = to_string(x.value);
    if (x.delta != Rational(0)) s += (x.delta > Rational(0) ? "+" : "") + to_string(x.delta) + "d";
    return s;
}

Monomial Monomial::pow(const Rational& q) const
{
    return {n * q, b * q, log * q};
}

Monomial Monomial::pow(const Dual& q) const
{
    if (q.is_real()) return pow(q.value);
    if (!n.is_real() || !b.is_real())
        throw std::domain_error("Monomial::pow: product of two delta parts");
    return {Dual(n.value * q.value, n.value * q.delta), Dual(b.value * q.value, b.value * q.delta),
            log * q.value};
}

Monomial Monomial::substitute(const Rational& r) const
{
    return {n + b * r, Dual(), log};
}

double Monomial::evaluate(double N, double B, double delta) const
{
    double ln = std::log(N);
    return std::exp(n.at(delta) * ln + b.at(delta) * std::log(B)) * std::pow(ln, to_double(log));
}

Monomial operator*(const Monomial& x, const Monomial& y)
{
    return {x.n + y.n, x.b + y.b, x.log + y.log};
}

std::strong_ordering compare(const Monomial& x, const Monomial& y)
{
    if (auto c = x.n <=> y.n; c != 0) return c;
    if (x.log != y.log) return x.log < y.log ? std::strong_ordering::less : std::strong_ordering::greater;
    return x.b <=> y.b;
}

bool vanishes(const Monomial& m)
{
    if (m.n != Dual()) return m.n < Dual();
    return m.log < Rational(0);
}

bool bounded(const Monomial& m)
{
    if (m.n != Dual()) return m.n < Dual();
    return m.log <= Rational(0);
}

std::string to_string(const Monomial& m)
{
    std::string s = "N^(" + to_string(m.n) + ")";
    if (m.b != Dual()) s += " B^(" + to_string(m.b) + ")";
    if (m.log != Rational(0)) s += " lnN^(" + to_string(m.log) + ")";
    return s;
}

Posynomial Posynomial::pow(const Rational& q) const
{
    if (q <= Rational(0) && terms_.size() != 1)
        throw std::domain_error("Posynomial::pow: nonpositive power of a sum");
    std::vector<Monomial> out;
    out.reserve(terms_.size());
    for (const auto& m : terms_) out.push_back(m.pow(q));
    return out;
}

Monomial Posynomial::dominant() const
{
    if (terms_.empty()) throw std::domain_error("Posynomial::dominant: empty");
    return *std::max_element(terms_.begin(), terms_.end(),
                             [](const Monomial& x, const Monomial& y) { return compare(x, y) < 0; });
}

bool Posynomial::vanishes() const
{
    return std::all_of(terms_.begin(), terms_.end(), [](const Monomial& m) { return bec::vanishes(m); });
}

bool Posynomial::bounded() const
{
    return std::all_of(terms_.begin(), terms_.end(), [](const Monomial& m) { return bec::bounded(m); });
}

Posynomial operator+(const Posynomial& x, const Posynomial& y)
{
    std::vector<Monomial> out = x.terms_;
    out.insert(out.end(), y.terms_.begin(), y.terms_.end());
    return out;
}

Posynomial operator*(const Posynomial& x, const Posynomial& y)
{
    std::vector<Monomial> out;
    out.reserve(x.terms_.size() * y.terms_.size());
    for (const auto& a : x.terms_)
        for (const auto& b : y.terms_) out.push_back(a * b);
    return out;
}

Posynomial operator/(const Posynomial& x, const Monomial& y)
{
    return x * Posynomial(y.inverse());
}

std::strong_ordering compare(const ScalingTerm& x, const ScalingTerm& y)
{
    if (x.super_small != y.super_small)
        return x.super_small ? std::strong_ordering::less : std::strong_ordering::greater;
    if (x.super_small) return std::strong_ordering::equal;
    return compare(x.size, y.size);
}

bool vanishes(const ScalingTerm& t)
{
    if (t.super_small) return vanishes(t.decay_argument.inverse());
    return vanishes(t.size);
}

std::vector<ScalingTerm> scaling_terms(const std::string& label, const std::string& name,
                                       const Posynomial& p)
{
    std::vector<ScalingTerm> out;
    for (const auto& m : p.terms()) {
        ScalingTerm t;
        t.label = label;
        t.name = name;
        t.size = m;
        out.push_back(t);
    }
    return out;
}

std::pair<Rational, std::size_t> envelope(const std::vector<Monomial>& terms, const Rational& r)
{
    if (terms.empty()) throw std::domain_error("envelope: empty term list");
    std::size_t best = 0;
    Rational value = terms[0].n.value + terms[0].b.value * r;
    for (std::size_t i = 1; i < terms.size(); ++i) {
        Rational v = terms[i].n.value + terms[i].b.value * r;
        if (v > value) {
            value = v;
            best = i;
        }
    }
    return {value, best};
}

}  // namespace bec
