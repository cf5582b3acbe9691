#include "bec/asymptotics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <json.hpp>

#include "bec/ideal_gas.hpp"
#include "bec/parallel.hpp"

namespace bec {

namespace {

constexpr double pi = std::numbers::pi;

Rational q(std::int64_t n, std::int64_t d = 1) { return Rational(n, d); }

// base quantities at L = 1, a_v = 1
namespace sym {
const Monomial one = Monomial::one();
const Monomial N = Monomial::N();
const Monomial aN = Monomial::N(-1);
const Monomial rho = Monomial::N();
const Monomial beta = Monomial::B() * Monomial::N(q(-2, 3));
const Monomial X = aN * rho.pow(q(2)) * beta.pow(q(5, 2));
const Monomial lnN = Monomial::ln_N();
const Monomial R0 = Monomial::N(-1);  // scaled range R0 L / N
}  // namespace sym

Posynomial P(const Monomial& m) { return Posynomial(m); }

}  // namespace

double SystemParams::B() const
{
    return beta * std::pow(rho(), 2.0 / 3.0);
}

void SystemParams::validate() const
{
    if (!(N >= 1) || !std::isfinite(N)) throw std::invalid_argument("N must be >= 1");
    if (!(L > 0) || !std::isfinite(L)) throw std::invalid_argument("L must be positive");
    if (!(a_v > 0) || !std::isfinite(a_v)) throw std::invalid_argument("a_v must be positive");
    if (!(beta > 0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be positive");
}

// ------------------------------------------------------------ main formula

MainFormula main_formula(const SystemParams& p, Ensemble ensemble, double lambda)
{
    p.validate();
    MainFormula out{};
    if (ensemble == Ensemble::canonical) {
        if (p.N != std::round(p.N)) throw std::invalid_argument("canonical ensemble needs integer N");
        CanonicalEnsemble ce = canonical_partition(p.beta, static_cast<std::int64_t>(p.N), p.L, lambda);
        out.F0 = ce.free_energy();
        out.rho0 = ce.occupation(0) / p.volume();
    } else {
        GrandCanonical gc = solve_chemical_potential(p.beta, p.N, p.L, lambda);
        GcObservables obs = gc_observables(gc);
        out.F0 = obs.free_energy;
        out.rho0 = obs.N0 / p.volume();
    }
    double rho = p.rho();
    out.interaction = 4.0 * pi * p.a_N() * p.volume() * (2.0 * rho * rho - out.rho0 * out.rho0);
    out.total = out.F0 + out.interaction;
    return out;
}

double ensemble_gap_bound(const SystemParams& p)
{
    double rho = p.rho();
    double lnN = std::log(std::max(p.N, 2.0));
    double t = rho * lnN / (p.beta * p.L);
    double density_gap = rho * (std::sqrt(t) + lnN / (p.beta * p.L));
    return (std::log1p(p.N) + 1.0) / p.beta + 4.0 * pi * p.a_N() * p.volume() * density_gap;
}

// ------------------------------------------------------------ upper bound

UpperBoundBudget upper_bound_budget(const SystemParams& p, double eta)
{
    p.validate();
    double a = p.a_N(), rho = p.rho(), V = p.volume();
    UpperBoundBudget out{};
    out.b_opt = std::cbrt(a / (p.N * a * rho + 1.0 / p.beta));
    double b = out.b_opt;
    if (!(4.0 * pi / 3.0 * V * rho * rho * a * b * b < 1.0))
        throw std::domain_error("upper_bound_budget: (4 pi/3)|Lambda| rho^2 a_N b^2 < 1 violated");
    if (!(a < b * eta)) throw std::domain_error("upper_bound_budget: a_N < b eta violated");
    out.terms = {
        {"|Lambda| rho^2 a_N^2 / b", V * rho * rho * a * a / b},
        {"|Lambda|^2 rho^4 a_N^2 b^2", V * V * rho * rho * rho * rho * a * a * b * b},
        {"|Lambda| (a_N b)^2 rho^3", V * a * a * b * b * rho * rho * rho},
        {"|Lambda| beta^-1 rho^2 a_N b^2", V * rho * rho * a * b * b / p.beta},
    };
    double sum = 0.0;
    for (const auto& t : out.terms) sum += t.value;
    out.relative_error = sum / (a * V * rho * rho);

    // b^3 = a_N / S with S = N a_N rho + 1/beta
    Posynomial S = P(sym::N * sym::aN * sym::rho) + P(sym::beta.inverse());
    Posynomial main = P(sym::aN.pow(q(2, 3))) * S.pow(q(1, 3));
    Monomial mixed = sym::aN * sym::rho * (sym::aN / (sym::N * sym::aN * sym::rho)).pow(q(2, 3));
    auto add = [&](const std::string& label, const Posynomial& terms) {
        auto t = scaling_terms("upper", label, terms);
        out.scaling.insert(out.scaling.end(), t.begin(), t.end());
    };
    add("a_N/b and b^2 S", main);
    add("a_N rho b^2", P(mixed));
    out.dominant = out.scaling.front().size;
    for (const auto& t : out.scaling)
        if (compare(t.size, out.dominant) > 0) out.dominant = t.size;
    return out;
}

// ------------------------------------------------------------ lower bound parameters

std::string to_string(Regime r)
{
    return r == Regime::moderate ? "moderate" : "cold";
}

Regime parse_regime(const std::string& s)
{
    if (s == "moderate") return Regime::moderate;
    if (s == "cold") return Regime::cold;
    throw std::invalid_argument("unknown regime '" + s + "'");
}

Ansatz default_ansatz()
{
    return {Dual(q(2, 403), q(-1)), Dual(q(1, 403)), Dual(q(-121, 403)), Dual(q(-8, 403))};
}

std::string to_string(const Ansatz& a)
{
    return "kappa=X^(" + to_string(a.kappa) + ") s=beta^(1/2)X^(" + to_string(a.s) + ") b=beta^(1/2)X^(" +
           to_string(a.b) + ") phi=X^(" + to_string(a.phi) + ")";
}

const Parameter& ParameterSet::at(const std::string& name) const
{
    for (const auto& p : params)
        if (p.name == name) return p;
    throw std::out_of_range("no parameter '" + name + "'");
}

Parameter& ParameterSet::at(const std::string& name)
{
    return const_cast<Parameter&>(std::as_const(*this).at(name));
}

std::vector<std::string> ParameterSet::violated() const
{
    std::vector<std::string> out;
    for (const auto& c : conditions)
        if (!c.holds) out.push_back(c.name);
    return out;
}

namespace {

struct Symbols {
    std::map<std::string, Monomial> m;
    const Monomial& operator[](const std::string& k) const { return m.at(k); }
};

Symbols moderate_symbols(const Ansatz& a)
{
    using namespace sym;
    Symbols s;
    s.m["p_c"] = beta.pow(q(-1, 2)) * X.pow(q(81, 403));
    s.m["R"] = rho.pow(q(-1, 3)) * X.pow(q(3, 403));
    s.m["kappa"] = X.pow(a.kappa);
    s.m["s"] = beta.pow(q(1, 2)) * X.pow(a.s);
    s.m["b"] = beta.pow(q(1, 2)) * X.pow(a.b);
    s.m["phi"] = X.pow(a.phi);
    s.m["eps"] = (aN * N / s.m["phi"]).pow(q(1, 2));
    s.m["kappa_prime"] = s.m["kappa"];
    return s;
}

Symbols cold_symbols()
{
    using namespace sym;
    Symbols s;
    Monomial gas = aN.pow(q(3)) * rho;  // a_N^3 rho
    s.m["kappa"] = gas.pow(q(1, 17));
    s.m["R"] = aN * gas.pow(q(-5, 17));
    // min{L^2, beta} = beta for B <= N^(2/3)
    Monomial s2 = beta * gas.pow(Dual(q(1, 17), q(1)));
    s.m["s"] = s2.pow(q(1, 2));
    s.m["eps"] = (s.m["R"] * s2 * rho).pow(q(-1, 2));
    s.m["kappa_prime"] = s.m["kappa"];
    return s;
}

Posynomial substituted(const Posynomial& p, const std::optional<Rational>& r)
{
    if (!r) return p;
    std::vector<Monomial> out;
    for (const auto& m : p.terms()) out.push_back(m.substitute(*r));
    return out;
}

void check(SideCondition& c, const std::optional<Rational>& r)
{
    Posynomial x = substituted(c.quantity, r);
    c.holds = c.strict ? x.vanishes() : x.bounded();
}

std::vector<SideCondition> moderate_conditions(const Symbols& s)
{
    using namespace sym;
    auto small = [](std::string n, Monomial m) { return SideCondition{std::move(n), P(m), true, false}; };
    auto bound = [](std::string n, Monomial m) { return SideCondition{std::move(n), P(m), false, false}; };
    return {
        small("X = a_N rho^2 beta^(5/2) << 1", X),
        small("b p_c >> 1", (s["b"] * s["p_c"]).inverse()),
        small("beta b^-2 << 1", beta / s["b"].pow(q(2))),
        small("R << s", s["R"] / s["s"]),
        bound("s <= L", s["s"]),
        bound("b <= L/2", s["b"]),
        small("kappa' > 0: a_N R0^2 / R^3 << kappa", aN * R0.pow(q(2)) / s["R"].pow(q(3)) / s["kappa"]),
        small("s^2/(beta kappa') << 1", s["s"].pow(q(2)) / (beta * s["kappa"])),
        small("s^2/(L^2 kappa') << 1", s["s"].pow(q(2)) / s["kappa"]),
        small("a_N << phi L/N", aN * N / s["phi"]),
        small("1/phi << 1", s["phi"].inverse()),
        small("R rho^(1/3) << 1", s["R"] * rho.pow(q(1, 3))),
        small("kappa << 1", s["kappa"]),
        bound("p_c <= rho^(1/3)", s["p_c"] / rho.pow(q(1, 3))),
        small("R0 L/N << R", R0 / s["R"]),
        bound("R <= L/2", s["R"]),
        small("s << b", s["s"] / s["b"]),
    };
}

std::vector<SideCondition> cold_conditions(const Symbols& s)
{
    using namespace sym;
    auto small = [](std::string n, Monomial m) { return SideCondition{std::move(n), P(m), true, false}; };
    auto bound = [](std::string n, Monomial m) { return SideCondition{std::move(n), P(m), false, false}; };
    return {
        small("kappa << 1", s["kappa"]),
        small("R << s", s["R"] / s["s"]),
        bound("s <= L", s["s"]),
        small("kappa' > 0: a_N R0^2 / R^3 << kappa", aN * R0.pow(q(2)) / s["R"].pow(q(3)) / s["kappa"]),
        small("s^2/(beta kappa') << 1", s["s"].pow(q(2)) / (beta * s["kappa"])),
        small("s^2/(L^2 kappa') << 1", s["s"].pow(q(2)) / s["kappa"]),
        small("R rho^(1/3) << 1", s["R"] * rho.pow(q(1, 3))),
        small("R0 L/N << R", R0 / s["R"]),
        bound("R <= L/2", s["R"]),
    };
}

}  // namespace

ParameterSet symbolic_parameters(Regime regime, const Ansatz& ansatz, std::optional<Rational> B_exponent)
{
    ParameterSet ps;
    ps.regime = regime;
    ps.ansatz = ansatz;
    if (regime == Regime::moderate) {
        Symbols s = moderate_symbols(ansatz);
        for (const char* n : {"p_c", "R"}) ps.params.push_back({n, s[n], "paper"});
        for (const char* n : {"kappa", "kappa_prime", "s", "b", "phi", "eps"})
            ps.params.push_back({n, s[n], "ansatz"});
        ps.conditions = moderate_conditions(s);
    } else {
        Symbols s = cold_symbols();
        for (const char* n : {"kappa", "kappa_prime", "R", "s", "eps"}) ps.params.push_back({n, s[n], "paper"});
        ps.conditions = cold_conditions(s);
    }
    for (auto& c : ps.conditions) check(c, B_exponent);
    return ps;
}

ParameterSet lower_bound_parameters(const SystemParams& p, Regime regime, const LowerBoundOptions& opt)
{
    p.validate();
    ParameterSet ps = symbolic_parameters(regime, opt.ansatz);
    if (auto bad = ps.violated(); !bad.empty())
        throw std::domain_error("lower_bound_parameters: side condition violated: " + bad.front());
    ps.delta = opt.delta;
    double d = opt.delta;
    double a = p.a_N(), rho = p.rho(), beta = p.beta, L = p.L;
    double R0 = (std::isnan(opt.R0) ? p.a_v : opt.R0) * L / p.N;
    auto set = [&](const std::string& n, double v) { ps.at(n).value = v; };
    double kappa = 0, R = 0;
    if (regime == Regime::moderate) {
        double X = a * rho * rho * std::pow(beta, 2.5);
        GrandCanonical gc = solve_chemical_potential(beta, p.N, L, 0.0);
        ps.mu0 = gc.mu;
        double pc = std::pow(beta, -0.5) * std::pow(X, 81.0 / 403.0);
        if (beta * std::abs(gc.mu) > std::pow(X, 162.0 / 403.0)) {
            ps.pc_zero = true;
            pc = 0.0;
        }
        R = std::pow(rho, -1.0 / 3.0) * std::pow(X, 3.0 / 403.0);
        kappa = std::pow(X, opt.ansatz.kappa.at(d));
        double phi = std::pow(X, opt.ansatz.phi.at(d));
        set("p_c", pc);
        set("R", R);
        set("kappa", kappa);
        set("s", std::sqrt(beta) * std::pow(X, opt.ansatz.s.at(d)));
        set("b", std::sqrt(beta) * std::pow(X, opt.ansatz.b.at(d)));
        set("phi", phi);
        set("eps", std::sqrt(a * p.N / (phi * L)));
    } else {
        double gas = a * a * a * rho;
        kappa = std::pow(gas, 1.0 / 17.0);
        R = a * std::pow(gas, -5.0 / 17.0);
        double s2 = std::min(L * L, beta) * std::pow(gas, 1.0 / 17.0 + d);
        set("kappa", kappa);
        set("R", R);
        set("s", std::sqrt(s2));
        set("eps", 1.0 / std::sqrt(R * s2 * rho));
    }
    set("kappa_prime", kappa - 24.0 * a / (pi * pi) * std::pow(4.0 * R0, 2) / std::pow(R, 3));
    return ps;
}

// ------------------------------------------------------------ error budget

namespace {

struct TermBuilder {
    std::vector<ScalingTerm> terms;
    Monomial scale;  // 1 / reference

    void add(const std::string& label, const std::string& name, const Posynomial& absolute,
             const std::string& tag = "const", double coefficient = 1.0)
    {
        for (auto t : scaling_terms(label, name, absolute * P(scale))) {
            t.coefficient = tag;
            t.coefficient_value = coefficient;
            terms.push_back(std::move(t));
        }
    }

    void add_decay(const std::string& label, const std::string& name, const Monomial& absolute,
                   const Monomial& argument)
    {
        ScalingTerm t;
        t.label = label;
        t.name = name;
        t.size = absolute * scale;
        t.super_small = true;
        t.decay_argument = argument;
        terms.push_back(std::move(t));
    }
};

double value_or(const ParameterSet& ps, const std::string& name, double fallback)
{
    for (const auto& p : ps.params)
        if (p.name == name && !std::isnan(p.value)) return p.value;
    return fallback;
}

void moderate_terms(TermBuilder& tb, const ParameterSet& ps, bool include_tau)
{
    using namespace sym;
    Symbols s = moderate_symbols(ps.ansatz);
    const Monomial &pc = s["p_c"], &R = s["R"], &kappa = s["kappa"], &sw = s["s"], &b = s["b"],
                   &phi = s["phi"], &eps = s["eps"];
    double phi_value = value_or(ps, "phi", 1.0);
    Monomial M = pc.pow(q(3));
    Monomial Pblock = pc / beta;
    Monomial mu = (beta * N).inverse();
    Monomial tau = beta * pc.pow(q(2));
    Monomial lam = one;

    Posynomial Z1_const = P(M * pc.pow(q(2))) + P(M * mu) + P(lam);
    Posynomial Z1_phi = P(phi * M * M / N) + P(phi * M);
    Posynomial Z1 = Z1_const + Z1_phi;

    tb.add("Z1", "M (p_c^2 + |mu|) + lambda", Z1_const);
    tb.add("Z1", "phi M (M + N)/N", Z1_phi, "phi", phi_value);
    tb.add("Z2", "(phi/N)(P^2 + P(N + M))",
           P(phi * Pblock.pow(q(2)) / N) + P(phi * Pblock) + P(phi * Pblock * M / N), "phi", phi_value);

    Monomial ref = aN * rho.pow(q(2));
    tb.add("Z3", "reference x (R rho^(1/3) + R/s + R p_c + kappa + (R0/R)^3 + eps)",
           P(ref) * (P(R * rho.pow(q(1, 3))) + P(R / sw) + P(R * pc) + P(kappa) +
                     P((R0 / R).pow(q(3))) + P(eps)));
    Monomial R6 = R.pow(q(-6));
    Posynomial inner1 = P(b.pow(q(3)) * aN * beta * rho.pow(q(2)));
    if (include_tau)
        inner1 = inner1 + P(beta.pow(q(1, 2)) * tau.pow(q(-1, 2)) / b) +
                 P(beta.pow(q(3, 2)) * tau.pow(q(-3, 2)) / b);
    tb.add("Z3", "a_N R^-6 (b^3 a_N beta rho^2 ...)^(1/2)", P(aN * R6) * inner1.pow(q(1, 2)));
    Posynomial inner2 = P(beta) * Z1 + P(lnN);
    if (include_tau) inner2 = inner2 + P(beta.pow(q(2)) / (tau.pow(q(2)) * b.pow(q(4))));
    tb.add("Z3", "a_N R^-6 b^(3/2) (beta Z1 + ln N ...)^(1/2)",
           P(aN * R6 * b.pow(q(3, 2))) * inner2.pow(q(1, 2)));
    tb.add("Z3", "(a_N/R)^3 p_c^3 / beta", P((aN / R).pow(q(3)) * pc.pow(q(3)) / beta));
    tb.add_decay("Z3", "tail of m(r) beyond b/s", one, b / sw);

    Monomial A1 = beta.pow(q(-3, 2)) * tau.pow(q(-1, 2));
    Monomial A2 = beta.pow(q(-1, 2)) * tau.pow(q(-3, 2));
    Posynomial A = P(A1) + P(A2);
    Monomial aR3 = aN / R.pow(q(3));
    tb.add("remainder", "(a_N/R^3) |Lambda| p_c^3", P(aR3 * M));
    tb.add("remainder", "(a_N/R^3)(beta a_N rho^2 + beta Z1 + ln N)^(1/2) A^(1/2)",
           P(aR3) * (P(beta * aN * rho.pow(q(2))) + P(beta) * Z1 + P(lnN)).pow(q(1, 2)) * A.pow(q(1, 2)));
    tb.add("remainder", "a_N rho^2 (R/b)^2", P(aN * rho.pow(q(2)) * (R / b).pow(q(2))));
    tb.add("remainder", "a_N rho (p_c/beta + R^2 beta^(-5/2)(1 + beta) + 1/beta)",
           P(aN * rho) * (P(pc / beta) + P(R.pow(q(2)) * beta.pow(q(-5, 2))) +
                          P(R.pow(q(2)) * beta.pow(q(-3, 2))) + P(beta.inverse())));
    tb.add("remainder", "a_N rho ((rho ln N/beta)^(1/2) + ln N/beta)",
           P(aN * rho) * (P((rho * lnN / beta).pow(q(1, 2))) + P(lnN / beta)));

    tb.add("free-kinetic", "a_N R0^2/R^3 (1/beta + |Lambda|/beta^(5/2)) + ln N/beta",
           P(aN * R0.pow(q(2)) / R.pow(q(3))) * (P(beta.inverse()) + P(beta.pow(q(-5, 2)))) +
               P(lnN / beta));
    tb.add_decay("free-kinetic", "|Lambda|/(beta^(5/2) kappa'^(3/2)) exp(-c (beta kappa'/s^2)^(1/2))",
                 beta.pow(q(-5, 2)) * kappa.pow(q(-3, 2)), (beta * kappa / sw.pow(q(2))).pow(q(1, 2)));
}

void cold_terms(TermBuilder& tb)
{
    using namespace sym;
    Symbols s = cold_symbols();
    const Monomial &kappa = s["kappa"], &R = s["R"], &sw = s["s"], &eps = s["eps"];
    Monomial ref = aN * rho.pow(q(2));
    tb.add("uniformity", "reference x (eps + kappa + 1/(eps R s^2 rho) + 1/(beta^(3/2) rho))",
           P(ref) * (P(eps) + P(kappa) + P((eps * R * sw.pow(q(2)) * rho).inverse()) +
                     P((beta.pow(q(3, 2)) * rho).inverse())));
    tb.add("uniformity", "kappa (N + 1/beta^(3/2) + |Lambda|/beta^(5/2))",
           P(kappa) * (P(N) + P(beta.pow(q(-3, 2))) + P(beta.pow(q(-5, 2)))));
    tb.add("uniformity", "ln N/beta", P(lnN / beta));
    tb.add_decay("uniformity", "exp(-c (beta kappa/s^2)^(1/2))", one * ref,
                 (beta * kappa / sw.pow(q(2))).pow(q(1, 2)));
}

}  // namespace

ErrorBudget error_budget(const ParameterSet& ps, const BudgetOptions& opt)
{
    using namespace sym;
    ErrorBudget out;
    out.regime = ps.regime;
    out.params = ps.params;
    out.B_exponent = opt.B_exponent;
    out.reference = aN * rho.pow(q(2));
    TermBuilder tb;
    tb.scale = out.reference.inverse();
    if (ps.regime == Regime::moderate) {
        moderate_terms(tb, ps, opt.include_tau);
        if (!opt.include_tau)
            out.omitted.push_back("terms carrying tau = beta p_c^2 and the unspecified constant D");
    } else {
        cold_terms(tb);
    }
    out.terms = std::move(tb.terms);
    if (opt.B_exponent) {
        for (auto& t : out.terms) {
            t.size = t.size.substitute(*opt.B_exponent);
            t.decay_argument = t.decay_argument.substitute(*opt.B_exponent);
        }
    }
    out.conditions = ps.conditions;
    for (auto& c : out.conditions) check(c, opt.B_exponent);

    out.dominant = 0;
    for (std::size_t i = 1; i < out.terms.size(); ++i) {
        const auto& t = out.terms[i];
        const auto& d = out.terms[out.dominant];
        bool t_live = t.coefficient_value != 0.0, d_live = d.coefficient_value != 0.0;
        if ((t_live && !d_live) || (t_live == d_live && compare(t, d) > 0)) out.dominant = i;
    }
    out.verdict = std::all_of(out.terms.begin(), out.terms.end(), [](const ScalingTerm& t) {
        return t.coefficient_value == 0.0 || vanishes(t);
    });
    out.verdict = out.verdict && std::all_of(out.conditions.begin(), out.conditions.end(),
                                             [](const SideCondition& c) { return c.holds; });
    return out;
}

std::string budget_json(const ErrorBudget& budget, int indent)
{
    using nlohmann::ordered_json;
    auto mono = [](const Monomial& m) {
        ordered_json j;
        j["n_exp"] = to_string(m.n.value);
        j["n_delta"] = to_string(m.n.delta);
        j["b_exp"] = to_string(m.b.value);
        j["b_delta"] = to_string(m.b.delta);
        j["log_pow"] = to_string(m.log);
        return j;
    };
    ordered_json j;
    j["regime"] = to_string(budget.regime);
    if (budget.B_exponent) j["B_exponent"] = to_string(*budget.B_exponent);
    ordered_json params = ordered_json::array();
    for (const auto& p : budget.params) {
        ordered_json e;
        e["name"] = p.name;
        if (!std::isnan(p.value)) e["value"] = p.value;
        e["exponent"] = mono(p.scaling);
        e["source"] = p.source;
        params.push_back(e);
    }
    j["params"] = params;
    ordered_json terms = ordered_json::array();
    for (const auto& t : budget.terms) {
        ordered_json e;
        e["label"] = t.label;
        e["paper_eq"] = t.label;
        e["name"] = t.name;
        e["coefficient"] = t.coefficient;
        e["coefficient_value"] = t.coefficient_value;
        e.update(mono(t.size));
        e["super_small"] = t.super_small;
        if (t.super_small) e["decay_argument"] = mono(t.decay_argument);
        terms.push_back(e);
    }
    j["terms"] = terms;
    j["omitted"] = budget.omitted;
    ordered_json conds = ordered_json::array();
    for (const auto& c : budget.conditions) conds.push_back({{"name", c.name}, {"holds", c.holds}});
    j["conditions"] = conds;
    const auto& d = budget.dominant_term();
    ordered_json dom = mono(d.size);
    dom["label"] = d.label;
    dom["name"] = d.name;
    j["dominant"] = dom;
    j["verdict"] = budget.verdict;
    return j.dump(indent);
}

// ------------------------------------------------------------ ansatz search

namespace {

struct Score {
    std::size_t violations;
    std::vector<ScalingTerm> sorted;  // descending

    bool operator<(const Score& o) const
    {
        if (violations != o.violations) return violations < o.violations;
        std::size_t n = std::min(sorted.size(), o.sorted.size());
        for (std::size_t i = 0; i < n; ++i) {
            auto c = compare(sorted[i], o.sorted[i]);
            if (c != 0) return c < 0;
        }
        return sorted.size() < o.sorted.size();
    }
};

Score score(const Ansatz& a, const BudgetOptions& opt)
{
    ParameterSet ps = symbolic_parameters(Regime::moderate, a, opt.B_exponent);
    ErrorBudget eb = error_budget(ps, opt);
    Score s;
    s.violations = 0;
    for (const auto& c : eb.conditions) s.violations += c.holds ? 0 : 1;
    for (const auto& t : eb.terms) s.violations += vanishes(t) ? 0 : 1;
    s.sorted = eb.terms;
    std::stable_sort(s.sorted.begin(), s.sorted.end(),
                     [](const ScalingTerm& x, const ScalingTerm& y) { return compare(x, y) > 0; });
    return s;
}

std::vector<Dual> grid(int lo, int hi)
{
    std::vector<Dual> out;
    for (int k = lo; k <= hi; ++k)
        for (int d : {-1, 0, 1}) out.emplace_back(q(k, 403), q(d));
    return out;
}

}  // namespace

SearchResult search_ansatz(const BudgetOptions& opt, const Ansatz& start)
{
    SearchResult res;
    res.ansatz = start;
    Score best = score(start, opt);
    res.evaluations = 1;
    const std::vector<Dual> g_kappa = grid(-20, 40), g_s = grid(-20, 40), g_b = grid(-240, 0),
                            g_phi = grid(-120, 0);
    auto improve = [&](std::vector<Ansatz> candidates) {
        auto scores = parallel_map<Score>(candidates.size(), [&](std::size_t i) { return score(candidates[i], opt); });
        res.evaluations += candidates.size();
        bool changed = false;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (scores[i] < best) {
                best = scores[i];
                res.ansatz = candidates[i];
                changed = true;
            }
        }
        return changed;
    };
    for (int pass = 0; pass < 8; ++pass) {
        bool changed = false;
        std::vector<Ansatz> cand;
        for (const auto& k : g_kappa)
            for (const auto& s : g_s) {
                Ansatz a = res.ansatz;
                a.kappa = k;
                a.s = s;
                cand.push_back(a);
            }
        changed |= improve(std::move(cand));
        cand.clear();
        for (const auto& b : g_b) {
            Ansatz a = res.ansatz;
            a.b = b;
            cand.push_back(a);
        }
        changed |= improve(std::move(cand));
        cand.clear();
        for (const auto& f : g_phi) {
            Ansatz a = res.ansatz;
            a.phi = f;
            cand.push_back(a);
        }
        changed |= improve(std::move(cand));
        if (!changed) break;
    }
    res.budget = error_budget(symbolic_parameters(Regime::moderate, res.ansatz, opt.B_exponent), opt);
    return res;
}

// ------------------------------------------------------------ regimes

namespace {

Dual dmul(const Dual& x, const Dual& y)
{
    return {x.value * y.value, x.value * y.delta + x.delta * y.value};
}

Dual dinv(const Dual& x)
{
    if (x.value == Rational(0)) throw std::domain_error("dual inverse of an infinitesimal");
    return {Rational(1) / x.value, -x.delta / (x.value * x.value)};
}

// exponent of N for B = N^r
Dual line_at(const Monomial& m, const Dual& r)
{
    return m.n + dmul(m.b, r);
}

std::vector<Monomial> power_terms(const ErrorBudget& eb)
{
    std::vector<Monomial> out;
    for (const auto& t : eb.terms)
        if (!t.super_small && t.coefficient_value != 0.0) out.push_back(t.size);
    return out;
}

struct RateResult {
    Dual crossing;
    Dual rate;
};

// crossing of two lines as duals
RateResult cross(const Monomial& x, const Monomial& y)
{
    Dual r = dmul(y.n - x.n, dinv(x.b - y.b));
    return {r, -line_at(x, r)};
}

// intersection of the B-dependent envelopes of two term lists on [0, rmax]
RateResult envelope_crossing(const std::vector<Monomial>& a, const std::vector<Monomial>& c, const Rational& rmax)
{
    std::vector<Monomial> ab, cb;
    for (const auto& m : a)
        if (m.b.value != Rational(0)) ab.push_back(m);
    for (const auto& m : c)
        if (m.b.value != Rational(0)) cb.push_back(m);
    if (ab.empty() || cb.empty()) throw std::domain_error("combine_regimes: no B-dependent terms");
    std::optional<std::pair<Rational, RateResult>> best;
    for (const auto& x : ab)
        for (const auto& y : cb) {
            if (x.b.value == y.b.value) continue;
            Rational r = (y.n.value - x.n.value) / (x.b.value - y.b.value);
            if (r < Rational(0) || r > rmax) continue;
            Rational v = x.n.value + x.b.value * r;
            if (envelope(ab, r).first != v || envelope(cb, r).first != v) continue;
            RateResult rr = cross(x, y);
            // among tied active pairs keep the largest dual value
            if (!best || r < best->first || (r == best->first && -rr.rate > -best->second.rate))
                best = std::make_pair(r, rr);
        }
    if (!best) throw std::domain_error("combine_regimes: B-dependent envelopes do not cross");
    return best->second;
}

// -sup_r min(E_a(r), E_c(r)) over [0, rmax], with the dual part from the active lines
Dual best_rate(const std::vector<Monomial>& a, const std::vector<Monomial>& c, const Rational& rmax)
{
    std::vector<Monomial> all = a;
    all.insert(all.end(), c.begin(), c.end());
    std::vector<Rational> cand{Rational(0), rmax};
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j) {
            if (all[i].b.value == all[j].b.value) continue;
            Rational r = (all[j].n.value - all[i].n.value) / (all[i].b.value - all[j].b.value);
            if (r >= Rational(0) && r <= rmax) cand.push_back(r);
        }
    std::sort(cand.begin(), cand.end());
    auto f = [&](const Rational& r) { return std::min(envelope(a, r).first, envelope(c, r).first); };
    Rational r_best = cand.front(), v_best = f(r_best);
    for (const auto& r : cand)
        if (f(r) > v_best) {
            v_best = f(r);
            r_best = r;
        }
    // active lines at r_best
    auto active = [&](const std::vector<Monomial>& ms) {
        std::vector<Monomial> out;
        for (const auto& m : ms)
            if (m.n.value + m.b.value * r_best == v_best) out.push_back(m);
        return out;
    };
    auto act_a = active(a), act_c = active(c);
    auto best_dual = [&](const std::vector<Monomial>& ms) {
        Dual v = line_at(ms.front(), Dual(r_best));
        for (const auto& m : ms) v = std::max(v, line_at(m, Dual(r_best)));
        return v;
    };
    // a flat active line fixes the rate
    for (const auto* set : {&act_a, &act_c})
        for (const auto& m : *set)
            if (m.b.value == Rational(0)) return -best_dual(*set);
    if (!act_a.empty() && !act_c.empty()) {
        Dual worst = Dual(q(1000));
        for (const auto& x : act_a)
            for (const auto& y : act_c)
                if (x.b.value != y.b.value) worst = std::min(worst, cross(x, y).rate);
        if (worst != Dual(q(1000))) return worst;
    }
    return -(act_a.empty() ? best_dual(act_c) : best_dual(act_a));
}

}  // namespace

CombinedRates combine_regimes(const ErrorBudget& moderate, const ErrorBudget& cold)
{
    if (moderate.regime != Regime::moderate || cold.regime != Regime::cold)
        throw std::invalid_argument("combine_regimes: expects a moderate and a cold budget");
    if (moderate.B_exponent || cold.B_exponent)
        throw std::invalid_argument("combine_regimes: budgets must keep B symbolic");
    // the cold-regime parameters assume B <= N^(2/3)
    const Rational rmax = q(2, 3);
    auto mod = power_terms(moderate);
    auto col = power_terms(cold);
    CombinedRates out;
    RateResult lower = envelope_crossing(mod, col, rmax);
    out.alpha = best_rate(mod, col, rmax);
    out.lower = {"lower bound", lower.crossing, lower.rate};

    // one-particle density matrix: moderate errors N^(-alpha/4) and c^(1/8) with c the
    // moderate dominant term; cold errors N^(-alpha/2), B^(-3/4), N^(-1/6) B^(-1/2)
    Monomial c_mod = moderate.dominant_term().size;
    Monomial flat_mod{-out.alpha * q(1, 4), Dual(), Rational(0)};
    Monomial flat_cold{-out.alpha * q(1, 2), Dual(), Rational(0)};
    std::vector<Monomial> pdm_mod{flat_mod, c_mod.pow(q(1, 8))};
    std::vector<Monomial> pdm_cold{flat_cold, Monomial::B(q(-3, 4)), Monomial::N(q(-1, 6)) * Monomial::B(q(-1, 2))};
    RateResult pdm = envelope_crossing(pdm_mod, pdm_cold, rmax);
    out.sigma = best_rate(pdm_mod, pdm_cold, rmax);
    out.pdm = {"one-particle density matrix", pdm.crossing, pdm.rate};
    return out;
}

CombinedRates combine_regimes()
{
    ErrorBudget m = error_budget(symbolic_parameters(Regime::moderate));
    ErrorBudget c = error_budget(symbolic_parameters(Regime::cold));
    return combine_regimes(m, c);
}

// ------------------------------------------------------------ Dyson quantities

double j_profile(double t)
{
    if (t < 0) throw std::domain_error("j_profile: t < 0");
    double u = std::max(0.0, 1.0 - t);
    return 12.0 * (t + 2.0) * u * u;
}

double smoothstep_profile(double t)
{
    if (t <= 1.0) return 0.0;
    if (t >= 2.0) return 1.0;
    double u = t - 1.0;
    return u * u * (3.0 - 2.0 * u);
}

double DysonQuantities::epsilon(double p_norm, bool zero_mode) const
{
    double p2 = p_norm * p_norm;
    double v = nu(s * p_norm);
    return (zero_mode ? lambda : 0.0) + kappa_prime * p2 + (1.0 - kappa) * p2 * (1.0 - v * v) - mu;
}

DysonQuantities dyson_quantities(const SystemParams& p, const ParameterSet& ps, const DysonInputs& in)
{
    p.validate();
    double a_t = std::isnan(in.a_tilde) ? p.a_N() : in.a_tilde;
    double R0 = (std::isnan(in.R0) ? p.a_v : in.R0) * p.L / p.N;
    double eps = ps.at("eps").value, kappa = ps.at("kappa").value, R = ps.at("R").value, s = ps.at("s").value;
    if (std::isnan(eps) || std::isnan(kappa) || std::isnan(R) || std::isnan(s))
        throw std::invalid_argument("dyson_quantities: parameter set has no numeric values");
    double kp = kappa - 24.0 * a_t / (pi * pi) * std::pow(4.0 * R0, 2) / std::pow(R, 3);
    if (!(kp > 0)) throw std::domain_error("dyson_quantities: kappa' <= 0 (reduced kinetic weight not positive)");
    double inner = std::pow(R / 10.0, 3) - std::pow(R0, 3);
    if (!(inner > 0)) throw std::domain_error("dyson_quantities: need 10 R0 L/N < R");
    double hole = 18.0 / std::pow(pi / 4.0, 3) * (4.0 - pi) * std::pow(R0, 3) / inner / j_profile(0.1);
    DysonQuantities out{};
    out.a_prime = a_t * (1.0 - eps) * (1.0 - kappa) * (1.0 - hole);
    out.kappa = kappa;
    out.kappa_prime = kp;
    out.s = s;
    out.mu = in.mu;
    out.lambda = in.lambda;
    out.nu = in.nu;
    return out;
}

// ------------------------------------------------------------ gamma_b

namespace {

// bump supported on |x| < 1/2
double bump(double s)
{
    double u = 2.0 * s;
    return u < 1.0 ? std::exp(-1.0 / (1.0 - u * u)) : 0.0;
}

using Gauss = boost::math::quadrature::gauss<double, 40>;

double cumulative(double u)
{
    u = std::clamp(u, 0.0, 0.5);
    if (u == 0.0) return 0.0;
    return Gauss::integrate([](double t) { return t * bump(t); }, 0.0, u);
}

// (bump * bump)(r) in three dimensions
double self_convolution(double r)
{
    if (r >= 1.0) return 0.0;
    if (r == 0.0) return 4.0 * pi * Gauss::integrate([](double s) { return s * s * bump(s) * bump(s); }, 0.0, 0.5);
    auto integrand = [r](double s) {
        return s * bump(s) * (cumulative(std::min(r + s, 0.5)) - cumulative(std::abs(r - s)));
    };
    std::vector<double> cuts{0.0, 0.5};
    for (double c : {r, 0.5 - r})
        if (c > 0.0 && c < 0.5) cuts.push_back(c);
    std::sort(cuts.begin(), cuts.end());
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) sum += Gauss::integrate(integrand, cuts[i], cuts[i + 1]);
    return 2.0 * pi / r * sum;
}

const boost::math::interpolators::cardinal_cubic_b_spline<double>& eta_table()
{
    static const auto table = [] {
        const int n = 2001;
        std::vector<double> v(n);
        double norm = self_convolution(0.0);
        for (int i = 0; i < n; ++i) v[i] = self_convolution(static_cast<double>(i) / (n - 1)) / norm;
        v.front() = 1.0;
        v.back() = 0.0;
        return boost::math::interpolators::cardinal_cubic_b_spline<double>(v.begin(), v.end(), 0.0,
                                                                           1.0 / (n - 1), 0.0, 0.0);
    }();
    return table;
}

// 1 - sinc(x), cancellation free
double one_minus_sinc(double x)
{
    if (std::abs(x) < 0.1) {
        double x2 = x * x;
        return x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)));
    }
    return 1.0 - std::sin(x) / x;
}

}  // namespace

double eta_profile(double r)
{
    r = std::abs(r);
    if (r >= 1.0) return 0.0;
    if (r == 0.0) return 1.0;
    return std::clamp(eta_table()(r), 0.0, 1.0);
}

GammaB gamma_b(const SystemParams& p, double R, double b, const PiSpec& pi_spec, double p_c)
{
    p.validate();
    if (!(R > 0) || R > p.L / 2) throw std::domain_error("gamma_b: need 0 < R <= L/2");
    bool untruncated = std::isinf(b);
    if (!untruncated && !(b > 0 && b <= p.L / 2)) throw std::domain_error("gamma_b: need 0 < b <= L/2");
    if (pi_spec.kind == PiSpec::Kind::custom && !pi_spec.occupation)
        throw std::invalid_argument("gamma_b: custom occupation missing");

    GrandCanonical gc = solve_chemical_potential(p.beta, p.N, p.L, 0.0, 1e-14);
    GcObservables obs = gc_observables(gc);
    if (p_c < 0) {
        double X = p.a_N() * p.rho() * p.rho() * std::pow(p.beta, 2.5);
        p_c = std::pow(p.beta, -0.5) * std::pow(X, 81.0 / 403.0);
        if (p.beta * std::abs(gc.mu) > std::pow(X, 162.0 / 403.0)) p_c = 0.0;
    }
    const Spectrum& sp = gc.spectrum;
    double unit = 2.0 * pi / p.L;
    std::vector<double> norm(sp.size()), weight(sp.size());
    double rho_omega = 0.0;
    for (std::size_t i = 0; i < sp.size(); ++i) {
        norm[i] = unit * std::sqrt(static_cast<double>(sp.shell[i]));
        double w = obs.occupation[i];
        if (norm[i] < p_c) {
            if (pi_spec.kind == PiSpec::Kind::zero) w = 0.0;
            else if (pi_spec.kind == PiSpec::Kind::custom) w = pi_spec.occupation(norm[i]);
        }
        weight[i] = sp.mult[i] * w / p.volume();
        rho_omega += weight[i];
    }
    // rho_omega - omega_b(r) = sum_p w_p (1 - eta sinc(|p| r))
    auto deficit = [&](double r) {
        double eta = untruncated ? 1.0 : eta_profile(r / b);
        double sum = 0.0;
        for (std::size_t i = 0; i < weight.size(); ++i) {
            double x = norm[i] * r;
            sum += weight[i] * ((1.0 - eta) + eta * one_minus_sinc(x));
        }
        return sum;
    };
    double err = 0.0;
    double gap = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                     [&](double r) { return r * r * deficit(r) * j_profile(r / R); }, 0.0, R, 12, 1e-12, &err) /
                 (R * R * R);
    if (!std::isfinite(gap) || err > 1e-6 * std::max(std::abs(gap), 1e-300) + 1e-300)
        throw std::runtime_error("gamma_b: radial quadrature did not converge");
    GammaB out{};
    out.rho_omega = rho_omega;
    out.gap = gap;
    out.gamma_b = rho_omega - gap;
    out.rho = p.rho();
    out.rho_th_gc = obs.Nth / p.volume();
    out.p_c = p_c;
    return out;
}

}  // namespace bec
