#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bec/asymptotics.hpp"
#include "bec/entropy.hpp"
#include "bec/ideal_gas.hpp"
#include "bec/lattice.hpp"
#include "bec/parallel.hpp"
#include "bec/potential.hpp"

namespace becctl {

using json = nlohmann::ordered_json;

namespace {

constexpr double pi = std::numbers::pi;
constexpr double max_N = 1e5;

enum class Kind { number, text, flag };

struct Key {
    const char* name;
    Kind kind;
    const char* help;
};

const std::vector<Key> system_keys = {
    {"N", Kind::number, "particle number (<= 1e5)"},
    {"L", Kind::number, "box side length"},
    {"beta", Kind::number, "inverse temperature; default the critical value"},
};

const std::map<std::string, std::vector<Key>>& schema()
{
    static const std::map<std::string, std::vector<Key>> s = [] {
        std::map<std::string, std::vector<Key>> m;
        m["scatter"] = {{"builtin", Kind::text, "hard-sphere:R | square-well:R:v0 | zero"},
                        {"potential-file", Kind::text, "tabulated potential file"}};
        auto sys = system_keys;
        m["ideal-gas"] = sys;
        m["ideal-gas"].push_back({"lambda", Kind::number, "zero-mode energy shift"});
        m["ideal-gas"].push_back({"ensemble", Kind::text, "grand | canonical"});
        m["free-energy"] = m["ideal-gas"];
        m["free-energy"].push_back({"a", Kind::number, "unscaled scattering length a_v"});
        m["trial-energy"] = sys;
        m["trial-energy"].push_back({"a", Kind::number, "unscaled scattering length a_v"});
        m["trial-energy"].push_back({"eta", Kind::number, "fraction in a_N < b eta"});
        m["trial-energy"].push_back({"ensemble", Kind::text, "grand | canonical"});
        m["budget"] = {{"regime", Kind::text, "moderate | cold"},
                       {"B", Kind::number, "beta rho^(2/3) for numeric parameter values"},
                       {"N", Kind::number, "particle number for numeric parameter values"},
                       {"L", Kind::number, "box side length"},
                       {"a", Kind::number, "unscaled scattering length a_v"},
                       {"B-exponent", Kind::text, "substitute B = N^r (rational)"},
                       {"include-tau", Kind::flag, "include the terms carrying the constant D"},
                       {"search", Kind::flag, "run the ansatz grid search first"},
                       {"combine", Kind::flag, "add the combined rates and crossovers"}};
        m["verify"] = {{"suite", Kind::text, "lattice-lemma | sandwich | suto | coercivity | gamma-chain | rates"},
                       {"samples", Kind::number, "number of randomized cases"}};
        m["sweep"] = {{"command", Kind::text, "ideal-gas | free-energy | trial-energy"},
                      {"var", Kind::text, "swept parameter"},
                      {"from", Kind::number, "first grid value"},
                      {"to", Kind::number, "last grid value"},
                      {"steps", Kind::number, "number of grid points"}};
        return m;
    }();
    return s;
}

const Key* find_key(const std::string& command, const std::string& name)
{
    auto it = schema().find(command);
    if (it == schema().end()) return nullptr;
    for (const auto& k : it->second)
        if (name == k.name) return &k;
    return nullptr;
}

double parse_number(const std::string& key, const std::string& text)
{
    double v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw UsageError("--" + key + ": not a number: '" + text + "'");
    return v;
}

using Params = std::map<std::string, std::string>;

double num(const Params& p, const std::string& key, double fallback)
{
    auto it = p.find(key);
    return it == p.end() ? fallback : parse_number(key, it->second);
}

std::string text(const Params& p, const std::string& key, const std::string& fallback)
{
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

bool flag(const Params& p, const std::string& key)
{
    auto it = p.find(key);
    if (it == p.end()) return false;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw UsageError("--" + key + ": expected true or false");
}

bec::SystemParams system(const Params& p)
{
    bec::SystemParams s;
    s.N = num(p, "N", 1000);
    s.L = num(p, "L", 1);
    s.a_v = num(p, "a", 1);
    if (!(s.N >= 1) || s.N > max_N) throw UsageError("--N must lie in [1, 1e5]");
    if (!(s.L > 0)) throw UsageError("--L must be positive");
    if (!(s.a_v > 0)) throw UsageError("--a must be positive");
    s.beta = num(p, "beta", bec::critical_beta(s.rho()));
    if (!(s.beta > 0)) throw UsageError("--beta must be positive");
    return s;
}

bec::Ensemble ensemble(const Params& p)
{
    std::string e = text(p, "ensemble", "grand");
    if (e == "grand") return bec::Ensemble::grand;
    if (e == "canonical") return bec::Ensemble::canonical;
    throw UsageError("--ensemble must be grand or canonical");
}

void require_integer_N(const bec::SystemParams& s)
{
    if (s.N != std::round(s.N)) throw UsageError("canonical ensemble needs an integer --N");
}

// one evaluated command: JSON results, fixed CSV columns, failures
struct Outcome {
    json results = json::object();
    std::vector<std::pair<std::string, double>> row;
    json failures = json::array();
};

struct HelpRequested {
    std::string text;
};

// ------------------------------------------------------------ commands

Outcome cmd_scatter(const Params& p)
{
    bec::Potential pot;
    if (p.count("builtin") && p.count("potential-file"))
        throw UsageError("give either --builtin or --potential-file");
    if (p.count("potential-file")) {
        pot = bec::Potential::from_file(p.at("potential-file"));
    } else {
        std::string spec = text(p, "builtin", "hard-sphere:1");
        std::vector<std::string> parts;
        std::stringstream ss(spec);
        for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
        if (parts.size() == 2 && parts[0] == "hard-sphere") {
            pot = bec::Potential::hard_sphere(parse_number("builtin", parts[1]));
        } else if (parts.size() == 3 && parts[0] == "square-well") {
            pot = bec::Potential::square_well(parse_number("builtin", parts[1]), parse_number("builtin", parts[2]));
        } else if (parts.size() == 1 && parts[0] == "zero") {
            pot = bec::Potential::zero();
        } else {
            throw UsageError("--builtin: expected hard-sphere:R, square-well:R:v0 or zero");
        }
    }
    Outcome o;
    double a = bec::scattering_length(pot);
    o.results["a_v"] = a;
    o.row = {{"a_v", a}};
    return o;
}

Outcome cmd_ideal_gas(const Params& p)
{
    bec::SystemParams s = system(p);
    double lambda = num(p, "lambda", 0.0);
    Outcome o;
    double mu = std::nan(""), N0 = 0, F = 0;
    if (ensemble(p) == bec::Ensemble::canonical) {
        require_integer_N(s);
        auto ce = bec::canonical_partition(s.beta, static_cast<std::int64_t>(s.N), s.L, lambda);
        N0 = ce.occupation(0);
        F = ce.free_energy();
    } else {
        auto gc = bec::solve_chemical_potential(s.beta, s.N, s.L, lambda);
        auto obs = bec::gc_observables(gc);
        mu = gc.mu;
        N0 = obs.N0;
        F = obs.free_energy;
    }
    double beta_c = bec::critical_beta(s.rho());
    o.results["beta_c"] = beta_c;
    o.results["mu"] = std::isnan(mu) ? json(nullptr) : json(mu);
    o.results["N0"] = N0;
    o.results["condensate_fraction"] = N0 / s.N;
    o.results["free_energy"] = F;
    o.row = {{"N", s.N},       {"L", s.L},   {"beta", s.beta},
             {"lambda", lambda}, {"mu", mu}, {"N0", N0},
             {"condensate_fraction", N0 / s.N}, {"free_energy", F}};
    return o;
}

Outcome cmd_free_energy(const Params& p)
{
    bec::SystemParams s = system(p);
    double lambda = num(p, "lambda", 0.0);
    auto e = ensemble(p);
    if (e == bec::Ensemble::canonical) require_integer_N(s);
    bec::MainFormula m = bec::main_formula(s, e, lambda);
    Outcome o;
    o.results["F0"] = m.F0;
    o.results["rho0"] = m.rho0;
    o.results["interaction"] = m.interaction;
    o.results["total"] = m.total;
    o.row = {{"N", s.N},       {"L", s.L},         {"a", s.a_v},
             {"beta", s.beta}, {"lambda", lambda}, {"F0", m.F0},
             {"rho0", m.rho0}, {"interaction", m.interaction}, {"total", m.total}};
    return o;
}

Outcome cmd_trial_energy(const Params& p)
{
    bec::SystemParams s = system(p);
    double eta = num(p, "eta", 0.5);
    auto e = ensemble(p);
    if (e == bec::Ensemble::canonical) require_integer_N(s);
    bec::UpperBoundBudget ub;
    try {
        ub = bec::upper_bound_budget(s, eta);
    } catch (const std::domain_error& err) {
        Outcome o;
        o.failures.push_back({{"property", "upper-bound preconditions"}, {"message", err.what()}});
        return o;
    }
    bec::MainFormula m = bec::main_formula(s, e);
    double errors = 0.0;
    json terms = json::array();
    for (const auto& t : ub.terms) {
        terms.push_back({{"name", t.name}, {"value", t.value}});
        errors += t.value;
    }
    Outcome o;
    o.results["b_opt"] = ub.b_opt;
    o.results["terms"] = terms;
    o.results["relative_error"] = ub.relative_error;
    o.results["relative_error_exponent"] = bec::to_string(ub.dominant.n.value);
    o.results["main_formula"] = m.total;
    o.results["trial_energy"] = m.total + errors;
    o.row = {{"N", s.N},
             {"L", s.L},
             {"a", s.a_v},
             {"beta", s.beta},
             {"b_opt", ub.b_opt},
             {"term_1", ub.terms[0].value},
             {"term_2", ub.terms[1].value},
             {"term_3", ub.terms[2].value},
             {"term_4", ub.terms[3].value},
             {"relative_error", ub.relative_error},
             {"main_formula", m.total},
             {"trial_energy", m.total + errors}};
    return o;
}

json rates_json(const bec::CombinedRates& cr)
{
    auto dual = [](const bec::Dual& d) { return json{{"value", bec::to_string(d.value)}, {"delta", bec::to_string(d.delta)}}; };
    return {{"alpha", dual(cr.alpha)},
            {"sigma", dual(cr.sigma)},
            {"crossover_lower", {{"exponent", dual(cr.lower.exponent)}, {"rate", dual(cr.lower.rate)}}},
            {"crossover_pdm", {{"exponent", dual(cr.pdm.exponent)}, {"rate", dual(cr.pdm.rate)}}}};
}

Outcome cmd_budget(const Params& p)
{
    bec::Regime regime;
    try {
        regime = bec::parse_regime(text(p, "regime", "moderate"));
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("--regime: ") + e.what());
    }
    bec::BudgetOptions opt;
    opt.include_tau = flag(p, "include-tau");
    if (p.count("B-exponent")) {
        try {
            opt.B_exponent = bec::parse_rational(p.at("B-exponent"));
        } catch (const std::invalid_argument& e) {
            throw UsageError(std::string("--B-exponent: ") + e.what());
        }
    }
    bec::Ansatz ansatz = bec::default_ansatz();
    Outcome o;
    if (flag(p, "search")) {
        if (regime != bec::Regime::moderate) throw UsageError("--search applies to the moderate regime");
        ansatz = bec::search_ansatz(opt).ansatz;
        o.results["ansatz"] = bec::to_string(ansatz);
    }
    bec::ParameterSet ps = bec::symbolic_parameters(regime, ansatz, opt.B_exponent);
    if (!opt.B_exponent) {
        double B = num(p, "B", 1.0);
        if (!(B > 0)) throw UsageError("--B must be positive");
        bec::SystemParams s;
        s.N = num(p, "N", 1000);
        s.L = num(p, "L", 1);
        s.a_v = num(p, "a", 1);
        if (!(s.N >= 1) || s.N > max_N) throw UsageError("--N must lie in [1, 1e5]");
        s.beta = B / std::pow(s.rho(), 2.0 / 3.0);
        bec::LowerBoundOptions lo;
        lo.ansatz = ansatz;
        try {
            ps = bec::lower_bound_parameters(s, regime, lo);
        } catch (const std::domain_error& e) {
            o.failures.push_back({{"property", "side conditions"}, {"message", e.what()}});
        }
    }
    bec::ErrorBudget eb = bec::error_budget(ps, opt);
    json budget = json::parse(bec::budget_json(eb));
    o.results["budget"] = budget;
    o.results["dominant_n_exp"] = budget["dominant"]["n_exp"];
    if (!eb.verdict)
        o.failures.push_back({{"property", "budget verdict"},
                              {"message", "dominant term does not vanish or a side condition fails"},
                              {"dominant", budget["dominant"]}});
    if (flag(p, "combine")) o.results["rates"] = rates_json(bec::combine_regimes());
    const auto& d = eb.dominant_term().size;
    o.row = {{"dominant_n_exp", bec::to_double(d.n.value)},
             {"dominant_n_delta", bec::to_double(d.n.delta)},
             {"dominant_b_exp", bec::to_double(d.b.value)},
             {"verdict", eb.verdict ? 1.0 : 0.0}};
    return o;
}

// ------------------------------------------------------------ verification suites

struct CaseResult {
    bool passed = true;
    json detail;
};

double log_uniform(std::mt19937_64& rng, double lo, double hi)
{
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
}

CaseResult lattice_case(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double L = 0.5 + 4.0 * U(rng);
    double unit = 2.0 * pi / L;
    double kappa = U(rng) < 0.3 ? 0.0 : unit * 6.0 * U(rng);
    bec::MomentumLattice lat(L);
    bec::RadialFunction f;
    std::vector<double> kinks;
    std::string kind;
    switch (rng() % 3) {
    case 0: {
        double t = std::pow(10.0, -2.0 + 2.0 * U(rng)) / (unit * unit);
        f = [t](double q) { return std::exp(-t * q * q); };
        kind = "gaussian t=" + format_number(t);
        break;
    }
    case 1: {
        double beta = std::pow(10.0, -1.5 + 2.0 * U(rng)) / (unit * unit);
        double mu = -unit * unit * std::pow(10.0, -2.0 + 3.0 * U(rng));
        f = [beta, mu](double q) { return 1.0 / std::expm1(beta * (q * q - mu)); };
        kind = "bose beta=" + format_number(beta) + " mu=" + format_number(mu);
        break;
    }
    default: {
        double c = unit * (0.5 + 3.0 * U(rng));
        f = [c](double q) { return q <= c ? 1.0 : std::pow(c / q, 8.0); };
        kinks.push_back(c);
        kind = "plateau c=" + format_number(c);
        break;
    }
    }
    double sum = bec::lattice_sum(lat, f, kappa, 1e-6).value;
    double major = bec::integral_majorant(f, kappa, L, kinks);
    return {sum <= major, {{"f", kind}, {"L", L}, {"kappa", kappa}, {"lattice_sum", sum}, {"majorant", major}}};
}

CaseResult sandwich_case(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    int N = std::uniform_int_distribution<int>(2, 200)(rng);
    double L = 1.0;
    double beta = log_uniform(rng, 0.25, 4.0) * bec::critical_beta(N / (L * L * L));
    double lambda = rng() % 2 ? 0.0 : 2.0 * pi * pi;
    auto ce = bec::canonical_partition(beta, N, L, lambda);
    auto gc = bec::solve_chemical_potential(ce.spectrum(), beta, N, lambda);
    double F = ce.free_energy(), Fgc = bec::gc_observables(gc).free_energy;
    bool ok = F >= Fgc && Fgc >= F - (std::log1p(N) + 1.0) / beta;
    return {ok, {{"N", N}, {"beta", beta}, {"lambda", lambda}, {"F_canonical", F}, {"F_grand", Fgc}}};
}

CaseResult suto_case(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::vector<double> e, m;
    const double mults[] = {1, 6, 12, 8, 6};
    for (int k = 0; k <= 4; ++k) {
        e.push_back(4.0 * pi * pi * k);
        m.push_back(mults[k]);
    }
    auto s = bec::explicit_spectrum(e, m);
    int N = std::uniform_int_distribution<int>(2, 50)(rng);
    double beta = log_uniform(rng, 2.5e-4, 5e-3);
    bec::CanonicalEnsemble ce(s, beta, N);
    for (std::size_t a = 0; a < s.size(); ++a)
        for (std::size_t b = 0; b < s.size(); ++b) {
            if (a == b && s.mult[a] < 2.0) continue;
            double cov = ce.covariance(a, b);
            if (!(cov < 0.0))
                return {false, {{"N", N}, {"beta", beta}, {"level_p", a}, {"level_q", b}, {"covariance", cov}}};
        }
    return {true, {{"N", N}, {"beta", beta}}};
}

CaseResult coercivity_case(std::uint64_t seed, double Cstar)
{
    std::mt19937_64 rng(seed);
    int n = std::uniform_int_distribution<int>(1, 10)(rng);
    std::vector<double> x(n), y(n);
    for (int k = 0; k < n; ++k) {
        x[k] = rng() % 10 == 0 ? 0.0 : log_uniform(rng, 1e-6, 1e6);
        y[k] = log_uniform(rng, 1e-6, 1e6);
    }
    auto gap = bec::coercivity_gap(bec::OccupationSpectrum(x), bec::OccupationSpectrum(y), Cstar);
    return {gap.margin >= 0.0, {{"a", x}, {"b", y}, {"lhs", gap.lhs}, {"rhs", gap.rhs}}};
}

CaseResult gamma_case(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    double N = std::uniform_int_distribution<int>(200, 2000)(rng);
    bec::SystemParams s{N, 1.0, 1.0, log_uniform(rng, 1.0, 4.0) * bec::critical_beta(N)};
    double b = 0.1 + 0.4 * std::uniform_real_distribution<double>(0, 1)(rng);
    double R = log_uniform(rng, 0.02, 0.2);
    bec::GammaB g = bec::gamma_b(s, R, b);
    bec::GammaB h = bec::gamma_b(s, R / 2, b);
    bool ok = g.gap >= 0 && g.rho_omega <= g.rho * (1 + 1e-9) && h.gap < g.gap;
    return {ok,
            {{"N", N}, {"beta", s.beta}, {"R", R}, {"b", b}, {"rho", g.rho}, {"rho_omega", g.rho_omega},
             {"gamma_b", g.gamma_b}, {"gap", g.gap}, {"gap_half_R", h.gap}}};
}

Outcome cmd_verify(const Params& p, std::uint64_t seed)
{
    std::string suite = text(p, "suite", "");
    double samples_d = num(p, "samples", 100);
    if (!(samples_d >= 1) || samples_d != std::round(samples_d) || samples_d > 1e7)
        throw UsageError("--samples must be a positive integer");
    auto samples = static_cast<std::size_t>(samples_d);
    std::function<CaseResult(std::uint64_t)> one;
    if (suite == "lattice-lemma") {
        one = lattice_case;
    } else if (suite == "sandwich") {
        one = sandwich_case;
    } else if (suite == "suto") {
        one = suto_case;
    } else if (suite == "coercivity") {
        double Cstar = bec::coercivity_constant(20).value;
        one = [Cstar](std::uint64_t s) { return coercivity_case(s, Cstar); };
    } else if (suite == "gamma-chain") {
        one = gamma_case;
    } else if (suite == "rates") {
        samples = 1;
        one = [](std::uint64_t) {
            bec::CombinedRates cr = bec::combine_regimes();
            bec::ErrorBudget m = bec::error_budget(bec::symbolic_parameters(bec::Regime::moderate));
            bec::UpperBoundBudget ub = bec::upper_bound_budget(bec::SystemParams{1000, 1, 1, bec::critical_beta(1000)});
            bool ok = cr.alpha.value == bec::Rational(4, 6885) && cr.sigma.value == bec::Rational(1, 6885) &&
                      cr.pdm.exponent.value == bec::Rational(4, 7269) &&
                      m.dominant_term().size.n.value == bec::Rational(-4, 1209) &&
                      ub.dominant.n.value == bec::Rational(-1, 3);
            json d = rates_json(cr);
            d["moderate_dominant"] = bec::to_string(m.dominant_term().size);
            d["upper_bound_exponent"] = bec::to_string(ub.dominant.n.value);
            return CaseResult{ok, d};
        };
    } else {
        throw UsageError("--suite must be one of lattice-lemma, sandwich, suto, coercivity, gamma-chain, rates");
    }
    auto results = bec::parallel_map<CaseResult>(samples, [&](std::size_t i) { return one(bec::case_seed(seed, i)); });
    Outcome o;
    std::size_t passed = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].passed) {
            ++passed;
        } else if (o.failures.empty()) {
            json f = results[i].detail;
            f["case"] = i;
            f["case_seed"] = bec::case_seed(seed, i);
            o.failures.push_back(f);
        }
    }
    o.results["suite"] = suite;
    o.results["samples"] = samples;
    o.results["passed"] = passed;
    if (suite == "rates") o.results["detail"] = results.front().detail;
    o.row = {{"samples", static_cast<double>(samples)}, {"passed", static_cast<double>(passed)}};
    return o;
}

Outcome evaluate(const std::string& command, const Params& p, std::uint64_t seed)
{
    if (command == "scatter") return cmd_scatter(p);
    if (command == "ideal-gas") return cmd_ideal_gas(p);
    if (command == "free-energy") return cmd_free_energy(p);
    if (command == "trial-energy") return cmd_trial_energy(p);
    if (command == "budget") return cmd_budget(p);
    if (command == "verify") return cmd_verify(p, seed);
    throw UsageError("unknown command '" + command + "'");
}

// ------------------------------------------------------------ output

std::string csv(const std::vector<std::vector<std::pair<std::string, double>>>& rows)
{
    std::string out;
    if (rows.empty()) return out;
    for (std::size_t i = 0; i < rows.front().size(); ++i) out += (i ? "," : "") + rows.front()[i].first;
    out += "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + format_number(r[i].second);
        out += "\n";
    }
    return out;
}

json params_json(const RunConfig& c)
{
    json p = json::object();
    for (const auto& [k, v] : c.params) p[k] = v;
    p["seed"] = c.seed;
    return p;
}

std::string report_json(const RunConfig& c, const json& results, const json& failures)
{
    json j;
    j["command"] = c.command;
    j["params"] = params_json(c);
    j["results"] = results;
    j["failures"] = failures;
    j["version"] = version;
    return j.dump(2) + "\n";
}

Report run_sweep(const RunConfig& c)
{
    const Params& p = c.params;
    std::string base = text(p, "command", "");
    if (base != "ideal-gas" && base != "free-energy" && base != "trial-energy")
        throw UsageError("sweep --command must be ideal-gas, free-energy or trial-energy");
    std::string var = text(p, "var", "");
    const Key* k = find_key(base, var);
    if (!k || k->kind != Kind::number) throw UsageError("--var must be a numeric parameter of " + base);
    for (const char* req : {"from", "to", "steps"})
        if (!p.count(req)) throw UsageError(std::string("sweep needs --") + req);
    double from = num(p, "from", 0), to = num(p, "to", 0), steps_d = num(p, "steps", 0);
    if (!(steps_d >= 1) || steps_d != std::round(steps_d) || steps_d > 1e6)
        throw UsageError("--steps must be a positive integer");
    auto steps = static_cast<std::size_t>(steps_d);
    if (to < from || (steps > 1 && to == from)) throw UsageError("empty sweep range");
    Params base_params;
    for (const auto& [key, value] : p) {
        if (key == "command" || key == "var" || key == "from" || key == "to" || key == "steps") continue;
        if (!find_key(base, key)) throw UsageError("--" + key + " is not a parameter of " + base);
        if (key == var) throw UsageError("--" + key + " is the swept variable");
        base_params[key] = value;
    }
    auto outcomes = bec::parallel_map<Outcome>(steps, [&](std::size_t i) {
        double x = steps == 1 ? from : from + (to - from) * static_cast<double>(i) / static_cast<double>(steps - 1);
        Params q = base_params;
        q[var] = format_number(x);
        return evaluate(base, q, bec::case_seed(c.seed, i));
    });
    std::vector<std::vector<std::pair<std::string, double>>> rows;
    json failures = json::array();
    json results = json::array();
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (!outcomes[i].failures.empty() && failures.empty()) {
            json f = outcomes[i].failures.front();
            f["row"] = i;
            failures.push_back(f);
        }
        rows.push_back(outcomes[i].row);
        results.push_back(outcomes[i].results);
    }
    Report r;
    r.exit_code = failures.empty() ? 0 : 1;
    r.body = c.format == "csv" ? csv(rows) : report_json(c, results, failures);
    return r;
}

}  // namespace

std::string format_number(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, ptr);
}

std::map<std::string, std::string> parse_config_text(const std::string& content)
{
    std::map<std::string, std::string> out;
    std::istringstream in(content);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty()) throw UsageError("config line " + std::to_string(lineno) + ": empty key");
        out[key] = value;
    }
    return out;
}

RunConfig parse_command_line(const std::vector<std::string>& args)
{
    CLI::App app{"becctl: dilute Bose gas free-energy toolkit (units hbar = k_B = 1, m = 1/2)", "becctl"};
    app.require_subcommand(1);
    app.footer("Units: hbar = k_B = 1, m = 1/2. Exit status: 0 pass, 1 property failure, 2 usage.");
    std::map<std::string, std::map<std::string, std::string>> store;
    std::map<std::string, std::map<std::string, CLI::Option*>> opts;
    std::map<std::string, std::map<std::string, bool>> flags;
    std::uint64_t seed = 0;
    std::string output, format = "json", config;
    std::map<std::string, CLI::App*> subs;
    for (const auto& [command, keys] : schema()) {
        CLI::App* sub = app.add_subcommand(command);
        subs[command] = sub;
        std::vector<Key> all = keys;
        if (command == "sweep")
            for (const char* base : {"ideal-gas", "free-energy", "trial-energy"})
                for (const auto& k : schema().at(base))
                    if (std::none_of(all.begin(), all.end(), [&](const Key& x) { return std::string(x.name) == k.name; }))
                        all.push_back(k);
        for (const auto& k : all) {
            std::string name = k.name;
            if (k.kind == Kind::flag)
                opts[command][name] = sub->add_flag("--" + name, flags[command][name], k.help);
            else
                opts[command][name] = sub->add_option("--" + name, store[command][name], k.help)->type_name(k.kind == Kind::number ? "NUM" : "TEXT");
        }
        sub->add_option("--seed", seed, "master seed for randomized suites");
        sub->add_option("--output", output, "write the report to this path");
        sub->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
        sub->add_option("--config", config, "file of key = value lines; flags win");
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        std::ostringstream out, err;
        app.exit(e, out, err);
        throw HelpRequested{out.str()};
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }
    RunConfig c;
    for (const auto& [command, sub] : subs)
        if (sub->parsed()) c.command = command;
    for (const auto& [name, opt] : opts[c.command]) {
        if (opt->count() == 0) continue;
        c.params[name] = flags[c.command].count(name) ? "true" : store[c.command][name];
    }
    if (!config.empty()) {
        std::ifstream in(config);
        if (!in) throw UsageError("cannot read config file '" + config + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        for (const auto& [key, value] : parse_config_text(ss.str())) {
            if (key == "seed") {
                if (subs[c.command]->get_option("--seed")->count() == 0) seed = static_cast<std::uint64_t>(parse_number(key, value));
                continue;
            }
            if (!opts[c.command].count(key)) throw UsageError("config: unknown key '" + key + "' for " + c.command);
            c.params.emplace(key, value);  // flags win
        }
    }
    c.seed = seed;
    c.output = output;
    c.format = format;
    return c;
}

Report execute(const RunConfig& c)
{
    if (c.command == "sweep") return run_sweep(c);
    if (!schema().count(c.command)) throw UsageError("unknown command '" + c.command + "'");
    for (const auto& [key, value] : c.params)
        if (!find_key(c.command, key)) throw UsageError("--" + key + " is not a parameter of " + c.command);
    Outcome o = evaluate(c.command, c.params, c.seed);
    Report r;
    r.exit_code = o.failures.empty() ? 0 : 1;
    r.body = c.format == "csv" ? csv({o.row}) : report_json(c, o.results, o.failures);
    return r;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    try {
        RunConfig c = parse_command_line(args);
        Report r = execute(c);
        if (c.output.empty()) {
            out << r.body;
        } else {
            std::ofstream f(c.output, std::ios::binary);
            if (!f) throw UsageError("cannot write '" + c.output + "'");
            f << r.body;
        }
        return r.exit_code;
    } catch (const HelpRequested& h) {
        out << h.text;
        return 0;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace becctl
