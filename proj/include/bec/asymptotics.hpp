#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bec/exponents.hpp"

namespace bec {

// Units: hbar = k_B = 1, m = 1/2.
struct SystemParams {
    double N = 1000;
    double L = 1;
    double a_v = 1;
    double beta = 1;

    double a_N() const { return a_v * L / N; }
    double rho() const { return N / (L * L * L); }
    double volume() const { return L * L * L; }
    double B() const;
    void validate() const;
};

// ------------------------------------------------------------ main formula

enum class Ensemble { canonical, grand };

struct MainFormula {
    double F0;
    double rho0;
    double interaction;  // 4 pi a_N |Lambda| (2 rho^2 - rho0^2)
    double total;
};

MainFormula main_formula(const SystemParams& p, Ensemble ensemble, double lambda = 0.0);

// Admissible |canonical - grand| gap of main_formula: sandwich slack plus
// 4 pi a_N |Lambda| times the condensate-density discrepancy bound (unit
// constant).
double ensemble_gap_bound(const SystemParams& p);

// ------------------------------------------------------------ upper bound

struct NamedValue {
    std::string name;
    double value;
};

struct UpperBoundBudget {
    double b_opt;
    std::vector<NamedValue> terms;  // absolute error terms at b_opt
    double relative_error;          // sum of terms / (a_N |Lambda| rho^2)
    std::vector<ScalingTerm> scaling;
    Monomial dominant;
};

// throws std::domain_error naming the violated precondition
UpperBoundBudget upper_bound_budget(const SystemParams& p, double eta = 0.5);

// ------------------------------------------------------------ lower bound

enum class Regime { moderate, cold };
std::string to_string(Regime r);
Regime parse_regime(const std::string& s);

// Moderate-regime exponents not fixed by the leading-order choices, as powers
// of X = a_N rho^2 beta^(5/2): kappa = X^kappa, s = beta^(1/2) X^s,
// b = beta^(1/2) X^b, phi = X^phi.
struct Ansatz {
    Dual kappa;
    Dual s;
    Dual b;
    Dual phi;
};

Ansatz default_ansatz();
std::string to_string(const Ansatz& a);

struct Parameter {
    std::string name;
    Monomial scaling;  // at L = 1, a_v = 1
    std::string source;  // "paper" or "ansatz"
    double value = std::numeric_limits<double>::quiet_NaN();
};

// quantity -> 0 (strict) or stays bounded
struct SideCondition {
    std::string name;
    Posynomial quantity;
    bool strict = true;
    bool holds = false;
};

struct ParameterSet {
    Regime regime = Regime::moderate;
    Ansatz ansatz{};
    std::vector<Parameter> params;
    std::vector<SideCondition> conditions;
    bool pc_zero = false;  // numeric branch p_c = 0
    double mu0 = std::numeric_limits<double>::quiet_NaN();
    double delta = 1e-3;  // numeric value of the slack

    const Parameter& at(const std::string& name) const;
    Parameter& at(const std::string& name);
    std::vector<std::string> violated() const;
};

// symbolic parameters only; side conditions evaluated at fixed B, or after
// B = N^r when r is given
ParameterSet symbolic_parameters(Regime regime, const Ansatz& ansatz = default_ansatz(),
                                 std::optional<Rational> B_exponent = std::nullopt);

struct LowerBoundOptions {
    Ansatz ansatz = default_ansatz();
    double delta = 1e-3;
    double R0 = std::numeric_limits<double>::quiet_NaN();  // potential range, default a_v
};

// symbolic plus numeric values; throws std::domain_error naming the first
// violated side condition
ParameterSet lower_bound_parameters(const SystemParams& p, Regime regime,
                                    const LowerBoundOptions& opt = {});

struct BudgetOptions {
    bool include_tau = false;  // terms carrying the unspecified constant D
    std::optional<Rational> B_exponent;
};

struct ErrorBudget {
    Regime regime = Regime::moderate;
    std::vector<Parameter> params;
    std::vector<ScalingTerm> terms;  // relative to the reference a_N |Lambda| rho^2
    std::vector<std::string> omitted;
    std::vector<SideCondition> conditions;
    Monomial reference;
    std::size_t dominant = 0;
    bool verdict = false;
    std::optional<Rational> B_exponent;

    const ScalingTerm& dominant_term() const { return terms.at(dominant); }
};

ErrorBudget error_budget(const ParameterSet& ps, const BudgetOptions& opt = {});
std::string budget_json(const ErrorBudget& budget, int indent = 2);

struct SearchResult {
    Ansatz ansatz;
    ErrorBudget budget;
    std::size_t evaluations = 0;
};

// coordinate search over k/403 exponent grids with delta coefficients in
// {-1, 0, 1}; minimises violated conditions, then the sorted term sizes
SearchResult search_ansatz(const BudgetOptions& opt = {}, const Ansatz& start = default_ansatz());

// ------------------------------------------------------------ regimes

struct Crossover {
    std::string name;
    Dual exponent;  // B = N^exponent
    Dual rate;      // N^-rate at the crossover
};

struct CombinedRates {
    Dual alpha;
    Dual sigma;
    Crossover lower;
    Crossover pdm;
};

CombinedRates combine_regimes(const ErrorBudget& moderate, const ErrorBudget& cold);
CombinedRates combine_regimes();

// ------------------------------------------------------------ lower bound ingredients

double j_profile(double t);
double smoothstep_profile(double t);

struct DysonInputs {
    double a_tilde = std::numeric_limits<double>::quiet_NaN();  // default a_N
    double R0 = std::numeric_limits<double>::quiet_NaN();       // default a_v
    double mu = 0.0;
    double lambda = 0.0;
    std::function<double(double)> nu = smoothstep_profile;
};

struct DysonQuantities {
    double a_prime;
    double kappa;
    double kappa_prime;
    double s;
    double mu;
    double lambda;
    std::function<double(double)> nu;

    // epsilon(p) for |p| = p_norm; zero_mode adds lambda
    double epsilon(double p_norm, bool zero_mode = false) const;
};

// throws std::domain_error when kappa' <= 0
DysonQuantities dyson_quantities(const SystemParams& p, const ParameterSet& ps,
                                 const DysonInputs& in = {});

// cutoff profile eta: self-convolution of a bump, eta(0) = 1, eta(r >= 1) = 0
double eta_profile(double r);

struct PiSpec {
    enum class Kind { bose, zero, custom } kind = Kind::bose;
    std::function<double(double)> occupation;  // for custom, as a function of |p|
};

struct GammaB {
    double rho_omega;
    double gamma_b;
    double gap;  // rho_omega - gamma_b, computed without cancellation
    double rho;
    double rho_th_gc;
    double p_c;
};

// b = infinity selects eta = 1; p_c < 0 takes the moderate-regime value
GammaB gamma_b(const SystemParams& p, double R, double b, const PiSpec& pi = {}, double p_c = -1.0);

}  // namespace bec
