#include "bec/ideal_gas.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace bec {

namespace {

constexpr double pi = std::numbers::pi;

double log_sum_exp(const std::vector<double>& a, std::size_t n)
{
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, a[i]);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(a[i] - m);
    return m + std::log(s);
}

}  // namespace

double zeta_3_2()
{
    // Euler-Maclaurin with the tail starting at M
    const double s = 1.5;
    const int M = 60;
    double sum = 0.0;
    for (int n = 1; n < M; ++n) sum += std::pow(n, -s);
    double m = M;
    double tail = std::pow(m, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(m, -s) +
                  s / 12.0 * std::pow(m, -s - 1.0) -
                  s * (s + 1.0) * (s + 2.0) / 720.0 * std::pow(m, -s - 3.0) +
                  s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) / 30240.0 * std::pow(m, -s - 5.0);
    return sum + tail;
}

double critical_beta(double rho)
{
    if (!(rho > 0.0)) throw std::invalid_argument("density must be positive");
    return std::pow(rho / zeta_3_2(), -2.0 / 3.0) / (4.0 * pi);
}

double Spectrum::min_energy() const
{
    if (energy.empty()) throw std::logic_error("empty spectrum");
    return *std::min_element(energy.begin(), energy.end());
}

double Spectrum::modes() const { return std::accumulate(mult.begin(), mult.end(), 0.0); }

Spectrum lattice_spectrum(double beta, double L, double lambda, double tail_tol)
{
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
    if (!(L > 0.0)) throw std::invalid_argument("L must be positive");
    double unit = 2.0 * pi / L;
    if (!(lambda >= 0.0 && lambda < unit * unit))
        throw std::invalid_argument("lambda must lie in [0, (2 pi / L)^2)");
    // weights are later measured relative to the lowest level
    double lift = std::exp(beta * std::min(lambda, unit * unit));
    std::int64_t K = 16;
    double tail = 0.0;
    while (true) {
        tail = lift * gaussian_majorant(beta, unit * std::sqrt(static_cast<double>(K + 1)), L);
        if (tail < tail_tol) break;
        if (K > 4000000) throw std::runtime_error("spectrum cutoff exceeds the shell budget");
        K *= 2;
    }
    MomentumLattice lat(L, K);
    Spectrum s;
    s.L = L;
    s.tail_bound = tail;
    s.energy.push_back(lambda);
    s.mult.push_back(1.0);
    s.shell.push_back(0);
    for (const auto& sh : lat.shells(1, K)) {
        s.energy.push_back(sh.p2);
        s.mult.push_back(static_cast<double>(sh.mult));
        s.shell.push_back(sh.k);
    }
    return s;
}

Spectrum explicit_spectrum(std::vector<double> energy, std::vector<double> mult)
{
    if (energy.size() != mult.size() || energy.empty())
        throw std::invalid_argument("spectrum needs matching nonempty energy and multiplicity lists");
    for (double m : mult)
        if (!(m >= 1.0) || m != std::floor(m)) throw std::invalid_argument("multiplicities must be positive integers");
    Spectrum s;
    s.energy = std::move(energy);
    s.mult = std::move(mult);
    s.shell.assign(s.energy.size(), -1);
    return s;
}

double mean_number(const Spectrum& s, double beta, double mu)
{
    double n = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) n += s.mult[i] / std::expm1(beta * (s.energy[i] - mu));
    return n;
}

namespace {

// bisection on x = e_min - mu in log scale; the mean number decreases in x
double solve_mu(const Spectrum& s, double beta, double N, double tol, double lo_mu, double hi_mu)
{
    double emin = s.min_energy();
    double xlo = emin - hi_mu;
    double xhi = emin - lo_mu;
    if (!(xlo > 0.0)) throw std::logic_error("upper chemical potential bracket not below the spectrum");
    if (mean_number(s, beta, hi_mu) < N) throw std::logic_error("chemical potential bracket misses N from above");
    if (!std::isfinite(xhi)) {
        xhi = std::max(2.0 * xlo, 1.0 / beta);
        while (mean_number(s, beta, emin - xhi) > N) xhi *= 2.0;
    } else if (mean_number(s, beta, lo_mu) > N) {
        throw std::logic_error("chemical potential bracket misses N from below");
    }
    double slack = tol * std::max(1.0, N);
    for (int it = 0; it < 400; ++it) {
        double mid = std::sqrt(xlo * xhi);
        double n = mean_number(s, beta, emin - mid);
        if (std::abs(n - N) <= slack) return emin - mid;
        if (n > N) xlo = mid;
        else xhi = mid;
        if (xhi / xlo - 1.0 < 1e-16) break;
    }
    return emin - std::sqrt(xlo * xhi);
}

}  // namespace

GrandCanonical solve_chemical_potential(const Spectrum& s, double beta, double N, double lambda,
                                        double tol)
{
    if (!(N >= 1.0)) throw std::invalid_argument("N must be at least 1");
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
    double emin = s.min_energy();
    double upper = emin - std::log1p(1.0 / N) / beta;
    double lower = -std::numeric_limits<double>::infinity();
    bool has_zero_mode = !s.shell.empty() && s.shell[0] == 0;
    if (has_zero_mode && s.energy[0] > 0.0) {
        Spectrum s0 = s;
        s0.energy[0] = 0.0;
        lower = solve_mu(s0, beta, N, tol * 1e-2, -std::numeric_limits<double>::infinity(),
                         s0.min_energy() - std::log1p(1.0 / N) / beta);
    }
    double mu = solve_mu(s, beta, N, tol, lower, upper);
    if (!std::isfinite(lower)) lower = has_zero_mode ? mu : lower;
    return {beta, s.L, mu, lambda, N, s, lower, upper};
}

GrandCanonical solve_chemical_potential(double beta, double N, double L, double lambda, double tol)
{
    return solve_chemical_potential(lattice_spectrum(beta, L, lambda), beta, N, lambda, tol);
}

double gc_mean(double x) { return 1.0 / std::expm1(x); }

double gc_second_moment(double x)
{
    double n = gc_mean(x);
    return n + 2.0 * n * n;
}

double gc_tail_probability(double x, int k) { return std::exp(-k * x); }

GcObservables gc_observables(const GrandCanonical& gc)
{
    const Spectrum& s = gc.spectrum;
    GcObservables out{};
    out.occupation.resize(s.size());
    double logsum = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        double x = gc.beta * (s.energy[i] - gc.mu);
        out.occupation[i] = gc_mean(x);
        total += s.mult[i] * out.occupation[i];
        logsum += s.mult[i] * std::log1p(-std::exp(-x));
        if (i == 0 && s.shell.size() && s.shell[0] == 0) out.N0 = out.occupation[0];
    }
    out.Nth = total - out.N0;
    out.free_energy = gc.mu * total + logsum / gc.beta;
    return out;
}

CanonicalEnsemble::CanonicalEnsemble(Spectrum spectrum, double beta, std::int64_t N)
    : spec_(std::move(spectrum)), beta_(beta), N_(N)
{
    if (N < 0) throw std::invalid_argument("N must be nonnegative");
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
    shift_ = spec_.min_energy();
    auto n = static_cast<std::size_t>(N);
    // ln z1(j beta) on the shifted spectrum
    std::vector<double> z1(n + 1, 0.0);
    for (std::size_t l = 0; l < spec_.size(); ++l) {
        double w = std::exp(-beta * (spec_.energy[l] - shift_));
        double t = 1.0;
        for (std::size_t j = 1; j <= n; ++j) {
            t *= w;
            if (t < 1e-300) break;
            z1[j] += spec_.mult[l] * t;
        }
    }
    std::vector<double> lz1(n + 1);
    for (std::size_t j = 1; j <= n; ++j) lz1[j] = std::log(z1[j]);
    logz_.assign(n + 1, 0.0);
    std::vector<double> terms(n + 1);
    for (std::size_t m = 1; m <= n; ++m) {
        for (std::size_t k = 1; k <= m; ++k) terms[k - 1] = lz1[k] + logz_[m - k];
        logz_[m] = log_sum_exp(terms, m) - std::log(static_cast<double>(m));
    }
}

double CanonicalEnsemble::free_energy() const
{
    return -logz_.back() / beta_ + static_cast<double>(N_) * shift_;
}

double CanonicalEnsemble::ratio(std::int64_t k) const
{
    if (k > N_) return 0.0;
    return std::exp(logz_[static_cast<std::size_t>(N_ - k)] - logz_.back());
}

double CanonicalEnsemble::boltzmann(std::size_t level, std::int64_t k) const
{
    return std::exp(-static_cast<double>(k) * beta_ * (spec_.energy.at(level) - shift_));
}

double CanonicalEnsemble::occupation(std::size_t level) const
{
    double s = 0.0;
    for (std::int64_t k = 1; k <= N_; ++k) {
        double t = boltzmann(level, k) * ratio(k);
        if (t == 0.0) break;
        s += t;
    }
    return s;
}

double CanonicalEnsemble::second_moment(std::size_t level) const
{
    double s = 0.0;
    for (std::int64_t k = 1; k <= N_; ++k) {
        double t = boltzmann(level, k) * ratio(k);
        if (t == 0.0) break;
        s += static_cast<double>(2 * k - 1) * t;
    }
    return s;
}

double CanonicalEnsemble::variance(std::size_t level) const
{
    double n = occupation(level);
    return second_moment(level) - n * n;
}

double CanonicalEnsemble::tail_probability(std::size_t level, std::int64_t k) const
{
    if (k <= 0) return 1.0;
    return boltzmann(level, k) * ratio(k);
}

double CanonicalEnsemble::joint_occupation(std::size_t level_p, std::size_t level_q) const
{
    if (level_p == level_q && spec_.mult.at(level_p) < 2.0)
        throw std::domain_error("joint occupation of a mode with itself; use second_moment");
    double s = 0.0;
    for (std::int64_t j = 1; j < N_; ++j) {
        double wj = boltzmann(level_p, j);
        if (wj == 0.0) break;
        for (std::int64_t k = 1; j + k <= N_; ++k) {
            double t = wj * boltzmann(level_q, k) * ratio(j + k);
            if (t == 0.0) break;
            s += t;
        }
    }
    return s;
}

double CanonicalEnsemble::covariance(std::size_t level_p, std::size_t level_q) const
{
    if (level_p == level_q && spec_.mult.at(level_p) < 2.0)
        throw std::domain_error("covariance of a mode with itself; use variance");
    // sum_{j,k} w_p^j w_q^k (r_{j+k} - r_j r_k)
    const auto& lz = logz_;
    auto n = static_cast<std::size_t>(N_);
    double s = 0.0;
    for (std::int64_t j = 1; j <= N_; ++j) {
        double wj = boltzmann(level_p, j) * ratio(j);
        if (wj == 0.0) break;
        for (std::int64_t k = 1; k <= N_; ++k) {
            double t = wj * boltzmann(level_q, k) * ratio(k);
            if (t == 0.0) break;
            if (j + k > N_) {
                s -= t;
            } else {
                auto uj = static_cast<std::size_t>(j), uk = static_cast<std::size_t>(k);
                double d = (lz[n - uj - uk] - lz[n - uj]) - (lz[n - uk] - lz[n]);
                s += t * std::expm1(d);
            }
        }
    }
    return s;
}

std::vector<double> CanonicalEnsemble::one_pdm_diagonal() const
{
    std::vector<double> out(spec_.size());
    for (std::size_t l = 0; l < spec_.size(); ++l) out[l] = occupation(l);
    return out;
}

CanonicalEnsemble canonical_partition(double beta, std::int64_t N, double L, double lambda,
                                      double tail_tol)
{
    return CanonicalEnsemble(lattice_spectrum(beta, L, lambda, tail_tol), beta, N);
}

CanonicalObservables canonical_observables(const CanonicalEnsemble& ce)
{
    CanonicalObservables out{};
    out.free_energy = ce.free_energy();
    const auto& s = ce.spectrum();
    out.occupation.resize(s.size());
    out.second_moment.resize(s.size());
    for (std::size_t l = 0; l < s.size(); ++l) {
        out.occupation[l] = ce.occupation(l);
        out.second_moment[l] = ce.second_moment(l);
    }
    out.variance_n0 = out.second_moment[0] - out.occupation[0] * out.occupation[0];
    out.one_pdm_diagonal = out.occupation;
    return out;
}

}  // namespace bec
