#pragma once

#include <cstdint>
#include <vector>

#include "bec/lattice.hpp"

namespace bec {

double zeta_3_2();
double critical_beta(double rho);

// One-particle spectrum as energy levels with integer multiplicities.  Level 0
// is the condensate mode when built from the lattice.
struct Spectrum {
    std::vector<double> energy;
    std::vector<double> mult;
    std::vector<std::int64_t> shell;  // |n|^2 per level, -1 for explicit spectra
    double tail_bound = 0.0;          // bound on the neglected Boltzmann weight
    double L = 1.0;

    std::size_t size() const { return energy.size(); }
    double min_energy() const;
    double modes() const;
};

// levels p^2 on (2 pi / L) Z^3 with the p = 0 level shifted to lambda; shells
// are kept until the Gaussian majorant of the rest at inverse temperature
// beta drops below tail_tol
Spectrum lattice_spectrum(double beta, double L, double lambda, double tail_tol = 1e-14);
Spectrum explicit_spectrum(std::vector<double> energy, std::vector<double> mult);

struct GrandCanonical {
    double beta;
    double L;
    double mu;
    double lambda;
    double N;  // target mean particle number
    Spectrum spectrum;
    // bracket used for the bisection
    double mu_lower;
    double mu_upper;
};

double mean_number(const Spectrum& s, double beta, double mu);

GrandCanonical solve_chemical_potential(double beta, double N, double L, double lambda,
                                        double tol = 1e-10);
GrandCanonical solve_chemical_potential(const Spectrum& s, double beta, double N,
                                        double lambda, double tol = 1e-10);

struct GcObservables {
    double N0;
    double Nth;
    double free_energy;
    std::vector<double> occupation;  // per mode of each level
};

GcObservables gc_observables(const GrandCanonical& gc);

// grand-canonical single-mode moments at x = beta (e - mu)
double gc_mean(double x);
double gc_second_moment(double x);
double gc_tail_probability(double x, int k);

class CanonicalEnsemble {
public:
    CanonicalEnsemble(Spectrum spectrum, double beta, std::int64_t N);

    double beta() const { return beta_; }
    std::int64_t N() const { return N_; }
    const Spectrum& spectrum() const { return spec_; }
    double shift() const { return shift_; }
    // ln Z_C(n) for the shifted spectrum, n = 0..N
    const std::vector<double>& log_z() const { return logz_; }

    double free_energy() const;
    double occupation(std::size_t level) const;
    double second_moment(std::size_t level) const;
    double variance(std::size_t level) const;
    // P(n_p >= k)
    double tail_probability(std::size_t level, std::int64_t k) const;
    // <n_p n_q> for two distinct modes living on the given levels
    double joint_occupation(std::size_t level_p, std::size_t level_q) const;
    // <n_p n_q> - <n_p><n_q>, summed termwise to avoid cancellation
    double covariance(std::size_t level_p, std::size_t level_q) const;
    std::vector<double> one_pdm_diagonal() const;

private:
    // Z_C(N - k) / Z_C(N)
    double ratio(std::int64_t k) const;
    double boltzmann(std::size_t level, std::int64_t k) const;

    Spectrum spec_;
    double beta_;
    std::int64_t N_;
    double shift_;
    std::vector<double> logz_;
};

CanonicalEnsemble canonical_partition(double beta, std::int64_t N, double L, double lambda,
                                      double tail_tol = 1e-14);

struct CanonicalObservables {
    double free_energy;
    std::vector<double> occupation;
    std::vector<double> second_moment;
    double variance_n0;
    std::vector<double> one_pdm_diagonal;
};

CanonicalObservables canonical_observables(const CanonicalEnsemble& ce);

}  // namespace bec
