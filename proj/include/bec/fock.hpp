#pragma once

#include <array>
#include <complex>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "bec/potential.hpp"

namespace bec {

using cplx = std::complex<double>;
using IntMomentum = std::array<int, 3>;
using SparseOp = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Bosonic Fock space over a finite mode list.  The first `low_count` modes
// form the low factor, the rest the high factor.  Basis states satisfy
// n_min <= sum n <= n_max, sum(low) <= low_cap and sum(high) <= high_cap.
class TruncatedFock {
public:
    TruncatedFock(std::vector<IntMomentum> modes, std::size_t low_count, int n_max, int n_min = 0);
    // product of a low factor capped at low_cap and a high factor capped at
    // high_cap, with no total cap
    static TruncatedFock product(std::vector<IntMomentum> modes, std::size_t low_count, int low_cap,
                                 int high_cap);

    std::size_t modes() const { return modes_.size(); }
    std::size_t low_count() const { return low_; }
    std::size_t high_count() const { return modes_.size() - low_; }
    const IntMomentum& momentum(std::size_t mode) const { return modes_[mode]; }
    std::ptrdiff_t find_mode(const IntMomentum& n) const;
    int n_min() const { return n_min_; }
    int n_max() const { return n_max_; }
    int low_cap() const { return low_cap_; }
    int high_cap() const { return high_cap_; }

    std::size_t dim() const { return basis_.size(); }
    const std::vector<int>& state(std::size_t i) const { return basis_[i]; }
    // -1 when the occupation tuple is outside the truncated basis
    std::ptrdiff_t index(const std::vector<int>& occ) const;
    int total(std::size_t i) const;

    // factor spaces as stand-alone Fock spaces
    TruncatedFock low_factor() const;
    TruncatedFock high_factor() const;
    // (low factor index, high factor index) of each basis state
    std::vector<std::pair<std::size_t, std::size_t>> split_indices() const;

private:
    TruncatedFock(std::vector<IntMomentum> modes, std::size_t low_count, int n_min, int n_max,
                  int low_cap, int high_cap);
    void enumerate();

    std::vector<IntMomentum> modes_;
    std::size_t low_;
    int n_min_, n_max_, low_cap_, high_cap_;
    std::vector<std::vector<int>> basis_;
    std::map<std::vector<int>, std::size_t> lookup_;
};

// binomial(n + m, m): states of m modes with total occupation <= n
std::size_t capped_dimension(int n, std::size_t m);

// coef * a*_{create[0]} a*_{create[1]} ... a_{annihilate[0]} a_{annihilate[1]} ...
struct NormalTerm {
    double coef;
    std::vector<int> create;
    std::vector<int> annihilate;
};

struct FockOperator {
    SparseOp matrix;
    std::string label;
    // normal-ordered polynomial form; empty when unknown
    std::vector<NormalTerm> terms;
};

// sparse matrix of a sum of normal-ordered monomials; amplitudes leaving the
// basis are dropped
SparseOp assemble(const TruncatedFock& space, const std::vector<NormalTerm>& terms);
FockOperator number_operator(const TruncatedFock& space);
FockOperator mode_number(const TruncatedFock& space, std::size_t mode);

struct HamiltonianParams {
    double L = 1.0;
    double mu = 0.0;
    double lambda = 0.0;
    // one-particle energy of an integer momentum; defaults to |2 pi n / L|^2
    std::function<double(const IntMomentum&)> dispersion;
    // Fourier coefficient of the pair potential at the integer momentum n
    std::function<double(const IntMomentum&)> vhat;
};

struct Operators {
    FockOperator T;
    FockOperator V;
    FockOperator H;
    FockOperator Nop;
    std::vector<std::string> warnings;
};

Operators build_operators(const TruncatedFock& space, const HamiltonianParams& params);

bool is_hermitian(const SparseOp& A, double tol = 1e-12);
double commutator_norm(const SparseOp& A, const SparseOp& B);

struct GibbsState {
    Eigen::MatrixXd rho;
    double free_energy;
    double entropy;
    double energy;
};

constexpr std::size_t max_dense_dim = 4096;

GibbsState gibbs_state(const SparseOp& H, double beta);
// tr[H Gamma] - S(Gamma) / beta
double free_energy_functional(const SparseOp& H, const Eigen::MatrixXd& gamma, double beta);

struct CoherentState {
    Eigen::VectorXcd vec;  // on space.low_factor()
    double norm_deficit;
};

// U(z)|vac> on the low factor; throws when the truncation loses more than
// max_deficit of the norm
CoherentState coherent_state(const TruncatedFock& space, const std::vector<cplx>& z,
                             double max_deficit = 1e-8);
// <n|z> for a single mode, untruncated
cplx coherent_amplitude(int n, cplx z);

// nodes and weights for integrals over C with measure dx dy / pi:
// Gauss-Laguerre in |z|^2 times a uniform phase rule.  The weights absorb
// exp(|z|^2), so the integrand carries its own Gaussian decay.
struct PlaneQuadrature {
    std::vector<cplx> nodes;
    std::vector<double> weights;
};

PlaneQuadrature plane_quadrature(int radial = 40, int angular = 32);
// Gauss-Laguerre nodes and weights for weight exp(-t) on [0, inf)
std::pair<std::vector<double>, std::vector<double>> gauss_laguerre(int n);

struct Symbols {
    Eigen::MatrixXcd lower;  // on space.high_factor()
    Eigen::MatrixXcd upper;
};

// lower symbol <z|op|z> by substituting a_p -> z_p for low modes; upper
// symbol by the anti-normal-ordering rule exp(-sum_p d^2/dz_p dzbar_p)
// applied to the lower polynomial
Symbols symbols(const TruncatedFock& space, const FockOperator& op, const std::vector<cplx>& z);

// lower minus upper symbol of H, split into its groups
struct DeltaH {
    Eigen::MatrixXcd kinetic;   // sum over low modes of (p^2 + lambda delta - mu)
    Eigen::MatrixXcd direct;    // vhat(0) (2 M N_s(z) - M^2) / 2|Lambda|
    Eigen::MatrixXcd mixed;     // 2 sum_{l low, k high} vhat(l - k) n_k / 2|Lambda|
    Eigen::MatrixXcd low;       // sum_{l,k low} vhat(l - k)(2|z_k|^2 - 1) / 2|Lambda|
    Eigen::MatrixXcd total;
};

DeltaH delta_h_formula(const TruncatedFock& space, const HamiltonianParams& params,
                       const std::vector<cplx>& z);

struct Z1Check {
    double delta_h_max;  // largest eigenvalue of Delta H
    double bound_min;    // smallest eigenvalue of the bound operator
    double gap;          // largest eigenvalue of Delta H - bound
    bool holds;
};

struct Z1Params {
    HamiltonianParams h;
    double p_c;
    double phi;
    double N;
};

Z1Check z1_bound_check(const TruncatedFock& space, const std::vector<cplx>& z, const Z1Params& params);

struct HusimiSlice {
    cplx z;
    double quad_weight;
    double weight;              // zeta(z)
    Eigen::MatrixXcd conditional;  // Gamma_z on the high factor
};

struct HusimiDecomposition {
    std::vector<HusimiSlice> slices;
    double mass;            // integral of zeta
    double classical_entropy;  // S(zeta)
    double conditional_entropy;  // integral of S(Gamma_z) zeta
};

HusimiDecomposition husimi_decompose(const TruncatedFock& space, const Eigen::MatrixXcd& gamma,
                                     const PlaneQuadrature& quad, double mass_tol = 1e-6);

struct ReducedDensities {
    Eigen::MatrixXcd one_pdm;  // <a*_q a_p> at (p, q)
    double rho2_max;
    double rho3_max;
    double fixed_N_identity;
    double N;
    double n0;  // occupation of the zero mode, if present
};

// rho2 and rho3 are the pair and triple densities (normalised to
// <N(N-1)>/2 and <N(N-1)(N-2)>/6), maximised over a grid of
// grid_points^3 positions
ReducedDensities reduced_densities(const TruncatedFock& space, const Eigen::MatrixXd& gamma, double L,
                                   int grid_points = 3);

struct JastrowNorm {
    double norm_sq;
    double lower_bound;
};

JastrowNorm jastrow_norm_check_n2(const Potential& pot, double b, double L, int order = 64);

}  // namespace bec
