#pragma once

#include <vector>

#include <Eigen/Dense>

namespace bec {

// sigma(x) = x ln x - (1 + x) ln(1 + x)
double sigma(double x);
double sigma_prime(double y);
// f(x, y) = sigma(x) - sigma(y) - sigma'(y)(x - y)
double pointwise_f(double x, double y);

// Eigenvalues of a one-particle density matrix.  The basis overlap with a
// partner spectrum is passed alongside when the bases differ.
struct OccupationSpectrum {
    std::vector<double> values;

    explicit OccupationSpectrum(std::vector<double> v);
    double trace() const;
    double max() const;
};

// |U_ij|^2 for an orthogonal U
Eigen::MatrixXd overlap_from_orthogonal(const Eigen::MatrixXd& U);
void check_overlap(const Eigen::MatrixXd& overlap, double tol = 1e-10);

double bosonic_entropy(const OccupationSpectrum& a);
double bosonic_relative_entropy(const OccupationSpectrum& a, const OccupationSpectrum& b);
double bosonic_relative_entropy(const OccupationSpectrum& a, const OccupationSpectrum& b,
                                const Eigen::MatrixXd& overlap);

struct CoercivityGap {
    double lhs;
    double rhs;
    double margin;
};

// a and b diagonal in the same basis
CoercivityGap coercivity_gap(const OccupationSpectrum& a, const OccupationSpectrum& b, double C);
// a = diag(gamma), b = U diag(eta) U^T; trace norms from a dense eigensolve
CoercivityGap coercivity_gap(const OccupationSpectrum& a, const OccupationSpectrum& b,
                             const Eigen::MatrixXd& U, double C);

struct BestConstant {
    double value;
    double x;
    double y;
    int points_per_decade;
    double lo;
    double hi;
};

// infimum of f(x,y)(1+y)(x+y)/(x-y)^2 over [lo, hi]^2: log grid then local
// refinement
BestConstant coercivity_constant(int points_per_decade = 100, double lo = 1e-6, double hi = 1e6);

double von_neumann_entropy(const Eigen::MatrixXd& rho);

struct ProjectionCheck {
    double S_hat;
    double S;
    double log_norm;
};

// Gamma = sum_i w_i |e_i><e_i|, Gamma_hat = sum_i w_i |psi_i><psi_i|
ProjectionCheck entropy_projection_check(const std::vector<double>& weights,
                                         const std::vector<Eigen::VectorXd>& directions);

}  // namespace bec
