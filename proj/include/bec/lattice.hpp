#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

namespace bec {

// number of integer vectors n in Z^3 with |n|^2 = k, for k = 0..kmax
std::shared_ptr<const std::vector<std::int64_t>> shell_counts(std::int64_t kmax);

struct Shell {
    std::int64_t k;      // |n|^2
    std::int64_t mult;   // number of lattice vectors on the shell
    double p2;           // (2 pi / L)^2 k
};

// The momentum lattice (2 pi / L) Z^3, truncated at |n|^2 <= max_k.
class MomentumLattice {
public:
    MomentumLattice(double L, std::int64_t max_k = 40000);

    double L() const { return L_; }
    std::int64_t max_k() const { return max_k_; }
    double max_norm() const;
    double unit() const;  // 2 pi / L
    double p2(std::int64_t k) const { return unit() * unit() * static_cast<double>(k); }
    std::int64_t multiplicity(std::int64_t k) const;
    // nonempty shells with kmin <= k <= kmax, sorted by k
    std::vector<Shell> shells(std::int64_t kmin, std::int64_t kmax) const;
    // smallest k with (2 pi / L) sqrt(k) >= kappa; near-integers snap
    std::int64_t first_shell(double kappa) const;

private:
    double L_;
    std::int64_t max_k_;
    std::shared_ptr<const std::vector<std::int64_t>> counts_;
};

using RadialFunction = std::function<double(double)>;

struct LatticeSum {
    double value;
    double tail_bound;
    std::int64_t last_shell;
};

class TailNotCertified : public std::runtime_error {
public:
    TailNotCertified(double partial, double tail)
        : std::runtime_error("lattice tail bound not reached within the enumerated shells"),
          partial_value(partial), tail_bound(tail)
    {
    }
    double partial_value;
    double tail_bound;
};

// sum of f(|p|) over p != 0 with |p| >= kappa, truncated once the majorant of
// the remaining tail drops below tail_tol
LatticeSum lattice_sum(const MomentumLattice& lat, const RadialFunction& f, double kappa,
                       double tail_tol);

// sum over every enumerated shell; tail_bound certifies the remainder but is
// not required to be small
LatticeSum lattice_sum_all(const MomentumLattice& lat, const RadialFunction& f, double kappa);

// (L/2pi)^3 int_{|p| >= [kappa - sqrt(3) 2pi/L]_+} f(|p|)(1 + 3pi/(L|p|) + 6pi/(L^2 p^2)) dp
// breakpoints mark kinks of f so the quadrature can split there
double integral_majorant(const RadialFunction& f, double kappa, double L,
                         const std::vector<double>& breakpoints = {});
// closed form of the same for f(p) = exp(-t p^2)
double gaussian_majorant(double t, double kappa, double L);

struct BoseSums {
    double count;
    double log_pressure;
    // enumerated shells plus a volume-matched integral estimate of the rest
    double inv_square;
    double A;
    double tail_bound;
    // certified bound on the inverse-square remainder beyond the shells
    double inv_square_tail;
};

BoseSums bose_sums(const MomentumLattice& lat, double beta, double mu, double kappa,
                   double tail_tol = 1e-12);

// explicit majorant of sum_{|p| >= kappa} 2/(beta p^2 - beta mu)^2, valid for
// mu < 0; includes the zero mode when kappa = 0
double inv_square_majorant(double beta, double mu, double kappa, double L);

}  // namespace bec
