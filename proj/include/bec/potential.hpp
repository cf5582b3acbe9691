#pragma once

#include <istream>
#include <memory>
#include <string>
#include <vector>

namespace bec {

// Radial pair potential: +inf on [0, core_radius), piecewise-linear tail on
// [core_radius, range], zero beyond range.  Repeated radii in the node list
// encode a jump; the value right of the jump is used at the node itself.
class Potential {
public:
    Potential() = default;
    Potential(double core_radius, std::vector<double> r, std::vector<double> v);

    static Potential zero();
    static Potential hard_sphere(double radius);
    static Potential square_well(double radius, double height);
    static Potential parse(std::istream& in);
    static Potential from_file(const std::string& path);

    double core_radius() const { return core_; }
    double range() const { return range_; }
    const std::vector<double>& nodes() const { return r_; }
    const std::vector<double>& values() const { return v_; }
    bool has_core() const { return core_ > 0.0; }
    bool is_zero() const;

    // tail value; callers must not ask inside the core
    double operator()(double r) const;
    double max_value() const;
    // int_core^inf v(r) r^2 dr
    double moment2() const;

private:
    double core_ = 0.0;
    double range_ = 0.0;
    std::vector<double> r_;
    std::vector<double> v_;
};

struct ProfileNode {
    double r;
    double u;
    double du;
};

class ScatteringSolution {
public:
    ScatteringSolution(double a, double match_radius, double core, double range,
                       std::vector<ProfileNode> nodes);

    double a() const { return a_; }
    double match_radius() const { return match_; }
    // u(r), normalised so that u(r)/r = 1 - a/r beyond the range
    double u(double r) const;
    double du(double r) const;
    // f0(r) = u(r)/r
    double f0(double r) const;
    const std::vector<ProfileNode>& nodes() const { return nodes_; }

private:
    double a_;
    double match_;
    double core_;
    double range_;
    std::vector<ProfileNode> nodes_;
};

ScatteringSolution solve_zero_energy(const Potential& pot, double match_radius,
                                     double tol = 1e-10);
double scattering_length(const Potential& pot);
Potential scale_potential(const Potential& pot, double N, double L);

class JastrowProfile {
public:
    JastrowProfile(std::shared_ptr<const Potential> pot,
                   std::shared_ptr<const ScatteringSolution> sol, double b);

    double b() const { return b_; }
    double a() const { return sol_->a(); }
    double operator()(double r) const;
    double derivative(double r) const;
    const Potential& source() const { return *pot_; }
    const ScatteringSolution& solution() const { return *sol_; }

private:
    std::shared_ptr<const Potential> pot_;
    std::shared_ptr<const ScatteringSolution> sol_;
    double b_;
    double f0b_;
};

JastrowProfile jastrow_profile(const Potential& pot, double b);

struct JastrowIntegrals {
    double eta_int;
    double xi_int;
    double gradf_int;
    double eta_err;
    double xi_err;
    double gradf_err;
    // gradf_int / (a b); no constant is asserted for it
    double gradf_ratio;
};

JastrowIntegrals jastrow_integrals(const JastrowProfile& jp, double tol = 1e-10);

struct CappedPotential {
    Potential pot;
    double cap;
    double integral;
    double a_tilde;
    double a_bound;
    bool unchanged;
};

CappedPotential cap_to_integrable(const Potential& pot, double phi, double eps);

}  // namespace bec
