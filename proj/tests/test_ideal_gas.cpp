#include "bec/ideal_gas.hpp"

#include <catch_amalgamated.hpp>

#include <boost/math/special_functions/zeta.hpp>

#include <cmath>
#include <functional>
#include <numbers>

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double pi = std::numbers::pi;

struct Enumerated {
    double Z = 0.0;
    std::vector<double> n;        // <n_i>
    std::vector<double> n2;       // <n_i^2>
    std::vector<std::vector<double>> nn;  // <n_i n_j>
};

// exhaustive sum over occupation tuples of distinct modes with sum n = N
Enumerated enumerate(const std::vector<double>& e, int N, double beta)
{
    std::size_t m = e.size();
    Enumerated out;
    out.n.assign(m, 0.0);
    out.n2.assign(m, 0.0);
    out.nn.assign(m, std::vector<double>(m, 0.0));
    std::vector<int> occ(m, 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
        if (i + 1 == m) {
            occ[i] = left;
            double E = 0.0;
            for (std::size_t j = 0; j < m; ++j) E += occ[j] * e[j];
            double w = std::exp(-beta * E);
            out.Z += w;
            for (std::size_t a = 0; a < m; ++a) {
                out.n[a] += w * occ[a];
                out.n2[a] += w * occ[a] * occ[a];
                for (std::size_t b = 0; b < m; ++b) out.nn[a][b] += w * occ[a] * occ[b];
            }
            return;
        }
        for (int k = 0; k <= left; ++k) {
            occ[i] = k;
            rec(i + 1, left - k);
        }
    };
    rec(0, N);
    for (std::size_t a = 0; a < m; ++a) {
        out.n[a] /= out.Z;
        out.n2[a] /= out.Z;
        for (std::size_t b = 0; b < m; ++b) out.nn[a][b] /= out.Z;
    }
    return out;
}

}  // namespace

TEST_CASE("zeta(3/2) and the critical inverse temperature", "[ideal_gas]")
{
    CHECK_THAT(bec::zeta_3_2(), WithinAbs(boost::math::zeta(1.5), 1e-13));
    CHECK_THAT(bec::zeta_3_2(), WithinAbs(2.6123753, 1e-7));
    CHECK_THAT(bec::critical_beta(bec::zeta_3_2()), WithinRel(1.0 / (4.0 * pi), 1e-14));
    CHECK_THAT(bec::critical_beta(8.0) / bec::critical_beta(1.0), WithinRel(0.25, 1e-14));
    CHECK_THAT(bec::critical_beta(1.0),
               WithinRel(std::pow(boost::math::zeta(1.5), 2.0 / 3.0) / (4.0 * pi), 1e-13));
    CHECK_THROWS_AS(bec::critical_beta(0.0), std::invalid_argument);
}

TEST_CASE("two-level toy spectrum against enumeration", "[ideal_gas]")
{
    auto s = bec::explicit_spectrum({0.0, 1.0}, {1.0, 1.0});
    bec::CanonicalEnsemble ce(s, 1.0, 2);
    double Z2 = 1.0 + std::exp(-1.0) + std::exp(-2.0);
    CHECK_THAT(std::exp(ce.log_z()[2]), WithinRel(Z2, 1e-14));
    CHECK_THAT(ce.occupation(0), WithinRel((2.0 + std::exp(-1.0)) / Z2, 1e-14));
    CHECK_THAT(ce.free_energy(), WithinRel(-std::log(Z2), 1e-14));
    bec::CanonicalEnsemble none(s, 1.0, 0);
    CHECK(none.log_z()[0] == 0.0);
    bec::CanonicalEnsemble one(s, 1.0, 1);
    CHECK_THAT(std::exp(one.log_z()[1]), WithinRel(1.0 + std::exp(-1.0), 1e-15));
}

TEST_CASE("canonical recursion matches enumeration on three modes", "[ideal_gas]")
{
    std::vector<double> e{0.3, 1.0, 1.7};
    for (int N = 1; N <= 8; ++N) {
        for (double beta : {0.2, 1.0, 3.0}) {
            auto ex = enumerate(e, N, beta);
            bec::CanonicalEnsemble ce(bec::explicit_spectrum(e, {1, 1, 1}), beta, N);
            CHECK_THAT(ce.log_z()[N], WithinAbs(std::log(ex.Z) + N * beta * 0.3, 1e-12));
            for (std::size_t a = 0; a < 3; ++a) {
                CHECK_THAT(ce.occupation(a), WithinAbs(ex.n[a], 1e-12));
                CHECK_THAT(ce.second_moment(a), WithinAbs(ex.n2[a], 1e-12));
                for (std::size_t b = 0; b < 3; ++b)
                    if (a != b) CHECK_THAT(ce.joint_occupation(a, b), WithinAbs(ex.nn[a][b], 1e-12));
            }
        }
    }
}

TEST_CASE("degenerate level joint occupation", "[ideal_gas]")
{
    // two modes share a level: compare with the 3-mode enumeration
    std::vector<double> e{0.0, 0.8, 0.8};
    auto ex = enumerate(e, 5, 1.3);
    bec::CanonicalEnsemble ce(bec::explicit_spectrum({0.0, 0.8}, {1, 2}), 1.3, 5);
    CHECK_THAT(ce.joint_occupation(1, 1), WithinAbs(ex.nn[1][2], 1e-12));
    CHECK_THAT(ce.joint_occupation(0, 1), WithinAbs(ex.nn[0][1], 1e-12));
    bec::CanonicalEnsemble one(bec::explicit_spectrum({0.0, 0.8}, {1, 2}), 1.3, 1);
    CHECK(one.joint_occupation(0, 1) == 0.0);
    CHECK_THROWS_AS(ce.joint_occupation(0, 0), std::domain_error);
}

TEST_CASE("ground state limit", "[ideal_gas]")
{
    bec::CanonicalEnsemble ce(bec::explicit_spectrum({0.0, 1.0, 2.0}, {1, 6, 12}), 60.0, 20);
    CHECK_THAT(ce.occupation(0), WithinAbs(20.0, 1e-12));
    CHECK_THAT(ce.variance(0), WithinAbs(0.0, 1e-12));
}

TEST_CASE("particle number is conserved on the lattice", "[ideal_gas]")
{
    for (double lambda : {0.0, 0.5 * 4.0 * pi * pi}) {
        auto ce = bec::canonical_partition(0.05, 200, 1.0, lambda);
        auto obs = bec::canonical_observables(ce);
        double total = 0.0;
        for (std::size_t l = 0; l < obs.occupation.size(); ++l) {
            CHECK(obs.occupation[l] >= 0.0);
            CHECK(obs.occupation[l] <= 200.0);
            total += ce.spectrum().mult[l] * obs.occupation[l];
        }
        CHECK_THAT(total, WithinAbs(200.0, 1e-8 * 200.0));
    }
}

TEST_CASE("grand-canonical closed forms", "[ideal_gas]")
{
    auto s = bec::lattice_spectrum(1.0, 2.0 * pi, 0.0);
    bec::GrandCanonical gc{1.0, 2.0 * pi, -1.0, 0.0, 0.0, s, -1.0, -1.0};
    auto obs = bec::gc_observables(gc);
    CHECK_THAT(obs.N0, WithinAbs(1.0 / (std::exp(1.0) - 1.0), 1e-15));
    CHECK_THAT(obs.N0, WithinAbs(0.58198, 1e-5));
    bec::MomentumLattice lat(2.0 * pi);
    CHECK_THAT(obs.Nth, WithinRel(bec::bose_sums(lat, 1.0, -1.0, 0.0).count, 1e-12));
}

TEST_CASE("chemical potential solve", "[ideal_gas]")
{
    auto gc = bec::solve_chemical_potential(1.0, 100.0, 2.0 * pi, 0.0);
    CHECK(gc.mu < 0.0);
    CHECK_THAT(bec::mean_number(gc.spectrum, 1.0, gc.mu), WithinAbs(100.0, 1e-8));
    double prev = -std::numeric_limits<double>::infinity();
    for (double lambda : {0.0, 0.1, 0.3, 0.6, 0.9}) {
        auto g = bec::solve_chemical_potential(1.0, 100.0, 2.0 * pi, lambda);
        CHECK(g.mu >= prev);
        CHECK(g.mu >= g.mu_lower - 1e-12);
        CHECK(g.mu <= g.mu_upper);
        prev = g.mu;
    }
}

TEST_CASE("mu0 approaches -1/(beta N0) in the condensed phase", "[ideal_gas]")
{
    double N = 1e4, L = 1.0;
    double bc = bec::critical_beta(N / (L * L * L));
    auto gc = bec::solve_chemical_potential(2.0 * bc, N, L, 0.0);
    auto obs = bec::gc_observables(gc);
    CHECK(std::abs(gc.mu * gc.beta * obs.N0 + 1.0) <= 0.2);
}

TEST_CASE("condensate fraction is monotone in beta", "[ideal_gas]")
{
    double prev = -1.0;
    for (double beta = 0.04; beta <= 0.32; beta += 0.04) {
        auto gc = bec::solve_chemical_potential(beta * 1e-2, 1000.0, 1.0, 0.0);
        double f = bec::gc_observables(gc).N0 / 1000.0;
        CHECK(f >= prev);
        prev = f;
    }
}

TEST_CASE("Suto negativity and variance identity on a small lattice", "[ideal_gas][property]")
{
    // shells k <= 4 give 1 + 6 + 12 + 8 + 6 = 33 modes
    std::vector<double> e, m;
    const double mults[] = {1, 6, 12, 8, 6};
    for (int k = 0; k <= 4; ++k) {
        e.push_back(4.0 * pi * pi * k);
        m.push_back(mults[k]);
    }
    auto s = bec::explicit_spectrum(e, m);
    CHECK(s.modes() == 33.0);
    for (int N : {2, 10, 50}) {
        for (double beta : {2.5e-4, 1.3e-3, 5e-3}) {
            bec::CanonicalEnsemble ce(s, beta, N);
            for (std::size_t a = 0; a < s.size(); ++a)
                for (std::size_t b = 0; b < s.size(); ++b) {
                    if (a == b && s.mult[a] < 2.0) continue;
                    double joint = ce.joint_occupation(a, b);
                    double prod = ce.occupation(a) * ce.occupation(b);
                    CHECK(joint < prod);
                    CHECK(ce.covariance(a, b) < 0.0);
                    CHECK_THAT(ce.covariance(a, b), WithinAbs(joint - prod, 1e-12 * prod));
                }
            // Var(n0) = Var(sum_{p != 0} n_p)
            double n0 = ce.occupation(0);
            double var0 = ce.second_moment(0) - n0 * n0;
            double second = 0.0;
            for (std::size_t a = 1; a < s.size(); ++a) {
                second += s.mult[a] * ce.second_moment(a);
                for (std::size_t b = 1; b < s.size(); ++b) {
                    double pairs = a == b ? s.mult[a] * (s.mult[a] - 1.0) : s.mult[a] * s.mult[b];
                    if (pairs > 0.0) second += pairs * ce.joint_occupation(a, b);
                }
            }
            double rest = N - n0;
            CHECK_THAT(second - rest * rest, WithinRel(var0, 1e-8) || WithinAbs(var0, 1e-10));
        }
    }
}

TEST_CASE("ensemble sandwich on a small grid", "[ideal_gas][property]")
{
    double L = 1.0;
    for (int N : {10, 100}) {
        double bc = bec::critical_beta(N / (L * L * L));
        for (double f : {0.5, 1.0, 2.0, 4.0}) {
            for (double lambda : {0.0, 2.0 * pi * pi}) {
                double beta = f * bc;
                auto ce = bec::canonical_partition(beta, N, L, lambda);
                auto gc = bec::solve_chemical_potential(ce.spectrum(), beta, N, lambda);
                double F = ce.free_energy();
                double Fgc = bec::gc_observables(gc).free_energy;
                CHECK(F >= Fgc);
                CHECK(Fgc >= F - (std::log1p(N) + 1.0) / beta);
            }
        }
    }
}
