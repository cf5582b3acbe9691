#include "bec/lattice.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <numbers>
#include <random>

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double pi = std::numbers::pi;

double theta_sum(double t)
{
    double s = 1.0;
    for (int n = 1; n < 60; ++n) s += 2.0 * std::exp(-t * n * n);
    return s;
}

// brute force over a cube of integer vectors
template <class F>
double cube_sum(F f, int R)
{
    double s = 0.0;
    for (int x = -R; x <= R; ++x)
        for (int y = -R; y <= R; ++y)
            for (int z = -R; z <= R; ++z)
                if (x || y || z) s += f(x * x + y * y + z * z);
    return s;
}

}  // namespace

TEST_CASE("shell multiplicities agree with brute force", "[lattice]")
{
    std::map<int, long> brute;
    for (int x = -15; x <= 15; ++x)
        for (int y = -15; y <= 15; ++y)
            for (int z = -15; z <= 15; ++z) {
                int k = x * x + y * y + z * z;
                if (k <= 200) ++brute[k];
            }
    bec::MomentumLattice lat(1.0, 200);
    for (int k = 0; k <= 200; ++k) CHECK(lat.multiplicity(k) == brute[k]);
    CHECK(lat.multiplicity(1) == 6);
    CHECK(lat.multiplicity(2) == 12);
    CHECK(lat.multiplicity(3) == 8);
    CHECK(lat.multiplicity(7) == 0);
    auto sh = lat.shells(0, 10);
    for (std::size_t i = 1; i < sh.size(); ++i) CHECK(sh[i].k > sh[i - 1].k);
}

TEST_CASE("kappa comparison includes the boundary shell", "[lattice]")
{
    bec::MomentumLattice lat(2.0 * pi, 100);
    CHECK(lat.first_shell(0.0) == 0);
    CHECK(lat.first_shell(1.0) == 1);
    CHECK(lat.first_shell(std::sqrt(2.0)) == 2);
    CHECK(lat.first_shell(std::sqrt(2.0) + 1e-6) == 3);
}

TEST_CASE("Gaussian lattice sum equals theta cubed minus one", "[lattice]")
{
    bec::MomentumLattice lat(2.0 * pi);
    auto res = bec::lattice_sum(lat, [](double p) { return std::exp(-p * p); }, 0.0, 1e-13);
    double th = theta_sum(1.0);
    CHECK_THAT(th, WithinAbs(1.7726372, 1e-7));
    CHECK_THAT(res.value, WithinAbs(th * th * th - 1.0, 1e-12));
    CHECK_THAT(res.value, WithinAbs(4.57006, 1e-5));
    CHECK(res.tail_bound < 1e-13);
}

TEST_CASE("Gaussian majorant closed form", "[lattice]")
{
    double expected = std::pow(pi, 1.5) + 3.0 * pi + 3.0 * std::sqrt(pi);
    double q = bec::integral_majorant([](double p) { return std::exp(-p * p); }, 0.0, 2.0 * pi);
    CHECK_THAT(q, WithinRel(expected, 1e-11));
    CHECK_THAT(q, WithinAbs(20.310, 1e-3));
    CHECK_THAT(bec::gaussian_majorant(1.0, 0.0, 2.0 * pi), WithinRel(expected, 1e-13));
    for (double t : {0.01, 0.3, 2.0})
        for (double kappa : {0.0, 5.0, 20.0})
            for (double L : {1.0, 7.0}) {
                double a = bec::gaussian_majorant(t, kappa, L);
                double b = bec::integral_majorant([t](double p) { return std::exp(-t * p * p); },
                                                  kappa, L);
                CHECK_THAT(a, WithinRel(b, 1e-8) || WithinAbs(b, 1e-280));
            }
}

TEST_CASE("degenerate sums", "[lattice]")
{
    bec::MomentumLattice lat(1.0);
    auto zero = [](double) { return 0.0; };
    CHECK(bec::lattice_sum(lat, zero, 0.0, 1e-12).value == 0.0);
    CHECK(bec::integral_majorant(zero, 0.0, 1.0) == 0.0);
    CHECK(bec::integral_majorant([](double p) { return std::exp(-p * p); },
                                 std::numeric_limits<double>::infinity(), 1.0) == 0.0);
    // kappa beyond every enumerated shell: value is dominated by the tail
    bec::MomentumLattice small(1.0, 50);
    auto g = [](double p) { return std::exp(-0.01 * p * p); };
    auto res = bec::lattice_sum(small, g, 400.0, 1e-10);
    CHECK(res.value <= res.tail_bound);
    CHECK_THROWS_AS(bec::lattice_sum(small, [](double p) { return std::exp(-1e-4 * p * p); }, 0.0, 1e-12),
                    bec::TailNotCertified);
}

TEST_CASE("Bose count against brute-force summation", "[lattice]")
{
    bec::MomentumLattice lat(2.0 * pi);
    auto s = bec::bose_sums(lat, 1.0, -1.0, 0.0);
    double oracle = cube_sum([](int k) { return 1.0 / std::expm1(k + 1.0); }, 8);
    CHECK_THAT(s.count, WithinRel(oracle, 1e-12));
    double lp = cube_sum([](int k) { return std::log1p(-std::exp(-(k + 1.0))); }, 8);
    CHECK_THAT(s.log_pressure, WithinRel(lp, 1e-12));
    double inv = 2.0 + cube_sum([](int k) { return 2.0 / ((k + 1.0) * (k + 1.0)); }, 200);
    CHECK_THAT(s.inv_square, WithinRel(inv, 2e-2));
    CHECK(s.inv_square <= s.A);
}

TEST_CASE("Bose sums vanish as mu goes to minus infinity", "[lattice]")
{
    bec::MomentumLattice lat(1.0);
    auto s = bec::bose_sums(lat, 1.0, -800.0, 0.0);
    CHECK(s.count < 1e-300);
    CHECK(std::abs(s.log_pressure) < 1e-300);
    double prev = s.inv_square;
    for (double mu : {-1e4, -1e6, -1e8}) {
        double cur = bec::bose_sums(lat, 1.0, mu, 0.0).inv_square;
        CHECK(cur < prev);
        prev = cur;
    }
    CHECK(prev < 1e-5);
    CHECK_THROWS_AS(bec::bose_sums(lat, 1.0, 0.0, 0.0), std::domain_error);
    CHECK_NOTHROW(bec::bose_sums(lat, 1.0, 1.0, 2.0 * 2.0 * pi));
}

TEST_CASE("inverse-square sum stays below A on a grid", "[lattice][property]")
{
    bec::MomentumLattice lat(1.0);
    for (double beta : {0.005, 0.02, 0.1, 0.5, 2.0})
        for (double mu : {-1e-3, -0.1, -1.0, -10.0, -100.0})
            for (double kappa : {0.0, 3.0, 10.0, 30.0, 80.0}) {
                auto s = bec::bose_sums(lat, beta, mu, kappa, 1e-10);
                CHECK(s.inv_square <= s.A);
                auto partial = bec::lattice_sum_all(
                    lat, [&](double p) { double y = beta * (p * p - mu); return 2.0 / (y * y); }, kappa);
                double zero = kappa == 0.0 ? 2.0 / (beta * mu * beta * mu) : 0.0;
                CHECK(partial.value + partial.tail_bound + zero <= s.A);
            }
}

TEST_CASE("lattice sum never exceeds the integral majorant", "[lattice][property]")
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    int cases = 0;
    for (int i = 0; i < 150; ++i) {
        double L = 0.5 + 4.0 * U(rng);
        double unit = 2.0 * pi / L;
        double kappa = U(rng) < 0.3 ? 0.0 : unit * 6.0 * U(rng);
        bec::MomentumLattice lat(L);
        bec::RadialFunction f;
        std::vector<double> kinks;
        switch (i % 3) {
        case 0: {
            double t = std::pow(10.0, -2.0 + 2.0 * U(rng)) / (unit * unit);
            f = [t](double p) { return std::exp(-t * p * p); };
            break;
        }
        case 1: {
            double beta = std::pow(10.0, -1.5 + 2.0 * U(rng)) / (unit * unit);
            double mu = -unit * unit * std::pow(10.0, -2.0 + 3.0 * U(rng));
            f = [beta, mu](double p) { return 1.0 / std::expm1(beta * (p * p - mu)); };
            break;
        }
        default: {
            double c = unit * (0.5 + 3.0 * U(rng));
            f = [c](double p) { return p <= c ? 1.0 : std::pow(c / p, 8.0); };
            kinks.push_back(c);
            break;
        }
        }
        auto s = bec::lattice_sum(lat, f, kappa, 1e-6);
        CHECK(s.value <= bec::integral_majorant(f, kappa, L, kinks));
        ++cases;
    }
    CHECK(cases >= 100);
}

TEST_CASE("tail certificates are sound", "[lattice][property]")
{
    for (double t : {1e-3, 1e-2, 0.1}) {
        auto f = [t](double p) { return std::exp(-t * p * p); };
        bec::MomentumLattice lat(1.0);
        auto coarse = bec::lattice_sum(lat, f, 0.0, 1e-4);
        double brute = 0.0;
        for (auto sh : lat.shells(1, lat.max_k())) brute += sh.mult * f(std::sqrt(sh.p2));
        CHECK(std::abs(brute - coarse.value) <= coarse.tail_bound);
    }
}
