#include "bec/fock.hpp"
#include "bec/entropy.hpp"
#include "bec/parallel.hpp"

#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double pi = std::numbers::pi;

double gaussian_vhat(const bec::IntMomentum& n)
{
    return 3.0 * std::exp(-0.4 * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]));
}

double lorentz_vhat(const bec::IntMomentum& n)
{
    return 2.0 / (1.0 + 0.7 * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]));
}

double max_abs(const Eigen::MatrixXcd& A)
{
    return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff();
}

Eigen::MatrixXcd random_state(int d, std::mt19937_64& rng, int rank = 0)
{
    std::normal_distribution<double> g;
    int r = rank > 0 ? rank : d;
    Eigen::MatrixXcd A(d, r);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < r; ++j) A(i, j) = {g(rng), g(rng)};
    Eigen::MatrixXcd rho = A * A.adjoint();
    return rho / rho.trace().real();
}

// <z| (x) 1  op  |z> (x) 1 by direct contraction on a product space
Eigen::MatrixXcd direct_lower(const bec::TruncatedFock& P, const bec::SparseOp& op, const std::vector<bec::cplx>& z)
{
    auto lo = P.low_factor();
    auto hi = P.high_factor();
    auto idx = P.split_indices();
    std::vector<bec::cplx> c(lo.dim());
    for (std::size_t l = 0; l < lo.dim(); ++l) {
        bec::cplx a = 1.0;
        for (std::size_t p = 0; p < z.size(); ++p) a *= bec::coherent_amplitude(lo.state(l)[p], z[p]);
        c[l] = a;
    }
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(hi.dim()), static_cast<Eigen::Index>(hi.dim()));
    for (int k = 0; k < op.outerSize(); ++k)
        for (bec::SparseOp::InnerIterator it(op, k); it; ++it) {
            auto [li, hi_i] = idx[static_cast<std::size_t>(it.row())];
            auto [lj, hi_j] = idx[static_cast<std::size_t>(it.col())];
            out(static_cast<Eigen::Index>(hi_i), static_cast<Eigen::Index>(hi_j)) += std::conj(c[li]) * it.value() * c[lj];
        }
    return out;
}

}  // namespace

TEST_CASE("truncated Fock basis", "[fock]")
{
    std::vector<bec::IntMomentum> modes{{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}};
    for (int n = 0; n <= 6; ++n) {
        bec::TruncatedFock F(modes, 2, n);
        CHECK(F.dim() == bec::capped_dimension(n, 4));
        std::set<std::vector<int>> seen;
        for (std::size_t i = 0; i < F.dim(); ++i) {
            CHECK(F.total(i) <= n);
            CHECK(F.index(F.state(i)) == static_cast<std::ptrdiff_t>(i));
            seen.insert(F.state(i));
        }
        CHECK(seen.size() == F.dim());
    }
    CHECK(bec::capped_dimension(6, 4) == 210);

    // sectors 4..9 of three modes give 200 states
    bec::TruncatedFock S({{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}}, 1, 9, 4);
    CHECK(S.dim() == 200);
    for (std::size_t i = 0; i < S.dim(); ++i) CHECK(S.total(i) >= 4);

    auto P = bec::TruncatedFock::product(modes, 2, 5, 3);
    CHECK(P.dim() == bec::capped_dimension(5, 2) * bec::capped_dimension(3, 2));
    CHECK(P.low_factor().dim() == bec::capped_dimension(5, 2));
    CHECK(P.high_factor().dim() == bec::capped_dimension(3, 2));
    auto idx = P.split_indices();
    std::set<std::pair<std::size_t, std::size_t>> pairs(idx.begin(), idx.end());
    CHECK(pairs.size() == P.dim());

    CHECK_THROWS_AS(bec::TruncatedFock({{0, 0, 0}, {0, 0, 0}}, 1, 3), std::domain_error);
    CHECK_THROWS_AS(bec::TruncatedFock(modes, 5, 3), std::domain_error);
    CHECK(bec::TruncatedFock(modes, 2, 3).index({9, 0, 0, 0}) == -1);
}

TEST_CASE("operator construction", "[fock]")
{
    const double L = 1.3;
    std::vector<bec::IntMomentum> modes{{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {2, 0, 0}, {0, 1, 0}};
    bec::TruncatedFock F(modes, 2, 4);

    bec::HamiltonianParams none{L, 0.5, 0.0, {}, {}};
    auto free = bec::build_operators(F, none);
    CHECK(free.V.matrix.nonZeros() == 0);

    bec::HamiltonianParams hp{L, 0.5, 2.0, {}, gaussian_vhat};
    auto ops = bec::build_operators(F, hp);
    CHECK(ops.warnings.empty());
    CHECK(bec::is_hermitian(ops.T.matrix));
    CHECK(bec::is_hermitian(ops.V.matrix));
    CHECK(bec::is_hermitian(ops.H.matrix));
    CHECK(bec::commutator_norm(ops.V.matrix, ops.Nop.matrix) == 0.0);
    CHECK(bec::commutator_norm(ops.T.matrix, ops.Nop.matrix) == 0.0);

    // total momentum along x and y
    for (int axis = 0; axis < 2; ++axis) {
        std::vector<bec::NormalTerm> P;
        for (std::size_t m = 0; m < F.modes(); ++m)
            P.push_back({static_cast<double>(F.momentum(m)[axis]), {static_cast<int>(m)}, {static_cast<int>(m)}});
        CHECK(bec::commutator_norm(ops.V.matrix, bec::assemble(F, P)) == 0.0);
    }

    // diagonal of T
    for (std::size_t i = 0; i < F.dim(); ++i) {
        double e = 0.0;
        for (std::size_t m = 0; m < F.modes(); ++m) {
            const auto& n = F.momentum(m);
            double p2 = std::pow(2 * pi / L, 2) * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
            e += F.state(i)[m] * (p2 - 0.5 + (m == 0 ? 2.0 : 0.0));
        }
        CHECK_THAT(ops.T.matrix.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)), WithinAbs(e, 1e-12));
    }

    // single zero mode: V = g n (n - 1) / 2 |Lambda|
    bec::TruncatedFock one({{0, 0, 0}}, 1, 6);
    auto single = bec::build_operators(one, {L, 0.0, 0.0, {}, [](const bec::IntMomentum&) { return 1.7; }});
    for (int n = 0; n <= 6; ++n)
        CHECK_THAT(single.V.matrix.coeff(n, n), WithinAbs(1.7 * n * (n - 1) / (2 * L * L * L), 1e-14));

    auto bad = bec::build_operators(F, {L, 0.0, 0.0, {}, [](const bec::IntMomentum& n) { return n[0] == 1 || n[0] == -1 ? 2.0 : 1.0; }});
    CHECK_FALSE(bad.warnings.empty());
}

TEST_CASE("Gibbs state", "[fock]")
{
    // two-level closed form
    bec::SparseOp H(2, 2);
    H.insert(0, 0) = 0.0;
    H.insert(1, 1) = 1.5;
    auto g = bec::gibbs_state(H, 2.0);
    double Z = 1.0 + std::exp(-3.0);
    CHECK_THAT(g.free_energy, WithinAbs(-std::log(Z) / 2.0, 1e-15));
    CHECK_THAT(g.rho(1, 1), WithinAbs(std::exp(-3.0) / Z, 1e-15));
    double p = std::exp(-3.0) / Z;
    CHECK_THAT(g.entropy, WithinAbs(-(1 - p) * std::log(1 - p) - p * std::log(p), 1e-14));
    CHECK_THAT(bec::free_energy_functional(H, g.rho, 2.0), WithinAbs(g.free_energy, 1e-14));

    // large beta with a unique ground state
    bec::TruncatedFock F({{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}}, 1, 3);
    auto ops = bec::build_operators(F, {1.0, -0.5, 0.0, {}, gaussian_vhat});
    auto cold = bec::gibbs_state(ops.H.matrix, 200.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(ops.H.matrix)};
    Eigen::VectorXd v = es.eigenvectors().col(0);
    CHECK((cold.rho - v * v.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Gibbs variational principle", "[fock][property]")
{
    bec::TruncatedFock F({{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}}, 1, 9, 4);
    REQUIRE(F.dim() == 200);
    auto ops = bec::build_operators(F, {1.0, -2.0, 0.0, {}, gaussian_vhat});
    double beta = 0.05;
    auto g = bec::gibbs_state(ops.H.matrix, beta);
    CHECK_THAT(bec::free_energy_functional(ops.H.matrix, g.rho, beta), WithinAbs(g.free_energy, 1e-9));
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n;
    for (int t = 0; t < 20; ++t) {
        Eigen::MatrixXd A(200, t % 2 == 0 ? 200 : 3);
        for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = n(rng);
        Eigen::MatrixXd rho = A * A.transpose();
        rho /= rho.trace();
        if (t % 4 == 3) rho = 0.99 * g.rho + 0.01 * rho;
        CHECK(g.free_energy <= bec::free_energy_functional(ops.H.matrix, rho, beta));
    }
}

TEST_CASE("Gauss-Laguerre rule", "[fock]")
{
    auto [x, w] = bec::gauss_laguerre(20);
    for (int k = 0; k < 40; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * std::pow(x[i], k);
        CHECK_THAT(s, WithinRel(std::tgamma(k + 1.0), 1e-11));
    }
    auto q = bec::plane_quadrature(40, 32);
    CHECK(q.nodes.size() == 40 * 32);
}

TEST_CASE("coherent states", "[fock]")
{
    bec::TruncatedFock F({{0, 0, 0}, {1, 0, 0}}, 2, 20);
    auto vac = bec::coherent_state(F, {0.0, 0.0});
    CHECK(std::abs(vac.vec[0] - 1.0) < 1e-15);
    CHECK(vac.vec.tail(vac.vec.size() - 1).norm() == 0.0);

    bec::TruncatedFock one({{0, 0, 0}}, 1, 20);
    auto cs = bec::coherent_state(one, {bec::cplx(0.6, 0.8)});
    double n = 0.0;
    for (int k = 0; k <= 20; ++k) n += k * std::norm(cs.vec[k]);
    CHECK(cs.norm_deficit < 1e-15);
    CHECK_THAT(n, WithinAbs(1.0, 1e-12));

    // a_p |z> = z_p |z> away from the cap
    std::vector<bec::cplx> z{{0.3, -0.4}, {0.5, 0.1}};
    auto two = bec::coherent_state(F, z);
    auto lo = F.low_factor();
    for (std::size_t p = 0; p < 2; ++p) {
        auto a = bec::assemble(lo, {{1.0, {}, {static_cast<int>(p)}}});
        Eigen::VectorXcd lhs = a.cast<bec::cplx>() * two.vec;
        CHECK((lhs - z[p] * two.vec).norm() < 1e-12);
    }
    CHECK_THROWS_AS(bec::coherent_state(one, {bec::cplx(4.0, 0.0)}), std::runtime_error);
    CHECK_THROWS_AS(bec::coherent_state(one, z), std::domain_error);
}

TEST_CASE("coherent-state resolution of identity", "[fock]")
{
    auto q = bec::plane_quadrature(40, 32);
    double worst = 0.0;
    for (int m = 0; m <= 4; ++m)
        for (int n = 0; n <= 4; ++n) {
            bec::cplx s = 0.0;
            for (std::size_t i = 0; i < q.nodes.size(); ++i)
                s += q.weights[i] * bec::coherent_amplitude(m, q.nodes[i]) * std::conj(bec::coherent_amplitude(n, q.nodes[i]));
            worst = std::max(worst, std::abs(s - (m == n ? 1.0 : 0.0)));
        }
    CHECK(worst <= 1e-6);

    // independent rule: Gauss-Legendre in |z|^2 on [0, 30], exact phase average
    for (int n = 0; n <= 4; ++n) {
        double s = boost::math::quadrature::gauss<double, 30>::integrate(
            [n](double t) { return std::norm(bec::coherent_amplitude(n, std::sqrt(t))); }, 0.0, 30.0);
        CHECK_THAT(s, WithinAbs(1.0, 1e-6));
    }
}

TEST_CASE("lower and upper symbols of simple operators", "[fock]")
{
    std::vector<bec::IntMomentum> modes{{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}};
    bec::TruncatedFock F(modes, 1, 4);
    bec::cplx z(0.7, -0.2);
    auto n0 = bec::mode_number(F, 0);
    auto s = bec::symbols(F, n0, {z});
    auto d = s.lower.rows();
    CHECK(max_abs(s.lower - std::norm(z) * Eigen::MatrixXcd::Identity(d, d)) < 1e-15);
    CHECK(max_abs(s.upper - (std::norm(z) - 1.0) * Eigen::MatrixXcd::Identity(d, d)) < 1e-15);

    bec::FockOperator id{bec::SparseOp(), "1", {{1.0, {}, {}}}};
    auto si = bec::symbols(F, id, {z});
    CHECK(max_abs(si.lower - Eigen::MatrixXcd::Identity(d, d)) == 0.0);
    CHECK(max_abs(si.upper - Eigen::MatrixXcd::Identity(d, d)) == 0.0);

    // (a*)^2 a^2 -> |z|^4 - 4|z|^2 + 2
    bec::FockOperator quartic{bec::SparseOp(), "q", {{1.0, {0, 0}, {0, 0}}}};
    auto sq = bec::symbols(F, quartic, {z});
    double t = std::norm(z);
    CHECK_THAT(sq.upper(0, 0).real(), WithinAbs(t * t - 4 * t + 2, 1e-14));

    bec::FockOperator opaque{bec::assemble(F, {{1.0, {0}, {0}}}), "opaque", {}};
    CHECK_THROWS_AS(bec::symbols(F, opaque, {z}), std::domain_error);
}

TEST_CASE("lower symbol of H against direct contraction", "[fock]")
{
    // two low and two high modes; the low factor carries enough occupation
    // for the coherent states to be exact to double precision
    std::vector<bec::IntMomentum> modes{{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {2, 0, 0}};
    auto P = bec::TruncatedFock::product(modes, 2, 30, 6);
    bec::HamiltonianParams hp{1.0, -0.3, 0.8, {}, gaussian_vhat};
    auto ops = bec::build_operators(P, hp);
    std::vector<bec::cplx> z{{0.6, 0.3}, {-0.4, 0.5}};
    auto s = bec::symbols(P, ops.H, z);
    auto direct = direct_lower(P, ops.H.matrix, z);
    CHECK(max_abs(s.lower - direct) < 1e-10);
}

TEST_CASE("upper symbol reconstructs H by quadrature", "[fock]")
{
    std::vector<bec::IntMomentum> modes{{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {2, 0, 0}};
    auto P = bec::TruncatedFock::product(modes, 2, 8, 3);
    bec::HamiltonianParams hp{1.0, -0.3, 0.8, {}, lorentz_vhat};
    auto ops = bec::build_operators(P, hp);
    auto lo = P.low_factor();
    auto hi = P.high_factor();
    auto q = bec::plane_quadrature(6, 8);

    // low states with total occupation <= 2
    std::vector<std::size_t> small;
    for (std::size_t l = 0; l < lo.dim(); ++l)
        if (lo.total(l) <= 2) small.push_back(l);
    auto dh = static_cast<Eigen::Index>(hi.dim());
    std::vector<Eigen::MatrixXcd> acc(small.size() * small.size(), Eigen::MatrixXcd::Zero(dh, dh));
    for (std::size_t i = 0; i < q.nodes.size(); ++i)
        for (std::size_t j = 0; j < q.nodes.size(); ++j) {
            std::vector<bec::cplx> z{q.nodes[i], q.nodes[j]};
            double w = q.weights[i] * q.weights[j];
            auto up = bec::symbols(P, ops.H, z).upper;
            for (std::size_t a = 0; a < small.size(); ++a) {
                const auto& m = lo.state(small[a]);
                bec::cplx cm = bec::coherent_amplitude(m[0], z[0]) * bec::coherent_amplitude(m[1], z[1]);
                for (std::size_t b = 0; b < small.size(); ++b) {
                    const auto& n = lo.state(small[b]);
                    bec::cplx cn = bec::coherent_amplitude(n[0], z[0]) * bec::coherent_amplitude(n[1], z[1]);
                    acc[a * small.size() + b] += w * cm * std::conj(cn) * up;
                }
            }
        }
    Eigen::MatrixXd H(ops.H.matrix);
    auto idx = P.split_indices();
    double worst = 0.0;
    for (std::size_t i = 0; i < P.dim(); ++i)
        for (std::size_t j = 0; j < P.dim(); ++j) {
            auto [li, hi_i] = idx[i];
            auto [lj, hi_j] = idx[j];
            auto a = std::find(small.begin(), small.end(), li);
            auto b = std::find(small.begin(), small.end(), lj);
            if (a == small.end() || b == small.end()) continue;
            auto k = static_cast<std::size_t>(a - small.begin()) * small.size() + static_cast<std::size_t>(b - small.begin());
            bec::cplx rec = acc[k](static_cast<Eigen::Index>(hi_i), static_cast<Eigen::Index>(hi_j));
            worst = std::max(worst, std::abs(rec - H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
        }
    CHECK(worst < 1e-10);
}

TEST_CASE("symbol difference formula", "[fock]")
{
    // M = 2 low modes, 2 high modes, occupation cap 6
    std::vector<bec::IntMomentum> modes{{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {2, 0, 0}};
    bec::TruncatedFock F(modes, 2, 6);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (auto vhat : {std::function<double(const bec::IntMomentum&)>(gaussian_vhat),
                      std::function<double(const bec::IntMomentum&)>(lorentz_vhat)}) {
        bec::HamiltonianParams hp{1.0, -1.1, 0.6, {}, vhat};
        auto ops = bec::build_operators(F, hp);
        for (int t = 0; t < 5; ++t) {
            std::vector<bec::cplx> z{{g(rng), g(rng)}, {g(rng), g(rng)}};
            auto s = bec::symbols(F, ops.H, z);
            auto dh = bec::delta_h_formula(F, hp, z);
            CHECK(max_abs(s.lower - s.upper - dh.total) < 1e-10);
        }
    }

    // group by group: kinetic only, then a contact vhat
    std::vector<bec::cplx> z{{0.4, 0.1}, {-0.2, 0.9}};
    bec::HamiltonianParams kin{1.0, -1.1, 0.6, {}, {}};
    auto sk = bec::symbols(F, bec::build_operators(F, kin).H, z);
    auto dk = bec::delta_h_formula(F, kin, z);
    CHECK(max_abs(sk.lower - sk.upper - dk.kinetic) < 1e-10);
    CHECK(max_abs(dk.direct) == 0.0);
    CHECK_THAT(dk.kinetic(0, 0).real(), WithinAbs(0.6 + 1.1 + 4 * pi * pi + 1.1, 1e-12));

    auto contact = [](const bec::IntMomentum& n) { return n[0] == 0 && n[1] == 0 && n[2] == 0 ? 2.5 : 0.0; };
    bec::HamiltonianParams cp{1.0, 0.0, 0.0, {}, contact};
    auto sc = bec::symbols(F, bec::build_operators(F, cp).V, z);
    auto dc = bec::delta_h_formula(F, cp, z);
    CHECK(max_abs(dc.mixed) == 0.0);
    double z2 = std::norm(z[0]) + std::norm(z[1]);
    CHECK_THAT(dc.low(0, 0).real(), WithinAbs(2.5 * (2 * z2 - 2) / 2.0, 1e-12));
    CHECK(max_abs(sc.lower - sc.upper - dc.direct - dc.low) < 1e-10);
}

TEST_CASE("Z1 operator bound", "[fock]")
{
    // low: |p| < p_c = 1.2 * 2 pi; high: (1,1,0) and (-1,-1,0)
    std::vector<bec::IntMomentum> modes{{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {1, 1, 0}, {-1, -1, 0}};
    bec::TruncatedFock F(modes, 3, 4);
    double pc = 1.2 * 2 * pi;
    double N = 10.0;
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g;

    // vhat = 0, lambda = 0: the constant sum over low modes
    bec::Z1Params zero{{1.0, -0.4, 0.0, {}, {}}, pc, 0.1, N};
    std::vector<bec::cplx> z0(3, 0.0);
    auto c0 = bec::z1_bound_check(F, z0, zero);
    CHECK(c0.holds);
    CHECK_THAT(c0.delta_h_max, WithinAbs(2 * 4 * pi * pi + 3 * 0.4, 1e-10));

    for (auto vhat : {std::function<double(const bec::IntMomentum&)>(gaussian_vhat),
                      std::function<double(const bec::IntMomentum&)>(lorentz_vhat)}) {
        double phi = vhat({0, 0, 0}) * N / (8 * pi);
        bec::Z1Params zp{{1.0, -0.4, 0.9, {}, vhat}, pc, phi, N};
        CHECK(bec::z1_bound_check(F, z0, zp).holds);
        for (int t = 0; t < 5; ++t) {
            std::vector<bec::cplx> z{{g(rng), g(rng)}, {g(rng), g(rng)}, {g(rng), g(rng)}};
            auto c = bec::z1_bound_check(F, z, zp);
            CHECK(c.holds);
            CHECK(c.gap <= 1e-10);
        }
        bec::Z1Params tight{{1.0, -0.4, 0.9, {}, vhat}, pc, 0.5 * phi, N};
        CHECK_THROWS_AS(bec::z1_bound_check(F, z0, tight), std::domain_error);
    }
    bec::Z1Params wrong{{1.0, 0.0, 0.0, {}, {}}, 0.5, 0.1, N};
    CHECK_THROWS_AS(bec::z1_bound_check(F, z0, wrong), std::domain_error);
}

TEST_CASE("Husimi decomposition of a product state", "[fock]")
{
    bec::TruncatedFock F({{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}}, 1, 4);
    auto hi = F.high_factor();
    std::mt19937_64 rng(2);
    auto rho = random_state(static_cast<int>(hi.dim()), rng);
    Eigen::MatrixXcd gamma = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(F.dim()), static_cast<Eigen::Index>(F.dim()));
    auto idx = F.split_indices();
    for (std::size_t i = 0; i < F.dim(); ++i)
        for (std::size_t j = 0; j < F.dim(); ++j)
            if (idx[i].first == 0 && idx[j].first == 0)
                gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    rho(static_cast<Eigen::Index>(idx[i].second), static_cast<Eigen::Index>(idx[j].second));
    auto h = bec::husimi_decompose(F, gamma, bec::plane_quadrature());
    CHECK_THAT(h.mass, WithinAbs(1.0, 1e-12));
    for (const auto& s : h.slices) {
        CHECK_THAT(s.weight, WithinRel(std::exp(-std::norm(s.z)), 1e-10));
        if (s.weight > 1e-200) CHECK(max_abs(s.conditional - rho) < 1e-10);
    }
    // S(zeta) for zeta = e^{-|z|^2} is 1
    CHECK_THAT(h.classical_entropy, WithinAbs(1.0, 1e-10));

    bec::TruncatedFock two({{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}}, 2, 4);
    CHECK_THROWS_AS(bec::husimi_decompose(two, Eigen::MatrixXcd::Identity(static_cast<Eigen::Index>(two.dim()), static_cast<Eigen::Index>(two.dim())), bec::plane_quadrature()),
                    std::domain_error);
}

TEST_CASE("entropy decomposition on random states", "[fock][property]")
{
    bec::TruncatedFock F({{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}}, 1, 4);
    auto q = bec::plane_quadrature();
    auto d = static_cast<int>(F.dim());
    auto margins = bec::parallel_map<double>(50, [&](std::size_t i) {
        std::mt19937_64 rng(bec::case_seed(17, i));
        auto gamma = random_state(d, rng, 1 + static_cast<int>(i % 6));
        auto h = bec::husimi_decompose(F, gamma, q, 1e-4);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gamma, Eigen::EigenvaluesOnly);
        double S = 0.0;
        for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
            double p = es.eigenvalues()[k];
            if (p > 0) S -= p * std::log(p);
        }
        for (const auto& s : h.slices)
            if (s.weight > 1e-300) {
                CHECK_THAT(s.conditional.trace().real(), WithinAbs(1.0, 1e-10));
            }
        return h.conditional_entropy + h.classical_entropy - S;
    });
    for (double m : margins) CHECK(m >= -1e-4);
}

TEST_CASE("reduced densities of canonical ideal-gas states", "[fock][property]")
{
    std::vector<bec::IntMomentum> modes{{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    const double L = 1.0;
    for (int N : {2, 3}) {
        bec::TruncatedFock F(modes, 0, N, N);
        auto T = bec::build_operators(F, {L, 0.0, 0.0, {}, {}}).T;
        for (double beta : {0.005, 0.02, 0.1}) {
            auto g = bec::gibbs_state(T.matrix, beta);
            auto r = bec::reduced_densities(F, g.rho, L, 2);
            CHECK(r.N == N);
            CHECK(r.fixed_N_identity <= 1e-10);
            CHECK_THAT(r.one_pdm.trace().real(), WithinAbs(N, 1e-10));
            double vol = L * L * L;
            CHECK(r.rho2_max <= (2.0 * N * N - r.n0 * r.n0) / (2.0 * vol * vol) + 1e-10);
            CHECK(r.rho3_max <= std::pow(N / vol, 3) + 1e-10);
        }
    }
    // the diagonal pair density of a pure condensate is N(N-1)/2|Lambda|^2
    bec::TruncatedFock F(modes, 0, 3, 3);
    Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(F.dim()), static_cast<Eigen::Index>(F.dim()));
    auto k = F.index({3, 0, 0, 0, 0, 0, 0});
    cond(k, k) = 1.0;
    auto r = bec::reduced_densities(F, cond, 2.0, 2);
    CHECK_THAT(r.rho2_max, WithinAbs(3.0 / 64.0, 1e-14));
    CHECK_THAT(r.rho3_max, WithinAbs(1.0 / 512.0, 1e-14));
    CHECK_THAT(r.n0, WithinAbs(3.0, 1e-14));

    bec::TruncatedFock mixed(modes, 0, 2);
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(mixed.dim()), static_cast<Eigen::Index>(mixed.dim()));
    m /= m.trace();
    CHECK_THROWS_AS(bec::reduced_densities(mixed, m, L), std::domain_error);
}

TEST_CASE("two-particle Jastrow norm", "[fock]")
{
    CHECK(bec::jastrow_norm_check_n2(bec::Potential::zero(), 0.2, 1.0).norm_sq == 1.0);

    const double L = 1.0;
    auto hs = bec::Potential::hard_sphere(0.01);
    double prev = 2.0;
    for (double b : {0.012, 0.02, 0.05, 0.1, 0.2, 0.4}) {
        auto r = bec::jastrow_norm_check_n2(hs, b, L);
        CHECK(r.norm_sq >= r.lower_bound);
        CHECK(r.norm_sq < prev);
        prev = r.norm_sq;
        // cross-check with the Jastrow integrals of the potential module
        auto ji = bec::jastrow_integrals(bec::jastrow_profile(hs, b));
        CHECK_THAT(r.norm_sq, WithinAbs(1.0 - ji.eta_int / (L * L * L), 1e-9));
    }
    // hard sphere closed form: 1 - f^2 integrated over the ball
    double a = 0.01, b = 0.1;
    double c = 1.0 / (1.0 - a / b);
    double ball = 4 * pi * (b * b * b / 3 - c * c * ((b * b * b - a * a * a) / 3 - a * (b * b - a * a) + a * a * (b - a)));
    CHECK_THAT(bec::jastrow_norm_check_n2(hs, b, L).norm_sq, WithinAbs(1.0 - ball, 1e-10));

    // the cube branch joins the ball branch at b = L/2
    auto in = bec::jastrow_norm_check_n2(hs, 0.5 - 1e-9, L);
    auto out = bec::jastrow_norm_check_n2(hs, 0.5 + 1e-9, L);
    CHECK_THAT(out.norm_sq, WithinAbs(in.norm_sq, 1e-8));
    auto wide = bec::jastrow_norm_check_n2(hs, 0.7, L);
    CHECK(wide.norm_sq >= wide.lower_bound);
    CHECK(wide.norm_sq < in.norm_sq);
}
