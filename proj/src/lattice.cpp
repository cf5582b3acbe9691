#include "bec/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace bec {

namespace {

constexpr double pi = std::numbers::pi;

std::vector<std::int64_t> count_shells(std::int64_t kmax)
{
    std::vector<std::int64_t> c(static_cast<std::size_t>(kmax + 1), 0);
    auto rmax = static_cast<std::int64_t>(std::sqrt(static_cast<double>(kmax))) + 1;
    for (std::int64_t x = 0; x <= rmax; ++x) {
        std::int64_t x2 = x * x;
        if (x2 > kmax) break;
        for (std::int64_t y = 0; y <= rmax; ++y) {
            std::int64_t xy = x2 + y * y;
            if (xy > kmax) break;
            std::int64_t wxy = (x > 0 ? 2 : 1) * (y > 0 ? 2 : 1);
            for (std::int64_t z = 0; z <= rmax; ++z) {
                std::int64_t k = xy + z * z;
                if (k > kmax) break;
                c[static_cast<std::size_t>(k)] += wxy * (z > 0 ? 2 : 1);
            }
        }
    }
    return c;
}

}  // namespace

std::shared_ptr<const std::vector<std::int64_t>> shell_counts(std::int64_t kmax)
{
    static std::mutex m;
    static std::shared_ptr<const std::vector<std::int64_t>> cache;
    std::lock_guard<std::mutex> lock(m);
    if (!cache || static_cast<std::int64_t>(cache->size()) <= kmax) {
        std::int64_t target = std::max<std::int64_t>(kmax, 1024);
        cache = std::make_shared<const std::vector<std::int64_t>>(count_shells(target));
    }
    return cache;
}

MomentumLattice::MomentumLattice(double L, std::int64_t max_k) : L_(L), max_k_(max_k)
{
    if (!(L > 0.0)) throw std::invalid_argument("L must be positive");
    if (max_k < 1) throw std::invalid_argument("max_k must be at least 1");
    counts_ = shell_counts(max_k);
}

double MomentumLattice::unit() const { return 2.0 * pi / L_; }

double MomentumLattice::max_norm() const
{
    return unit() * std::sqrt(static_cast<double>(max_k_));
}

std::int64_t MomentumLattice::multiplicity(std::int64_t k) const
{
    if (k < 0 || k > max_k_) throw std::out_of_range("shell outside the enumerated lattice");
    return (*counts_)[static_cast<std::size_t>(k)];
}

std::vector<Shell> MomentumLattice::shells(std::int64_t kmin, std::int64_t kmax) const
{
    std::vector<Shell> out;
    kmax = std::min(kmax, max_k_);
    for (std::int64_t k = std::max<std::int64_t>(kmin, 0); k <= kmax; ++k) {
        auto m = (*counts_)[static_cast<std::size_t>(k)];
        if (m > 0) out.push_back({k, m, p2(k)});
    }
    return out;
}

std::int64_t MomentumLattice::first_shell(double kappa) const
{
    if (!(kappa > 0.0)) return 0;
    double t = kappa / unit();
    t *= t;
    double snapped = std::round(t);
    if (std::abs(t - snapped) <= 1e-9 * std::max(1.0, t)) return static_cast<std::int64_t>(snapped);
    return static_cast<std::int64_t>(std::ceil(t));
}

double integral_majorant(const RadialFunction& f, double kappa, double L,
                         const std::vector<double>& breakpoints)
{
    if (!(L > 0.0)) throw std::invalid_argument("L must be positive");
    if (std::isinf(kappa)) return 0.0;
    double rho = std::max(0.0, kappa - std::sqrt(3.0) * 2.0 * pi / L);
    auto g = [&](double p) {
        double v = f(p);
        if (v == 0.0) return 0.0;
        return v * (p * p + 3.0 * pi * p / L + 6.0 * pi / (L * L));
    };
    std::vector<double> cuts{rho};
    for (double b : breakpoints)
        if (b > rho) cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.push_back(std::numeric_limits<double>::infinity());
    double I = 0.0, err_total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double err = 0.0;
        I += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, cuts[i], cuts[i + 1],
                                                                           20, 1e-13, &err);
        err_total += err;
    }
    if (!std::isfinite(I)) return std::numeric_limits<double>::infinity();
    if (err_total > 1e-7 * std::abs(I) + 1e-300)
        throw std::runtime_error("majorant quadrature did not converge");
    double s = L / (2.0 * pi);
    return s * s * s * 4.0 * pi * I;
}

double gaussian_majorant(double t, double kappa, double L)
{
    if (!(t > 0.0)) throw std::invalid_argument("Gaussian width must be positive");
    double rho = std::max(0.0, kappa - std::sqrt(3.0) * 2.0 * pi / L);
    double e = std::exp(-t * rho * rho);
    double c = std::erfc(std::sqrt(t) * rho);
    double i2 = rho * e / (2.0 * t) + std::sqrt(pi) / (4.0 * t * std::sqrt(t)) * c;
    double i1 = e / (2.0 * t);
    double i0 = std::sqrt(pi) / (2.0 * std::sqrt(t)) * c;
    double s = L / (2.0 * pi);
    return s * s * s * 4.0 * pi * (i2 + 3.0 * pi / L * i1 + 6.0 * pi / (L * L) * i0);
}

LatticeSum lattice_sum(const MomentumLattice& lat, const RadialFunction& f, double kappa,
                       double tail_tol)
{
    if (!(tail_tol > 0.0)) throw std::invalid_argument("tail tolerance must be positive");
    std::int64_t kmin = std::max<std::int64_t>(1, lat.first_shell(kappa));
    double unit = lat.unit();
    auto tail_after = [&](std::int64_t K) {
        double edge = unit * std::sqrt(static_cast<double>(K + 1));
        return integral_majorant(f, std::max(kappa, edge), lat.L());
    };
    double value = 0.0;
    if (kmin > lat.max_k()) {
        double tail = integral_majorant(f, kappa, lat.L());
        if (!(tail < tail_tol)) throw TailNotCertified(0.0, tail);
        return {0.0, tail, kmin - 1};
    }
    std::int64_t next = kmin;
    std::int64_t K = std::max<std::int64_t>(kmin, 16);
    double tail = std::numeric_limits<double>::infinity();
    while (true) {
        K = std::min(K, lat.max_k());
        for (; next <= K; ++next) {
            auto m = lat.multiplicity(next);
            if (m) value += static_cast<double>(m) * f(unit * std::sqrt(static_cast<double>(next)));
        }
        tail = tail_after(K);
        if (tail < tail_tol) return {value, tail, K};
        if (K == lat.max_k()) throw TailNotCertified(value, tail);
        K *= 2;
    }
}

LatticeSum lattice_sum_all(const MomentumLattice& lat, const RadialFunction& f, double kappa)
{
    std::int64_t kmin = std::max<std::int64_t>(1, lat.first_shell(kappa));
    double unit = lat.unit();
    double value = 0.0;
    for (std::int64_t k = kmin; k <= lat.max_k(); ++k) {
        auto m = lat.multiplicity(k);
        if (m) value += static_cast<double>(m) * f(unit * std::sqrt(static_cast<double>(k)));
    }
    double edge = unit * std::sqrt(static_cast<double>(lat.max_k() + 1));
    return {value, integral_majorant(f, std::max(kappa, edge), lat.L()), lat.max_k()};
}

double inv_square_majorant(double beta, double mu, double kappa, double L)
{
    if (!(mu < 0.0)) throw std::domain_error("inverse-square majorant needs mu < 0");
    double rho = std::max(0.0, kappa - std::sqrt(3.0) * 2.0 * pi / L);
    double w = beta * (rho * rho - mu);
    double lead = L * L * L / std::pow(beta, 1.5);
    double A = 7.0 * lead * (1.0 / std::sqrt(w) + beta / (L * L) / (w * std::sqrt(w)));
    if (kappa == 0.0) A += 2.0 / (beta * mu * beta * mu);
    return A;
}

BoseSums bose_sums(const MomentumLattice& lat, double beta, double mu, double kappa,
                   double tail_tol)
{
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
    std::int64_t kmin = lat.first_shell(kappa);
    double emin = kappa == 0.0 ? 0.0 : lat.p2(std::max<std::int64_t>(1, kmin));
    if (!(mu < emin)) throw std::domain_error("chemical potential at or above the spectral minimum");
    auto x = [&](double p) { return beta * (p * p - mu); };
    auto count = lattice_sum(lat, [&](double p) { return 1.0 / std::expm1(x(p)); }, kappa, tail_tol);
    auto logp = lattice_sum(lat, [&](double p) { return -std::log1p(-std::exp(-x(p))); }, kappa,
                            tail_tol);
    auto inv_f = [&](double p) { double y = x(p); return 2.0 / (y * y); };
    auto inv = lattice_sum_all(lat, inv_f, kappa);
    // radius of the ball holding as many points as the enumerated shells
    std::int64_t inside = 0;
    for (std::int64_t k = 0; k <= lat.max_k(); ++k) inside += lat.multiplicity(k);
    double edge = lat.unit() * std::cbrt(3.0 * static_cast<double>(inside) / (4.0 * pi));
    double estimate = 0.0;
    if (lat.first_shell(kappa) <= lat.max_k()) {
        double err = 0.0;
        estimate = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
            [&](double p) { return inv_f(p) * p * p; }, edge,
            std::numeric_limits<double>::infinity(), 15, 1e-12, &err);
        double s = lat.L() / (2.0 * pi);
        estimate *= s * s * s * 4.0 * pi;
    }
    BoseSums out{};
    out.count = count.value;
    out.log_pressure = -logp.value;
    out.inv_square = inv.value + std::min(estimate, inv.tail_bound);
    if (kappa == 0.0) out.inv_square += 2.0 / (beta * mu * beta * mu);
    out.A = mu < 0.0 ? inv_square_majorant(beta, mu, kappa, lat.L())
                     : std::numeric_limits<double>::infinity();
    out.tail_bound = count.tail_bound + logp.tail_bound;
    out.inv_square_tail = inv.tail_bound;
    return out;
}

}  // namespace bec
