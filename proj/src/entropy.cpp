#include "bec/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/tools/minima.hpp>

namespace bec {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double coercivity_ratio(double x, double y)
{
    double d = x - y;
    return pointwise_f(x, y) * (1.0 + y) * (x + y) / (d * d);
}

double entropy_of_eigenvalues(const Eigen::VectorXd& ev)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] > 0.0) s -= ev[i] * std::log(ev[i]);
    return s;
}

}  // namespace

double sigma(double x)
{
    if (!(x >= 0.0)) throw std::domain_error("sigma: negative argument");
    if (x == 0.0) return 0.0;
    // x ln(x/(1+x)) - ln(1+x)
    return -x * std::log1p(1.0 / x) - std::log1p(x);
}

double sigma_prime(double y)
{
    if (!(y > 0.0)) throw std::domain_error("sigma_prime: argument must be positive");
    return -std::log1p(1.0 / y);
}

double pointwise_f(double x, double y)
{
    if (!(x >= 0.0)) throw std::domain_error("pointwise_f: negative x");
    if (!(y > 0.0)) throw std::domain_error("pointwise_f: y must be positive");
    double d = x - y;
    if (std::abs(d) < 1e-4 * y) {
        // sigma^(k)(y) = (-1)^k (k-2)! (y^(1-k) - (1+y)^(1-k)), k >= 2
        double u = d / y, w = d / (1.0 + y);
        double value = 0.0, uk = u, wk = w;
        for (int k = 2; k <= 6; ++k) {
            uk *= u;
            wk *= w;
            double sign = k % 2 == 0 ? 1.0 : -1.0;
            value += sign * (uk * y - wk * (1.0 + y)) / (k * (k - 1.0));
        }
        return std::max(value, 0.0);
    }
    double value;
    if (std::min(x, y) < 1.0) {
        // x ln(x/y) - (1+x) ln((1+x)/(1+y))
        double first = x == 0.0 ? 0.0 : x * std::log1p(d / y);
        value = first - (1.0 + x) * std::log1p(d / (1.0 + y));
    } else {
        // -ln(x/y) - (1+x) ln((1+1/x)/(1+1/y)), free of the O(x) cancellation
        value = -std::log1p(d / y) - (1.0 + x) * std::log1p(-d / (x * (1.0 + y)));
    }
    return std::max(value, 0.0);
}

OccupationSpectrum::OccupationSpectrum(std::vector<double> v) : values(std::move(v))
{
    for (double x : values)
        if (!(x >= 0.0) || !std::isfinite(x))
            throw std::domain_error("OccupationSpectrum: values must be finite and nonnegative");
}

double OccupationSpectrum::trace() const
{
    return std::accumulate(values.begin(), values.end(), 0.0);
}

double OccupationSpectrum::max() const
{
    return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

Eigen::MatrixXd overlap_from_orthogonal(const Eigen::MatrixXd& U)
{
    return U.cwiseAbs2();
}

void check_overlap(const Eigen::MatrixXd& overlap, double tol)
{
    if (overlap.rows() != overlap.cols()) throw std::domain_error("overlap: matrix must be square");
    if ((overlap.array() < 0.0).any()) throw std::domain_error("overlap: negative weight");
    for (Eigen::Index i = 0; i < overlap.rows(); ++i) {
        if (std::abs(overlap.row(i).sum() - 1.0) > tol || std::abs(overlap.col(i).sum() - 1.0) > tol)
            throw std::domain_error("overlap: rows and columns must sum to 1");
    }
}

double bosonic_entropy(const OccupationSpectrum& a)
{
    double s = 0.0;
    for (double x : a.values) s -= sigma(x);
    return s;
}

double bosonic_relative_entropy(const OccupationSpectrum& a, const OccupationSpectrum& b)
{
    if (a.values.size() != b.values.size())
        throw std::domain_error("bosonic_relative_entropy: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        double x = a.values[i], y = b.values[i];
        if (y == 0.0) {
            if (x != 0.0) return inf;
            continue;
        }
        s += pointwise_f(x, y);
    }
    return s;
}

double bosonic_relative_entropy(const OccupationSpectrum& a, const OccupationSpectrum& b,
                                const Eigen::MatrixXd& overlap)
{
    auto n = static_cast<Eigen::Index>(a.values.size());
    if (b.values.size() != a.values.size() || overlap.rows() != n)
        throw std::domain_error("bosonic_relative_entropy: size mismatch");
    check_overlap(overlap);
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            double w = overlap(i, j);
            if (w == 0.0) continue;
            double x = a.values[i], y = b.values[j];
            if (y == 0.0) {
                if (x != 0.0) return inf;
                continue;
            }
            s += w * pointwise_f(x, y);
        }
    }
    return s;
}

CoercivityGap coercivity_gap(const OccupationSpectrum& a, const OccupationSpectrum& b, double C)
{
    double lhs = bosonic_relative_entropy(a, b);
    double tr = a.trace() + b.trace();
    if (tr == 0.0) return {0.0, 0.0, 0.0};
    double norm1 = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) norm1 += std::abs(a.values[i] - b.values[i]);
    double rhs = C * norm1 * norm1 / ((1.0 + b.max()) * tr);
    return {lhs, rhs, lhs - rhs};
}

CoercivityGap coercivity_gap(const OccupationSpectrum& a, const OccupationSpectrum& b,
                             const Eigen::MatrixXd& U, double C)
{
    auto n = static_cast<Eigen::Index>(a.values.size());
    if (U.rows() != n || U.cols() != n || static_cast<Eigen::Index>(b.values.size()) != n)
        throw std::domain_error("coercivity_gap: size mismatch");
    double lhs = bosonic_relative_entropy(a, b, overlap_from_orthogonal(U));
    double tr = a.trace() + b.trace();
    if (tr == 0.0) return {0.0, 0.0, 0.0};
    Eigen::VectorXd ga = Eigen::Map<const Eigen::VectorXd>(a.values.data(), n);
    Eigen::VectorXd gb = Eigen::Map<const Eigen::VectorXd>(b.values.data(), n);
    // a is diagonal; column j of U is the eigenvector of b with eigenvalue eta_j
    Eigen::MatrixXd diff = Eigen::MatrixXd(ga.asDiagonal()) - U * gb.asDiagonal() * U.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(diff, Eigen::EigenvaluesOnly);
    double norm1 = es.eigenvalues().cwiseAbs().sum();
    double rhs = C * norm1 * norm1 / ((1.0 + b.max()) * tr);
    return {lhs, rhs, lhs - rhs};
}

BestConstant coercivity_constant(int points_per_decade, double lo, double hi)
{
    if (!(lo > 0.0) || !(hi > lo) || points_per_decade < 1)
        throw std::domain_error("coercivity_constant: bad grid");
    double llo = std::log10(lo), lhi = std::log10(hi);
    int n = static_cast<int>(std::lround((lhi - llo) * points_per_decade)) + 1;
    std::vector<double> grid(n);
    for (int i = 0; i < n; ++i) grid[i] = std::pow(10.0, llo + (lhi - llo) * i / (n - 1));

    BestConstant best{inf, 0.0, 0.0, points_per_decade, lo, hi};
    int bi = 0, bj = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            double g = coercivity_ratio(grid[i], grid[j]);
            if (g < best.value) {
                best.value = g;
                bi = i;
                bj = j;
            }
        }
    }

    // alternate one-dimensional Brent searches in log coordinates inside the
    // neighbouring cells, clamped to the box
    double step = (lhi - llo) / (n - 1);
    double lx = std::log10(grid[bi]), ly = std::log10(grid[bj]);
    auto clamp = [&](double v) { return std::clamp(v, llo, lhi); };
    for (int sweep = 0; sweep < 40; ++sweep) {
        double before = best.value;
        auto fx = [&](double t) {
            double x = std::pow(10.0, t), y = std::pow(10.0, ly);
            return x == y ? inf : coercivity_ratio(x, y);
        };
        auto rx = boost::math::tools::brent_find_minima(fx, clamp(lx - step), clamp(lx + step), 52);
        if (rx.second < best.value) {
            best.value = rx.second;
            lx = rx.first;
        }
        auto fy = [&](double t) {
            double x = std::pow(10.0, lx), y = std::pow(10.0, t);
            return x == y ? inf : coercivity_ratio(x, y);
        };
        auto ry = boost::math::tools::brent_find_minima(fy, clamp(ly - step), clamp(ly + step), 52);
        if (ry.second < best.value) {
            best.value = ry.second;
            ly = ry.first;
        }
        if (before - best.value <= 1e-15 * best.value) break;
    }
    best.x = std::pow(10.0, lx);
    best.y = std::pow(10.0, ly);
    return best;
}

double von_neumann_entropy(const Eigen::MatrixXd& rho)
{
    if (rho.rows() != rho.cols()) throw std::domain_error("von_neumann_entropy: matrix must be square");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rho, Eigen::EigenvaluesOnly);
    return entropy_of_eigenvalues(es.eigenvalues());
}

ProjectionCheck entropy_projection_check(const std::vector<double>& weights,
                                         const std::vector<Eigen::VectorXd>& directions)
{
    if (weights.empty() || weights.size() != directions.size())
        throw std::domain_error("entropy_projection_check: weights and directions differ in length");
    Eigen::Index dim = directions.front().size();
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw std::domain_error("entropy_projection_check: negative weight");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-10)
        throw std::domain_error("entropy_projection_check: weights must sum to 1");

    Eigen::MatrixXd gamma_hat = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd projections = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t a = 0; a < directions.size(); ++a) {
        const auto& v = directions[a];
        if (v.size() != dim) throw std::domain_error("entropy_projection_check: dimension mismatch");
        if (std::abs(v.norm() - 1.0) > 1e-10)
            throw std::domain_error("entropy_projection_check: directions must be unit vectors");
        Eigen::MatrixXd P = v * v.transpose();
        gamma_hat += weights[a] * P;
        projections += P;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(projections, Eigen::EigenvaluesOnly);
    double S = 0.0;
    for (double w : weights)
        if (w > 0.0) S -= w * std::log(w);
    return {von_neumann_entropy(gamma_hat), S, std::log(es.eigenvalues().maxCoeff())};
}

}  // namespace bec
