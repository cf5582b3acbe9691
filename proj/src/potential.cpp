#include "bec/potential.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/numeric/odeint.hpp>

namespace bec {

namespace {

using state4 = std::array<double, 5>;

struct Segment {
    double r0, r1, v0, v1;
    double at(double r) const
    {
        if (r1 == r0) return v0;
        return v0 + (v1 - v0) * (r - r0) / (r1 - r0);
    }
};

// segments of linear behaviour between start and stop, including the free
// region beyond the range
std::vector<Segment> segments(const Potential& pot, double start, double stop)
{
    std::vector<Segment> out;
    const auto& r = pot.nodes();
    const auto& v = pot.values();
    double cur = start;
    if (!r.empty() && r.front() > cur) {
        double hi = std::min(r.front(), stop);
        if (hi > cur) out.push_back({cur, hi, v.front(), v.front()});
        cur = hi;
    }
    for (std::size_t i = 0; i + 1 < r.size() && cur < stop; ++i) {
        if (r[i + 1] <= r[i] || r[i + 1] <= cur) continue;
        Segment s{r[i], r[i + 1], v[i], v[i + 1]};
        double lo = std::max(cur, r[i]);
        double hi = std::min(stop, r[i + 1]);
        if (hi > lo) {
            out.push_back({lo, hi, s.at(lo), s.at(hi)});
            cur = hi;
        }
    }
    if (cur < stop) out.push_back({cur, stop, 0.0, 0.0});
    return out;
}

struct Rhs {
    Segment seg;
    void operator()(const state4& y, state4& dy, double r) const
    {
        double v = seg.at(r);
        double ratio = r > 0.0 ? y[0] / r : y[1];
        dy[0] = y[1];
        dy[1] = 0.5 * v * y[0];
        dy[2] = y[0] * y[0];
        double g = y[1] - ratio;
        dy[3] = g * g + 0.5 * v * y[0] * y[0];
        dy[4] = y[1] * r - y[0];
    }
};

// integrates u'' = v u / 2 from the core with u = 0, u' = 1, accumulating the
// integrals needed by the Jastrow profile
state4 integrate(const Potential& pot, double stop, double tol,
                 std::vector<ProfileNode>* nodes)
{
    namespace odeint = boost::numeric::odeint;
    state4 y{0.0, 1.0, 0.0, 0.0, 0.0};
    double start = pot.core_radius();
    if (nodes) nodes->push_back({start, 0.0, 1.0});
    if (stop <= start) return y;
    auto stepper = odeint::make_controlled<odeint::runge_kutta_dopri5<state4>>(
        1e-3 * tol, tol);
    for (const auto& seg : segments(pot, start, stop)) {
        double h = (seg.r1 - seg.r0) / 64.0;
        try {
            odeint::integrate_adaptive(
                stepper, Rhs{seg}, y, seg.r0, seg.r1, h,
                [&](const state4& s, double r) {
                    if (nodes && r > nodes->back().r) nodes->push_back({r, s[0], s[1]});
                });
        } catch (const odeint::step_adjustment_error& e) {
            throw std::runtime_error(std::string("radial integration failed: ") + e.what());
        } catch (const odeint::no_progress_error& e) {
            throw std::runtime_error(std::string("radial integration failed: ") + e.what());
        }
        if (!std::isfinite(y[0]) || !std::isfinite(y[1]))
            throw std::runtime_error("radial integration overflowed");
    }
    return y;
}

double hermite(const ProfileNode& a, const ProfileNode& b, double r, bool deriv)
{
    double h = b.r - a.r;
    double t = (r - a.r) / h;
    double t2 = t * t, t3 = t2 * t;
    if (!deriv) {
        return (2 * t3 - 3 * t2 + 1) * a.u + (t3 - 2 * t2 + t) * h * a.du +
               (-2 * t3 + 3 * t2) * b.u + (t3 - t2) * h * b.du;
    }
    return ((6 * t2 - 6 * t) * a.u + (-6 * t2 + 6 * t) * b.u) / h +
           (3 * t2 - 4 * t + 1) * a.du + (3 * t2 - 2 * t) * b.du;
}

double segment_moment(double r0, double r1, double v0, double v1)
{
    if (r1 <= r0) return 0.0;
    double beta = (v1 - v0) / (r1 - r0);
    double alpha = v0 - beta * r0;
    return alpha * (r1 * r1 * r1 - r0 * r0 * r0) / 3.0 +
           beta * (r1 * r1 * r1 * r1 - r0 * r0 * r0 * r0) / 4.0;
}

}  // namespace

Potential::Potential(double core_radius, std::vector<double> r, std::vector<double> v)
    : core_(core_radius), r_(std::move(r)), v_(std::move(v))
{
    if (!(core_ >= 0.0) || !std::isfinite(core_))
        throw std::invalid_argument("core radius must be finite and nonnegative");
    if (r_.size() != v_.size())
        throw std::invalid_argument("potential nodes and values differ in length");
    for (std::size_t i = 0; i < r_.size(); ++i) {
        if (!std::isfinite(r_[i]) || !std::isfinite(v_[i]))
            throw std::invalid_argument("potential samples must be finite");
        if (v_[i] < 0.0) throw std::invalid_argument("potential tail must be nonnegative");
        if (r_[i] < core_) throw std::invalid_argument("tail node inside the hard core");
        if (i > 0 && r_[i] < r_[i - 1])
            throw std::invalid_argument("potential nodes must be nondecreasing");
    }
    range_ = r_.empty() ? core_ : std::max(core_, r_.back());
}

Potential Potential::zero() { return Potential(0.0, {}, {}); }

Potential Potential::hard_sphere(double radius)
{
    if (!(radius > 0.0)) throw std::invalid_argument("hard-sphere radius must be positive");
    return Potential(radius, {radius}, {0.0});
}

Potential Potential::square_well(double radius, double height)
{
    if (!(radius > 0.0)) throw std::invalid_argument("square-well radius must be positive");
    if (!(height >= 0.0)) throw std::invalid_argument("square-well height must be nonnegative");
    return Potential(0.0, {0.0, radius}, {height, height});
}

Potential Potential::parse(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("empty potential file");
    std::istringstream head(line);
    std::string key;
    double core = 0.0;
    if (!(head >> key >> core) || key != "core")
        throw std::invalid_argument("potential file must start with 'core <radius>'");
    std::vector<double> r, v;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream row(line);
        double x, y;
        if (!(row >> x >> y)) throw std::invalid_argument("malformed potential row: " + line);
        if (!r.empty() && x <= r.back())
            throw std::invalid_argument("potential radii must be strictly increasing");
        r.push_back(x);
        v.push_back(y);
    }
    return Potential(core, std::move(r), std::move(v));
}

Potential Potential::from_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open potential file " + path);
    return parse(in);
}

bool Potential::is_zero() const
{
    if (core_ > 0.0) return false;
    return std::all_of(v_.begin(), v_.end(), [](double x) { return x == 0.0; });
}

double Potential::operator()(double r) const
{
    if (r > range_ || r_.empty()) return 0.0;
    if (r <= r_.front()) return v_.front();
    auto it = std::upper_bound(r_.begin(), r_.end(), r);
    std::size_t i = static_cast<std::size_t>(it - r_.begin()) - 1;
    if (i + 1 >= r_.size()) return v_.back();
    return Segment{r_[i], r_[i + 1], v_[i], v_[i + 1]}.at(r);
}

double Potential::max_value() const
{
    if (v_.empty()) return 0.0;
    return *std::max_element(v_.begin(), v_.end());
}

double Potential::moment2() const
{
    double total = 0.0;
    for (const auto& s : segments(*this, core_, range_)) total += segment_moment(s.r0, s.r1, s.v0, s.v1);
    return total;
}

ScatteringSolution::ScatteringSolution(double a, double match_radius, double core,
                                       double range, std::vector<ProfileNode> nodes)
    : a_(a), match_(match_radius), core_(core), range_(range), nodes_(std::move(nodes))
{
}

double ScatteringSolution::u(double r) const
{
    if (r <= core_) return 0.0;
    if (r >= range_ || nodes_.size() < 2) return r - a_;
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), r,
                               [](double x, const ProfileNode& n) { return x < n.r; });
    if (it == nodes_.end()) return r - a_;
    return hermite(*(it - 1), *it, r, false);
}

double ScatteringSolution::du(double r) const
{
    if (r < core_) return 0.0;
    if (r >= range_ || nodes_.size() < 2) return 1.0;
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), r,
                               [](double x, const ProfileNode& n) { return x < n.r; });
    if (it == nodes_.end()) return 1.0;
    return hermite(*(it - 1), *it, r, true);
}

double ScatteringSolution::f0(double r) const
{
    if (r <= core_) return 0.0;
    if (r <= 0.0) return du(0.0);
    return u(r) / r;
}

ScatteringSolution solve_zero_energy(const Potential& pot, double match_radius, double tol)
{
    if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
    if (!(match_radius > pot.range()))
        throw std::domain_error("match radius must exceed the potential range");
    std::vector<ProfileNode> nodes;
    state4 y = integrate(pot, pot.range(), tol, &nodes);
    // free solution beyond the range is linear, so matching anywhere outside
    // gives the same a
    double um = y[0] + y[1] * (match_radius - pot.range());
    double dum = y[1];
    if (!(dum > 0.0)) throw std::runtime_error("zero-energy solution has no positive slope");
    double a = match_radius - um / dum;
    for (auto& n : nodes) {
        n.u /= dum;
        n.du /= dum;
    }
    return ScatteringSolution(a, match_radius, pot.core_radius(), pot.range(), std::move(nodes));
}

double scattering_length(const Potential& pot)
{
    double match = pot.range() > 0.0 ? 4.0 * pot.range() : 1.0;
    return solve_zero_energy(pot, match, 1e-10).a();
}

Potential scale_potential(const Potential& pot, double N, double L)
{
    if (!(N >= 1.0)) throw std::invalid_argument("N must be at least 1");
    if (!(L > 0.0)) throw std::invalid_argument("L must be positive");
    double s = L / N;
    std::vector<double> r = pot.nodes();
    std::vector<double> v = pot.values();
    for (auto& x : r) x *= s;
    for (auto& x : v) x /= s * s;
    return Potential(pot.core_radius() * s, std::move(r), std::move(v));
}

JastrowProfile::JastrowProfile(std::shared_ptr<const Potential> pot,
                               std::shared_ptr<const ScatteringSolution> sol, double b)
    : pot_(std::move(pot)), sol_(std::move(sol)), b_(b)
{
    if (!(b_ > sol_->a()) || !(b_ > pot_->core_radius()))
        throw std::domain_error("Jastrow cutoff b must exceed the scattering length");
    f0b_ = sol_->f0(b_);
    if (!(f0b_ > 0.0)) throw std::domain_error("f0(b) vanishes");
}

double JastrowProfile::operator()(double r) const
{
    if (r >= b_) return 1.0;
    return std::min(1.0, sol_->f0(r) / f0b_);
}

double JastrowProfile::derivative(double r) const
{
    if (r >= b_ || r < pot_->core_radius()) return 0.0;
    if (r <= 0.0) return 0.0;
    return (sol_->du(r) * r - sol_->u(r)) / (r * r * f0b_);
}

JastrowProfile jastrow_profile(const Potential& pot, double b)
{
    auto p = std::make_shared<const Potential>(pot);
    double match = pot.range() > 0.0 ? 4.0 * pot.range() : 1.0;
    auto sol = std::make_shared<const ScatteringSolution>(solve_zero_energy(pot, match, 1e-12));
    return JastrowProfile(p, sol, b);
}

JastrowIntegrals jastrow_integrals(const JastrowProfile& jp, double tol)
{
    const Potential& pot = jp.source();
    double b = jp.b();
    auto eval = [&](double t) {
        state4 y = integrate(pot, b, t, nullptr);
        double ub = y[0];
        if (!(ub > 0.0)) throw std::runtime_error("Jastrow normalisation vanished");
        double scale = b / ub;
        std::array<double, 3> out{
            4.0 * std::numbers::pi * (b * b * b / 3.0 - y[2] * scale * scale),
            4.0 * std::numbers::pi * y[3] * scale * scale,
            4.0 * std::numbers::pi * y[4] * scale,
        };
        return out;
    };
    auto coarse = eval(tol);
    auto fine = eval(tol * 1e-2);
    JastrowIntegrals res{};
    res.eta_int = fine[0];
    res.xi_int = fine[1];
    res.gradf_int = fine[2];
    res.eta_err = std::abs(fine[0] - coarse[0]);
    res.xi_err = std::abs(fine[1] - coarse[1]);
    res.gradf_err = std::abs(fine[2] - coarse[2]);
    double a = jp.a();
    res.gradf_ratio = a > 0.0 ? res.gradf_int / (a * b) : 0.0;
    return res;
}

namespace {

double capped_moment(const Potential& pot, double h)
{
    double c = pot.core_radius();
    double total = h * c * c * c / 3.0;
    for (const auto& s : segments(pot, c, pot.range())) {
        if (s.v0 <= h && s.v1 <= h) {
            total += segment_moment(s.r0, s.r1, s.v0, s.v1);
        } else if (s.v0 >= h && s.v1 >= h) {
            total += segment_moment(s.r0, s.r1, h, h);
        } else {
            double rc = s.r0 + (h - s.v0) / (s.v1 - s.v0) * (s.r1 - s.r0);
            if (s.v0 < h) {
                total += segment_moment(s.r0, rc, s.v0, h) + segment_moment(rc, s.r1, h, h);
            } else {
                total += segment_moment(s.r0, rc, h, h) + segment_moment(rc, s.r1, h, s.v1);
            }
        }
    }
    return total;
}

Potential capped(const Potential& pot, double h)
{
    std::vector<double> r, v;
    double c = pot.core_radius();
    if (c > 0.0) {
        r = {0.0, c};
        v = {h, h};
    }
    for (const auto& s : segments(pot, c, pot.range())) {
        double a0 = std::min(s.v0, h), a1 = std::min(s.v1, h);
        if (r.empty() || r.back() != s.r0 || v.back() != a0) {
            r.push_back(s.r0);
            v.push_back(a0);
        }
        if ((s.v0 - h) * (s.v1 - h) < 0.0) {
            double rc = s.r0 + (h - s.v0) / (s.v1 - s.v0) * (s.r1 - s.r0);
            r.push_back(rc);
            v.push_back(h);
        }
        r.push_back(s.r1);
        v.push_back(a1);
    }
    return Potential(0.0, std::move(r), std::move(v));
}

}  // namespace

CappedPotential cap_to_integrable(const Potential& pot, double phi, double eps)
{
    if (!(phi > 0.0)) throw std::invalid_argument("phi must be positive");
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("eps must lie in (0,1)");
    double a = scattering_length(pot);
    double bound = a * (1.0 - std::sqrt(a / phi)) * (1.0 - eps);
    double target = 2.0 * phi;
    if (!pot.has_core() && pot.moment2() <= target) {
        return {pot, pot.max_value(), pot.moment2(), a, bound, true};
    }
    double lo = 0.0;
    double hi = pot.max_value();
    if (pot.has_core()) {
        double c = pot.core_radius();
        hi = std::max(hi, 3.0 * target / (c * c * c));
    }
    for (int it = 0; it < 2000 && hi - lo > 1e-15 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        if (capped_moment(pot, mid) <= target) lo = mid;
        else hi = mid;
    }
    Potential out = capped(pot, lo);
    return {out, lo, capped_moment(pot, lo), scattering_length(out), bound, false};
}

}  // namespace bec
