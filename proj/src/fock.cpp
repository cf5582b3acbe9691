#include "bec/fock.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/binomial.hpp>
#include <boost/math/special_functions/laguerre.hpp>

#include "bec/entropy.hpp"
#include "bec/parallel.hpp"

namespace bec {

namespace {

constexpr double pi = std::numbers::pi;

IntMomentum operator-(const IntMomentum& a, const IntMomentum& b)
{
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

int norm2(const IntMomentum& n)
{
    return n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
}

bool is_zero(const IntMomentum& n)
{
    return n[0] == 0 && n[1] == 0 && n[2] == 0;
}

// applies a_{ann...} then a*_{cre...} to occ in place; returns the amplitude,
// zero when an annihilator hits an empty mode
double apply_monomial(std::vector<int>& occ, const std::vector<int>& cre, const std::vector<int>& ann)
{
    // integer product under a single square root keeps diagonal terms exact
    double prod = 1.0;
    for (auto it = ann.rbegin(); it != ann.rend(); ++it) {
        int& n = occ[*it];
        if (n == 0) return 0.0;
        prod *= n;
        --n;
    }
    for (auto it = cre.rbegin(); it != cre.rend(); ++it) {
        int& n = occ[*it];
        ++n;
        prod *= n;
    }
    return std::sqrt(prod);
}

double default_dispersion(const IntMomentum& n, double L)
{
    double u = 2.0 * pi / L;
    return u * u * norm2(n);
}

Eigen::MatrixXcd to_complex(const SparseOp& A)
{
    return Eigen::MatrixXd(A).cast<cplx>();
}

double entropy_of(const Eigen::VectorXd& ev)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] > 0.0) s -= ev[i] * std::log(ev[i]);
    return s;
}

void check_dense(std::size_t dim)
{
    if (dim > max_dense_dim)
        throw std::length_error("dense eigendecomposition refused above dimension 4096");
}

}  // namespace

std::size_t capped_dimension(int n, std::size_t m)
{
    if (n < 0) return 0;
    return static_cast<std::size_t>(
        std::llround(boost::math::binomial_coefficient<double>(static_cast<unsigned>(n + m), static_cast<unsigned>(m))));
}

TruncatedFock::TruncatedFock(std::vector<IntMomentum> modes, std::size_t low_count, int n_max, int n_min)
    : TruncatedFock(std::move(modes), low_count, n_min, n_max, n_max, n_max)
{
}

TruncatedFock::TruncatedFock(std::vector<IntMomentum> modes, std::size_t low_count, int n_min, int n_max,
                             int low_cap, int high_cap)
    : modes_(std::move(modes)), low_(low_count), n_min_(n_min), n_max_(n_max), low_cap_(low_cap),
      high_cap_(high_cap)
{
    if (low_ > modes_.size()) throw std::domain_error("TruncatedFock: low_count exceeds mode count");
    if (n_max_ < 0 || n_min_ < 0 || n_min_ > n_max_ || low_cap_ < 0 || high_cap_ < 0)
        throw std::domain_error("TruncatedFock: bad occupation caps");
    for (std::size_t i = 0; i < modes_.size(); ++i)
        for (std::size_t j = i + 1; j < modes_.size(); ++j)
            if (modes_[i] == modes_[j]) throw std::domain_error("TruncatedFock: duplicate mode");
    enumerate();
}

TruncatedFock TruncatedFock::product(std::vector<IntMomentum> modes, std::size_t low_count, int low_cap,
                                     int high_cap)
{
    return TruncatedFock(std::move(modes), low_count, 0, low_cap + high_cap, low_cap, high_cap);
}

void TruncatedFock::enumerate()
{
    std::size_t m = modes_.size();
    std::vector<int> occ(m, 0);
    auto rec = [&](auto&& self, std::size_t i, int low_sum, int high_sum) -> void {
        if (i == m) {
            int total = low_sum + high_sum;
            if (total >= n_min_) {
                lookup_.emplace(occ, basis_.size());
                basis_.push_back(occ);
            }
            return;
        }
        bool low = i < low_;
        int room = std::min(n_max_ - low_sum - high_sum, low ? low_cap_ - low_sum : high_cap_ - high_sum);
        for (int k = 0; k <= room; ++k) {
            occ[i] = k;
            self(self, i + 1, low_sum + (low ? k : 0), high_sum + (low ? 0 : k));
        }
        occ[i] = 0;
    };
    rec(rec, 0, 0, 0);
}

std::ptrdiff_t TruncatedFock::find_mode(const IntMomentum& n) const
{
    for (std::size_t i = 0; i < modes_.size(); ++i)
        if (modes_[i] == n) return static_cast<std::ptrdiff_t>(i);
    return -1;
}

std::ptrdiff_t TruncatedFock::index(const std::vector<int>& occ) const
{
    auto it = lookup_.find(occ);
    return it == lookup_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

int TruncatedFock::total(std::size_t i) const
{
    int s = 0;
    for (int n : basis_[i]) s += n;
    return s;
}

TruncatedFock TruncatedFock::low_factor() const
{
    std::vector<IntMomentum> m(modes_.begin(), modes_.begin() + static_cast<std::ptrdiff_t>(low_));
    int cap = std::min(low_cap_, n_max_);
    return TruncatedFock(std::move(m), low_, 0, cap, cap, 0);
}

TruncatedFock TruncatedFock::high_factor() const
{
    std::vector<IntMomentum> m(modes_.begin() + static_cast<std::ptrdiff_t>(low_), modes_.end());
    int cap = std::min(high_cap_, n_max_);
    return TruncatedFock(std::move(m), 0, 0, cap, 0, cap);
}

std::vector<std::pair<std::size_t, std::size_t>> TruncatedFock::split_indices() const
{
    auto lo = low_factor();
    auto hi = high_factor();
    std::vector<std::pair<std::size_t, std::size_t>> out(basis_.size());
    for (std::size_t i = 0; i < basis_.size(); ++i) {
        const auto& s = basis_[i];
        std::vector<int> a(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(low_));
        std::vector<int> b(s.begin() + static_cast<std::ptrdiff_t>(low_), s.end());
        out[i] = {static_cast<std::size_t>(lo.index(a)), static_cast<std::size_t>(hi.index(b))};
    }
    return out;
}

SparseOp assemble(const TruncatedFock& space, const std::vector<NormalTerm>& terms)
{
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<int> occ;
    for (std::size_t i = 0; i < space.dim(); ++i) {
        for (const auto& t : terms) {
            occ = space.state(i);
            double amp = apply_monomial(occ, t.create, t.annihilate);
            if (amp == 0.0) continue;
            auto j = space.index(occ);
            if (j < 0) continue;
            trip.emplace_back(static_cast<int>(j), static_cast<int>(i), t.coef * amp);
        }
    }
    SparseOp A(static_cast<Eigen::Index>(space.dim()), static_cast<Eigen::Index>(space.dim()));
    A.setFromTriplets(trip.begin(), trip.end());
    A.prune(0.0);
    return A;
}

FockOperator number_operator(const TruncatedFock& space)
{
    FockOperator op;
    op.label = "N";
    for (std::size_t m = 0; m < space.modes(); ++m)
        op.terms.push_back({1.0, {static_cast<int>(m)}, {static_cast<int>(m)}});
    op.matrix = assemble(space, op.terms);
    return op;
}

FockOperator mode_number(const TruncatedFock& space, std::size_t mode)
{
    FockOperator op;
    op.label = "n";
    op.terms.push_back({1.0, {static_cast<int>(mode)}, {static_cast<int>(mode)}});
    op.matrix = assemble(space, op.terms);
    return op;
}

Operators build_operators(const TruncatedFock& space, const HamiltonianParams& params)
{
    if (!(params.L > 0.0)) throw std::domain_error("build_operators: L must be positive");
    auto disp = params.dispersion ? params.dispersion
                                  : std::function<double(const IntMomentum&)>(
                                        [L = params.L](const IntMomentum& n) { return default_dispersion(n, L); });
    Operators out;
    out.T.label = "T";
    for (std::size_t m = 0; m < space.modes(); ++m) {
        const auto& n = space.momentum(m);
        double e = disp(n) - params.mu + (is_zero(n) ? params.lambda : 0.0);
        if (e != 0.0) out.T.terms.push_back({e, {static_cast<int>(m)}, {static_cast<int>(m)}});
    }
    out.T.matrix = assemble(space, out.T.terms);

    out.V.label = "V";
    if (params.vhat) {
        double volume = params.L * params.L * params.L;
        double v0 = params.vhat({0, 0, 0});
        std::map<IntMomentum, bool> warned;
        auto M = static_cast<int>(space.modes());
        for (int k = 0; k < M; ++k) {
            for (int l = 0; l < M; ++l) {
                for (int m1 = 0; m1 < M; ++m1) {
                    IntMomentum p = space.momentum(m1) - space.momentum(k);
                    auto m2 = space.find_mode(space.momentum(l) - p);
                    if (m2 < 0) continue;
                    double v = params.vhat(p);
                    if (std::abs(v) > v0 && !warned[p]) {
                        warned[p] = true;
                        out.warnings.push_back("|vhat(p)| exceeds vhat(0) at p = (" + std::to_string(p[0]) + "," +
                                               std::to_string(p[1]) + "," + std::to_string(p[2]) + ")");
                    }
                    if (v == 0.0) continue;
                    out.V.terms.push_back({v / (2.0 * volume), {m1, static_cast<int>(m2)}, {k, l}});
                }
            }
        }
    }
    out.V.matrix = assemble(space, out.V.terms);

    out.H.label = "H";
    out.H.terms = out.T.terms;
    out.H.terms.insert(out.H.terms.end(), out.V.terms.begin(), out.V.terms.end());
    out.H.matrix = out.T.matrix + out.V.matrix;
    out.Nop = number_operator(space);
    return out;
}

bool is_hermitian(const SparseOp& A, double tol)
{
    SparseOp At = A.transpose();
    SparseOp d = A - At;
    for (int k = 0; k < d.outerSize(); ++k)
        for (SparseOp::InnerIterator it(d, k); it; ++it)
            if (std::abs(it.value()) > tol) return false;
    return true;
}

double commutator_norm(const SparseOp& A, const SparseOp& B)
{
    SparseOp C = SparseOp(A * B) - SparseOp(B * A);
    double m = 0.0;
    for (int k = 0; k < C.outerSize(); ++k)
        for (SparseOp::InnerIterator it(C, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

GibbsState gibbs_state(const SparseOp& H, double beta)
{
    if (!(beta > 0.0)) throw std::domain_error("gibbs_state: beta must be positive");
    check_dense(static_cast<std::size_t>(H.rows()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(H)};
    const auto& E = es.eigenvalues();
    double e0 = E.minCoeff();
    Eigen::VectorXd w = (-beta * (E.array() - e0)).exp();
    double z = w.sum();
    Eigen::VectorXd p = w / z;
    GibbsState g;
    g.rho = es.eigenvectors() * p.asDiagonal() * es.eigenvectors().transpose();
    g.free_energy = e0 - std::log(z) / beta;
    g.entropy = entropy_of(p);
    g.energy = p.dot(E);
    return g;
}

double free_energy_functional(const SparseOp& H, const Eigen::MatrixXd& gamma, double beta)
{
    if (H.rows() != gamma.rows() || gamma.rows() != gamma.cols())
        throw std::domain_error("free_energy_functional: dimension mismatch");
    check_dense(static_cast<std::size_t>(gamma.rows()));
    double energy = (H * gamma).trace();
    return energy - von_neumann_entropy(gamma) / beta;
}

cplx coherent_amplitude(int n, cplx z)
{
    double r = std::abs(z);
    if (r == 0.0) return n == 0 ? 1.0 : 0.0;
    double logmag = -0.5 * r * r + n * std::log(r) - 0.5 * std::lgamma(n + 1.0);
    return std::polar(std::exp(logmag), n * std::arg(z));
}

CoherentState coherent_state(const TruncatedFock& space, const std::vector<cplx>& z, double max_deficit)
{
    if (z.size() != space.low_count()) throw std::domain_error("coherent_state: z has the wrong length");
    auto lo = space.low_factor();
    CoherentState cs;
    cs.vec.resize(static_cast<Eigen::Index>(lo.dim()));
    for (std::size_t i = 0; i < lo.dim(); ++i) {
        cplx a = 1.0;
        for (std::size_t p = 0; p < z.size(); ++p) a *= coherent_amplitude(lo.state(i)[p], z[p]);
        cs.vec[static_cast<Eigen::Index>(i)] = a;
    }
    cs.norm_deficit = 1.0 - cs.vec.squaredNorm();
    if (cs.norm_deficit > max_deficit)
        throw std::runtime_error("coherent_state: truncation loses " + std::to_string(cs.norm_deficit) +
                                 " of the norm");
    return cs;
}

std::pair<std::vector<double>, std::vector<double>> gauss_laguerre(int n)
{
    if (n < 1) throw std::domain_error("gauss_laguerre: order must be positive");
    // Golub-Welsch for the nodes, Newton polish on L_n, weights from L_{n+1}
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        J(i, i) = 2.0 * i + 1.0;
        if (i + 1 < n) J(i, i + 1) = J(i + 1, i) = i + 1.0;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J, Eigen::EigenvaluesOnly);
    std::vector<double> x(n), w(n);
    auto un = static_cast<unsigned>(n);
    for (int i = 0; i < n; ++i) {
        double t = es.eigenvalues()[i];
        for (int it = 0; it < 3; ++it) {
            double Ln = boost::math::laguerre(un, t);
            double Lm = boost::math::laguerre(un - 1, t);
            // t L_n'(t) = n (L_n - L_{n-1})
            double d = n * (Ln - Lm) / t;
            t -= Ln / d;
        }
        x[i] = t;
        double L1 = boost::math::laguerre(un + 1, t);
        w[i] = t / ((n + 1.0) * (n + 1.0) * L1 * L1);
    }
    return {x, w};
}

PlaneQuadrature plane_quadrature(int radial, int angular)
{
    if (angular < 1) throw std::domain_error("plane_quadrature: angular order must be positive");
    auto [t, w] = gauss_laguerre(radial);
    PlaneQuadrature q;
    for (std::size_t i = 0; i < t.size(); ++i) {
        double r = std::sqrt(t[i]);
        // dx dy / pi = dt dtheta / (2 pi)
        double wr = w[i] * std::exp(t[i]) / angular;
        for (int j = 0; j < angular; ++j) {
            q.nodes.push_back(std::polar(r, 2.0 * pi * (j + 0.5) / angular));
            q.weights.push_back(wr);
        }
    }
    return q;
}

namespace {

struct SplitTerm {
    double coef;
    std::vector<int> alpha;  // low creators per low mode (zbar powers)
    std::vector<int> beta;   // low annihilators per low mode (z powers)
    NormalTerm high;
};

SplitTerm split_term(const NormalTerm& t, std::size_t low)
{
    SplitTerm s{t.coef, std::vector<int>(low, 0), std::vector<int>(low, 0), {1.0, {}, {}}};
    for (int m : t.create) {
        if (m < static_cast<int>(low))
            ++s.alpha[m];
        else
            s.high.create.push_back(m - static_cast<int>(low));
    }
    for (int m : t.annihilate) {
        if (m < static_cast<int>(low))
            ++s.beta[m];
        else
            s.high.annihilate.push_back(m - static_cast<int>(low));
    }
    return s;
}

// zbar^a z^b with the contraction k removed, times the exp(-D) coefficient
cplx upper_monomial(const std::vector<int>& a, const std::vector<int>& b, const std::vector<cplx>& z)
{
    cplx total = 1.0;
    for (std::size_t p = 0; p < z.size(); ++p) {
        cplx sum = 0.0;
        for (int k = 0; k <= std::min(a[p], b[p]); ++k) {
            double c = boost::math::binomial_coefficient<double>(a[p], k) *
                       boost::math::binomial_coefficient<double>(b[p], k) * std::tgamma(k + 1.0);
            if (k % 2 == 1) c = -c;
            sum += c * std::pow(std::conj(z[p]), a[p] - k) * std::pow(z[p], b[p] - k);
        }
        total *= sum;
    }
    return total;
}

cplx lower_monomial(const std::vector<int>& a, const std::vector<int>& b, const std::vector<cplx>& z)
{
    cplx total = 1.0;
    for (std::size_t p = 0; p < z.size(); ++p)
        total *= std::pow(std::conj(z[p]), a[p]) * std::pow(z[p], b[p]);
    return total;
}

}  // namespace

Symbols symbols(const TruncatedFock& space, const FockOperator& op, const std::vector<cplx>& z)
{
    if (z.size() != space.low_count()) throw std::domain_error("symbols: z has the wrong length");
    if (op.terms.empty() && op.matrix.nonZeros() > 0)
        throw std::domain_error("symbols: operator has no normal-ordered polynomial form");
    auto hi = space.high_factor();
    auto d = static_cast<Eigen::Index>(hi.dim());
    Symbols s{Eigen::MatrixXcd::Zero(d, d), Eigen::MatrixXcd::Zero(d, d)};
    std::map<std::pair<std::vector<int>, std::vector<int>>, SparseOp> cache;
    for (const auto& t : op.terms) {
        auto st = split_term(t, space.low_count());
        auto key = std::make_pair(st.high.create, st.high.annihilate);
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, assemble(hi, {st.high})).first;
        Eigen::MatrixXcd O = to_complex(it->second);
        s.lower += st.coef * lower_monomial(st.alpha, st.beta, z) * O;
        s.upper += st.coef * upper_monomial(st.alpha, st.beta, z) * O;
    }
    return s;
}

DeltaH delta_h_formula(const TruncatedFock& space, const HamiltonianParams& params, const std::vector<cplx>& z)
{
    if (z.size() != space.low_count()) throw std::domain_error("delta_h_formula: z has the wrong length");
    auto hi = space.high_factor();
    auto d = static_cast<Eigen::Index>(hi.dim());
    auto disp = params.dispersion ? params.dispersion
                                  : std::function<double(const IntMomentum&)>(
                                        [L = params.L](const IntMomentum& n) { return default_dispersion(n, L); });
    Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(d, d);
    std::size_t M = space.low_count();
    double volume = params.L * params.L * params.L;

    DeltaH out;
    double kin = 0.0;
    for (std::size_t p = 0; p < M; ++p) {
        const auto& n = space.momentum(p);
        kin += disp(n) - params.mu + (is_zero(n) ? params.lambda : 0.0);
    }
    out.kinetic = kin * I;

    double z2 = 0.0;
    for (const auto& zp : z) z2 += std::norm(zp);
    Eigen::MatrixXcd Nhigh = to_complex(number_operator(hi).matrix);
    Eigen::MatrixXcd Ns = z2 * I + Nhigh;

    out.direct = Eigen::MatrixXcd::Zero(d, d);
    out.mixed = Eigen::MatrixXcd::Zero(d, d);
    out.low = Eigen::MatrixXcd::Zero(d, d);
    if (params.vhat) {
        double v0 = params.vhat({0, 0, 0});
        double Md = static_cast<double>(M);
        out.direct = v0 * (2.0 * Md * Ns - Md * Md * I) / (2.0 * volume);
        for (std::size_t l = 0; l < M; ++l) {
            for (std::size_t k = M; k < space.modes(); ++k) {
                double v = params.vhat(space.momentum(l) - space.momentum(k));
                out.mixed += 2.0 * v * to_complex(mode_number(hi, k - M).matrix) / (2.0 * volume);
            }
        }
        double lowsum = 0.0;
        for (std::size_t l = 0; l < M; ++l)
            for (std::size_t k = 0; k < M; ++k)
                lowsum += params.vhat(space.momentum(l) - space.momentum(k)) * (2.0 * std::norm(z[k]) - 1.0);
        out.low = lowsum / (2.0 * volume) * I;
    }
    out.total = out.kinetic + out.direct + out.mixed + out.low;
    return out;
}

Z1Check z1_bound_check(const TruncatedFock& space, const std::vector<cplx>& z, const Z1Params& params)
{
    const auto& hp = params.h;
    double u = 2.0 * pi / hp.L;
    for (std::size_t m = 0; m < space.modes(); ++m) {
        double p = u * std::sqrt(static_cast<double>(norm2(space.momentum(m))));
        bool low = m < space.low_count();
        if (low != (p < params.p_c)) throw std::domain_error("z1_bound_check: low modes must be those with |p| < p_c");
    }
    double volume = hp.L * hp.L * hp.L;
    double vmax = 8.0 * pi * params.phi * hp.L / params.N;
    if (hp.vhat) {
        double v0 = hp.vhat({0, 0, 0});
        for (std::size_t a = 0; a < space.modes(); ++a)
            for (std::size_t b = 0; b < space.modes(); ++b) {
                double v = std::abs(hp.vhat(space.momentum(a) - space.momentum(b)));
                if (v > vmax * (1.0 + 1e-12) || v > v0 * (1.0 + 1e-12))
                    throw std::domain_error("z1_bound_check: |vhat| must be bounded by vhat(0) and 8 pi phi L / N");
            }
    }
    auto ops = build_operators(space, hp);
    auto s = symbols(space, ops.H, z);
    Eigen::MatrixXcd dH = s.lower - s.upper;

    auto hi = space.high_factor();
    auto d = static_cast<Eigen::Index>(hi.dim());
    double z2 = 0.0;
    for (const auto& zp : z) z2 += std::norm(zp);
    Eigen::MatrixXcd Ns = z2 * Eigen::MatrixXcd::Identity(d, d) + to_complex(number_operator(hi).matrix);
    double M = static_cast<double>(space.low_count());
    Eigen::MatrixXcd bound = (M * (params.p_c * params.p_c - hp.mu) + hp.lambda) * Eigen::MatrixXcd::Identity(d, d) +
                             16.0 * pi * params.phi * hp.L / (volume * params.N) * M * Ns;

    auto top = [](const Eigen::MatrixXcd& A) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A, Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    };
    Z1Check c;
    c.delta_h_max = top(dH).maxCoeff();
    c.bound_min = top(bound).minCoeff();
    c.gap = top(dH - bound).maxCoeff();
    c.holds = c.gap <= 1e-10;
    return c;
}

HusimiDecomposition husimi_decompose(const TruncatedFock& space, const Eigen::MatrixXcd& gamma,
                                     const PlaneQuadrature& quad, double mass_tol)
{
    if (space.low_count() != 1) throw std::domain_error("husimi_decompose: exactly one low mode supported");
    if (gamma.rows() != static_cast<Eigen::Index>(space.dim()) || gamma.cols() != gamma.rows())
        throw std::domain_error("husimi_decompose: state dimension mismatch");
    auto hi = space.high_factor();
    auto lo = space.low_factor();
    auto dh = static_cast<Eigen::Index>(hi.dim());
    std::size_t nl = lo.dim();
    check_dense(hi.dim());

    // blocks[l][l'] = <l| Gamma |l'> on the high factor
    auto idx = space.split_indices();
    std::vector<std::vector<Eigen::MatrixXcd>> blocks(nl, std::vector<Eigen::MatrixXcd>(nl, Eigen::MatrixXcd::Zero(dh, dh)));
    for (std::size_t i = 0; i < space.dim(); ++i)
        for (std::size_t j = 0; j < space.dim(); ++j) {
            cplx g = gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (g == 0.0) continue;
            blocks[idx[i].first][idx[j].first](static_cast<Eigen::Index>(idx[i].second),
                                               static_cast<Eigen::Index>(idx[j].second)) = g;
        }
    std::vector<int> occ(nl);
    for (std::size_t l = 0; l < nl; ++l) occ[l] = lo.state(l)[0];

    struct Node {
        double zeta;
        Eigen::MatrixXcd cond;
        double S;
    };
    auto nodes = parallel_map<Node>(quad.nodes.size(), [&](std::size_t q) {
        cplx z = quad.nodes[q];
        std::vector<cplx> c(nl);
        for (std::size_t l = 0; l < nl; ++l) c[l] = coherent_amplitude(occ[l], z);
        Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(dh, dh);
        for (std::size_t l = 0; l < nl; ++l)
            for (std::size_t m = 0; m < nl; ++m) g += std::conj(c[l]) * c[m] * blocks[l][m];
        Node n{g.trace().real(), Eigen::MatrixXcd(), 0.0};
        if (n.zeta > 0.0) {
            n.cond = g / n.zeta;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(n.cond, Eigen::EigenvaluesOnly);
            n.S = entropy_of(es.eigenvalues());
        }
        return n;
    });

    HusimiDecomposition out{{}, 0.0, 0.0, 0.0};
    for (std::size_t q = 0; q < nodes.size(); ++q) {
        auto& n = nodes[q];
        double w = quad.weights[q];
        if (n.zeta > 0.0) {
            out.mass += w * n.zeta;
            out.classical_entropy -= w * n.zeta * std::log(n.zeta);
            out.conditional_entropy += w * n.zeta * n.S;
        }
        out.slices.push_back({quad.nodes[q], w, std::max(n.zeta, 0.0), std::move(n.cond)});
    }
    if (std::abs(out.mass - 1.0) > mass_tol)
        throw std::runtime_error("husimi_decompose: quadrature mass " + std::to_string(out.mass) + " deviates from 1");
    return out;
}

ReducedDensities reduced_densities(const TruncatedFock& space, const Eigen::MatrixXd& gamma, double L,
                                   int grid_points)
{
    auto dim = space.dim();
    if (gamma.rows() != static_cast<Eigen::Index>(dim) || gamma.cols() != gamma.rows())
        throw std::domain_error("reduced_densities: state dimension mismatch");
    if (grid_points < 1) throw std::domain_error("reduced_densities: grid_points must be positive");

    // fixed-N support
    int sector = -1;
    double scale = gamma.cwiseAbs().maxCoeff();
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            if (std::abs(gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) <= 1e-14 * scale) continue;
            int ni = space.total(i), nj = space.total(j);
            if (ni != nj || (sector >= 0 && ni != sector))
                throw std::domain_error("reduced_densities: state is not supported on a single particle-number sector");
            sector = ni;
        }

    auto m = static_cast<int>(space.modes());
    ReducedDensities out;
    out.N = sector;
    out.one_pdm = Eigen::MatrixXcd::Zero(m, m);
    auto expect = [&](const std::vector<int>& cre, const std::vector<int>& ann) {
        double s = 0.0;
        std::vector<int> occ;
        for (std::size_t j = 0; j < dim; ++j) {
            occ = space.state(j);
            double amp = apply_monomial(occ, cre, ann);
            if (amp == 0.0) continue;
            auto i = space.index(occ);
            if (i < 0) continue;
            s += amp * gamma(static_cast<Eigen::Index>(j), i);
        }
        return s;
    };
    for (int p = 0; p < m; ++p)
        for (int q = 0; q < m; ++q) out.one_pdm(p, q) = expect({q}, {p});

    double nn = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        double t = space.total(i);
        nn += gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) * t * t;
    }
    out.fixed_N_identity = std::abs(nn - out.N * out.N);
    auto zero = space.find_mode({0, 0, 0});
    out.n0 = zero >= 0 ? out.one_pdm(zero, zero).real() : 0.0;

    // sample positions and plane-wave phases e^{i p x}
    std::vector<std::vector<cplx>> phase;
    for (int a = 0; a < grid_points; ++a)
        for (int b = 0; b < grid_points; ++b)
            for (int c = 0; c < grid_points; ++c) {
                std::vector<cplx> ph(m);
                for (int p = 0; p < m; ++p) {
                    const auto& n = space.momentum(p);
                    double arg = 2.0 * pi * (n[0] * a + n[1] * b + n[2] * c) / grid_points;
                    ph[p] = std::polar(1.0, arg);
                }
                phase.push_back(ph);
            }
    std::size_t G = phase.size();
    double volume = L * L * L;

    // <a*_{p1} a*_{p2} a_{p3} a_{p4}> and the cubic analogue, row-major
    std::vector<double> g2(static_cast<std::size_t>(m * m * m * m));
    for (int i = 0; i < m * m * m * m; ++i) {
        int p1 = i / (m * m * m), p2 = (i / (m * m)) % m, p3 = (i / m) % m, p4 = i % m;
        g2[i] = expect({p1, p2}, {p3, p4});
    }
    out.rho2_max = 0.0;
    for (std::size_t x = 0; x < G; ++x)
        for (std::size_t y = x; y < G; ++y) {
            cplx s = 0.0;
            // psi*(x) psi*(y) psi(y) psi(x)
            for (int i = 0; i < m * m * m * m; ++i) {
                if (g2[i] == 0.0) continue;
                int p1 = i / (m * m * m), p2 = (i / (m * m)) % m, p3 = (i / m) % m, p4 = i % m;
                s += g2[i] * std::conj(phase[x][p1] * phase[y][p2]) * phase[y][p3] * phase[x][p4];
            }
            out.rho2_max = std::max(out.rho2_max, s.real() / (2.0 * volume * volume));
        }

    std::size_t m6 = static_cast<std::size_t>(m) * m * m * m * m * m;
    std::vector<double> g3(m6);
    for (std::size_t i = 0; i < m6; ++i) {
        std::size_t r = i;
        int p[6];
        for (int k = 5; k >= 0; --k) {
            p[k] = static_cast<int>(r % m);
            r /= m;
        }
        g3[i] = expect({p[0], p[1], p[2]}, {p[3], p[4], p[5]});
    }
    out.rho3_max = 0.0;
    for (std::size_t x = 0; x < G; ++x)
        for (std::size_t y = x; y < G; ++y)
            for (std::size_t w = y; w < G; ++w) {
                cplx s = 0.0;
                // psi*(x) psi*(y) psi*(w) psi(w) psi(y) psi(x)
                for (std::size_t i = 0; i < m6; ++i) {
                    if (g3[i] == 0.0) continue;
                    std::size_t r = i;
                    int p[6];
                    for (int k = 5; k >= 0; --k) {
                        p[k] = static_cast<int>(r % m);
                        r /= m;
                    }
                    s += g3[i] * std::conj(phase[x][p[0]] * phase[y][p[1]] * phase[w][p[2]]) * phase[w][p[3]] *
                         phase[y][p[4]] * phase[x][p[5]];
                }
                out.rho3_max = std::max(out.rho3_max, s.real() / (6.0 * volume * volume * volume));
            }
    return out;
}

JastrowNorm jastrow_norm_check_n2(const Potential& pot, double b, double L, int order)
{
    if (!(L > 0.0)) throw std::domain_error("jastrow_norm_check_n2: L must be positive");
    double volume = L * L * L;
    double a = pot.is_zero() ? 0.0 : scattering_length(pot);
    JastrowNorm out;
    out.lower_bound = 1.0 - (4.0 * pi / 3.0) * volume * (2.0 / volume) * (2.0 / volume) * a * b * b;
    if (pot.is_zero()) {
        out.norm_sq = 1.0;
        return out;
    }
    auto f = jastrow_profile(pot, b);
    // breakpoints: core, potential nodes, b
    std::vector<double> br{0.0};
    if (pot.core_radius() > 0.0 && pot.core_radius() < b) br.push_back(pot.core_radius());
    for (double r : pot.nodes())
        if (r > br.back() && r < b) br.push_back(r);
    if (b > br.back()) br.push_back(b);
    // G(rho) = int_0^rho (1 - f^2) r^2 dr
    auto G = [&](double rho) {
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < br.size() && br[i] < rho; ++i) {
            double hi = std::min(br[i + 1], rho);
            s += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                [&](double r) {
                    double v = f(r);
                    return (1.0 - v * v) * r * r;
                },
                br[i], hi, 15, 1e-13);
        }
        return s;
    };
    double half = 0.5 * L;
    if (b <= half) {
        out.norm_sq = 1.0 - 4.0 * pi * G(b) / volume;
        return out;
    }
    // octant of the cube [-L/2, L/2]^3 in spherical coordinates; the radial
    // reach in direction u is min(b, L / (2 max|u_i|))
    double inner = G(half);
    auto [ct, wt] = [&] {
        std::vector<double> x(order), w(order);
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
        for (int i = 0; i + 1 < order; ++i) J(i, i + 1) = J(i + 1, i) = (i + 1.0) / std::sqrt(4.0 * (i + 1.0) * (i + 1.0) - 1.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
        for (int i = 0; i < order; ++i) {
            x[i] = es.eigenvalues()[i];
            double v = es.eigenvectors()(0, i);
            w[i] = 2.0 * v * v;
        }
        return std::make_pair(x, w);
    }();
    double total = 0.0;
    for (int i = 0; i < order; ++i) {
        double c = 0.5 * (ct[i] + 1.0);  // cos(theta) in [0, 1]
        double s = std::sqrt(1.0 - c * c);
        for (int j = 0; j < order; ++j) {
            double ph = 0.25 * pi * (ct[j] + 1.0);  // phi in [0, pi/2]
            double ux = s * std::cos(ph), uy = s * std::sin(ph);
            double reach = std::min(b, half / std::max({ux, uy, c}));
            double g = inner;
            if (reach > half) {
                g += boost::math::quadrature::gauss<double, 30>::integrate(
                    [&](double r) {
                        double v = f(r);
                        return (1.0 - v * v) * r * r;
                    },
                    half, reach);
            }
            total += 0.5 * wt[i] * 0.25 * pi * wt[j] * g;
        }
    }
    out.norm_sq = 1.0 - 8.0 * total / volume;
    return out;
}

}  // namespace bec
