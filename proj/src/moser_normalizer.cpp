#include "maform/moser_normalizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "maform/parallel.hpp"
#include "maform/random.hpp"

namespace maform {

namespace {

template <class S>
S potential_fn(const MinkowskiFunction& mu, int chart, const S& x, const S& y) {
    Cx<S> v(x, y);
    return log(mu.chart_m2(chart, &v)) - log(1.0 + x * x + y * y);
}

std::array<Cx<double>, 2> unit_section(int chart, cplx v) {
    double s = std::sqrt(1.0 + std::norm(v));
    std::array<Cx<double>, 2> z;
    z[chart] = Cx<double>(1.0 / s, 0.0);
    z[1 - chart] = Cx<double>(v.real() / s, v.imag() / s);
    return z;
}

template <int K>
std::array<Cx<J1<K>>, 2> unit_section(int chart, const Cx<J1<K>>& v) {
    J1<K> s = sqrt(1.0 + abs2(v));
    std::array<Cx<J1<K>>, 2> z;
    z[chart] = Cx<J1<K>>(J1<K>(1.0) / s, J1<K>(0.0));
    z[1 - chart] = Cx<J1<K>>(v.re / s, v.im / s);
    return z;
}

Cx<J1<2>> seeded(cplx v) {
    auto p = seed_point<J1<2>>(std::array<double, 2>{v.real(), v.imag()});
    return {p[0], p[1]};
}

// Complex gradient d mu^2 / dz_j at an ambient point.
std::array<cplx, 2> mu2_gradient(const MinkowskiFunction& mu, const std::array<cplx, 2>& w) {
    auto p = seed_point<J1<4>>(
        std::array<double, 4>{w[0].real(), w[0].imag(), w[1].real(), w[1].imag()});
    CVec<J1<4>> z;
    z[0] = Cx<J1<4>>(p[0], p[1]);
    z[1] = Cx<J1<4>>(p[2], p[3]);
    J1<4> m = mu.mu2(z);
    return {0.5 * cplx(m.d[0], -m.d[1]), 0.5 * cplx(m.d[2], -m.d[3])};
}

cplx to_c(const Cx<double>& a) { return {a.re, a.im}; }
cplx value_c(const Cx<J1<2>>& a) { return {a.re.v, a.im.v}; }
cplx deriv_c(const Cx<J1<2>>& a, int k) { return {a.re.d[k], a.im.d[k]}; }

int dominant(const std::array<cplx, 2>& z) { return std::norm(z[1]) > std::norm(z[0]) ? 1 : 0; }

}  // namespace

// ---------------------------------------------------------------- MoserField

MoserField::MoserField(MinkowskiFunction mu) : mu_(std::move(mu)) {
    if (mu_.n() != 2) throw DomainError("Moser normalization is implemented for n = 2");
}

PotentialJet MoserField::potential(int chart, double x, double y, int order) const {
    PotentialJet p;
    if (order <= 2) {
        auto q = seed_point<J2<2>>(std::array<double, 2>{x, y});
        auto r = potential_fn(mu_, chart, q[0], q[1]);
        p.f = r.v.v;
        for (int i = 0; i < 2; ++i) {
            p.grad[i] = r.d[i].v;
            for (int j = 0; j < 2; ++j) p.hess[i][j] = r.d[i].d[j];
        }
        p.lap = p.hess[0][0] + p.hess[1][1];
        return p;
    }
    auto q = seed_point<J3<2>>(std::array<double, 2>{x, y});
    auto r = potential_fn(mu_, chart, q[0], q[1]);
    p.f = r.v.v.v;
    for (int i = 0; i < 2; ++i) {
        p.grad[i] = r.d[i].v.v;
        for (int j = 0; j < 2; ++j) p.hess[i][j] = r.d[i].d[j].v;
    }
    p.lap = p.hess[0][0] + p.hess[1][1];
    for (int k = 0; k < 2; ++k) p.grad_lap[k] = r.d[0].d[0].d[k] + r.d[1].d[1].d[k];
    return p;
}

double MoserField::density(int chart, double x, double y) const {
    return reference_density(x, y) + potential(chart, x, y, 2).lap;
}

// ---------------------------------------------------------------- checks against oracles

double moser_endpoint_residual(const MoserField& field, int steps, int points, int* nodes) {
    ChartAtlas atlas;
    atlas.base_points = points;
    RegularGrid g = atlas.base_grid();
    std::vector<std::pair<int, cplx>> pts;
    for (int c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < g.size(); ++i) {
            Eigen::VectorXd p = g.point(i);
            cplx v(p(0), p(1));
            if (std::abs(v) <= 1.0) pts.emplace_back(c, v);
        }
    std::vector<double> res(pts.size(), 0.0);
    parallel_for(pts.size(), [&](std::size_t k) {
        auto [c, v] = pts[k];
        auto z = lifted_flow(field, unit_section<2>(c, seeded(v)), 0.0, 1.0, steps);
        int t = value_of(abs2(z[1])) > value_of(abs2(z[0])) ? 1 : 0;
        Cx<J1<2>> w = z[1 - t] / z[t];
        double det = w.re.d[0] * w.im.d[1] - w.re.d[1] * w.im.d[0];
        res[k] = std::abs(field.density(t, w.re.v, w.im.v) * det - reference_density(v.real(), v.imag()));
    });
    if (nodes) *nodes = static_cast<int>(pts.size());
    return res.empty() ? 0.0 : *std::max_element(res.begin(), res.end());
}

std::array<double, 2> nu_by_pullback(const MoserField& field, int chart, cplx v, int steps) {
    using Z = std::array<Cx<J1<2>>, 2>;
    // pulled back (scale * alpha) at the current point, scale = W_o / W_t or 1
    auto pulled = [&](const Z& z, double t, bool weighted) {
        int c = value_of(abs2(z[1])) > value_of(abs2(z[0])) ? 1 : 0;
        Cx<J1<2>> w = z[1 - c] / z[c];
        double x = w.re.v, y = w.im.v;
        PotentialJet p = field.potential(c, x, y, 2);
        double wo = reference_density(x, y);
        double scale = weighted ? wo / (wo + t * p.lap) : 1.0;
        std::array<double, 2> alpha{-p.grad[1], p.grad[0]};
        std::array<double, 2> r;
        for (int k = 0; k < 2; ++k) r[k] = scale * (alpha[0] * w.re.d[k] + alpha[1] * w.im.d[k]);
        return r;
    };
    auto axpy = [](const Z& a, const Z& b, double s) {
        return Z{a[0] + J1<2>(s) * b[0], a[1] + J1<2>(s) * b[1]};
    };
    Z z = unit_section<2>(chart, seeded(v));
    std::array<double, 2> integral{0.0, 0.0};
    double h = 1.0 / steps;
    for (int k = 0; k < steps; ++k) {
        double t = k * h;
        auto k1 = lifted_velocity(field, z, t);
        Z z2 = axpy(z, k1, 0.5 * h);
        auto k2 = lifted_velocity(field, z2, t + 0.5 * h);
        Z z3 = axpy(z, k2, 0.5 * h);
        auto k3 = lifted_velocity(field, z3, t + 0.5 * h);
        Z z4 = axpy(z, k3, h);
        auto k4 = lifted_velocity(field, z4, t + h);
        auto g1 = pulled(z, t, true), g2 = pulled(z2, t + 0.5 * h, true), g3 = pulled(z3, t + 0.5 * h, true),
             g4 = pulled(z4, t + h, true);
        for (int i = 0; i < 2; ++i) integral[i] += h / 6.0 * (g1[i] + 2.0 * g2[i] + 2.0 * g3[i] + g4[i]);
        for (int i = 0; i < 2; ++i)
            z[i] = z[i] + J1<2>(h / 6.0) * (k1[i] + J1<2>(2.0) * k2[i] + J1<2>(2.0) * k3[i] + k4[i]);
    }
    auto end = pulled(z, 1.0, false);
    return {0.5 * end[0] - 0.5 * integral[0], 0.5 * end[1] - 0.5 * integral[1]};
}

namespace {

// Solves -lap_h u = rhs on the interior of an n x n grid with Dirichlet data in u.
void cg_dirichlet(int n, double h, std::vector<double>& u, const std::vector<double>& rhs) {
    int m = n - 2;
    auto idx = [n](int i, int j) { return static_cast<std::size_t>(i) * n + j; };
    std::vector<double> b(static_cast<std::size_t>(m) * m), x(b.size()), r, p, ap(b.size());
    double ih2 = 1.0 / (h * h);
    for (int i = 1; i < n - 1; ++i)
        for (int j = 1; j < n - 1; ++j) {
            double bb = rhs[idx(i, j)];
            if (i == 1) bb += ih2 * u[idx(0, j)];
            if (i == n - 2) bb += ih2 * u[idx(n - 1, j)];
            if (j == 1) bb += ih2 * u[idx(i, 0)];
            if (j == n - 2) bb += ih2 * u[idx(i, n - 1)];
            b[(i - 1) * m + (j - 1)] = bb;
            x[(i - 1) * m + (j - 1)] = u[idx(i, j)];
        }
    auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                double c = 4.0 * in[i * m + j];
                if (i > 0) c -= in[(i - 1) * m + j];
                if (i < m - 1) c -= in[(i + 1) * m + j];
                if (j > 0) c -= in[i * m + j - 1];
                if (j < m - 1) c -= in[i * m + j + 1];
                out[i * m + j] = ih2 * c;
            }
    };
    apply(x, ap);
    r.resize(b.size());
    for (std::size_t k = 0; k < b.size(); ++k) r[k] = b[k] - ap[k];
    p = r;
    double rr = 0, bnorm = 0;
    for (std::size_t k = 0; k < b.size(); ++k) {
        rr += r[k] * r[k];
        bnorm += b[k] * b[k];
    }
    for (int it = 0; it < 10 * m * m && rr > 1e-26 * std::max(bnorm, 1.0); ++it) {
        apply(p, ap);
        double pap = 0;
        for (std::size_t k = 0; k < b.size(); ++k) pap += p[k] * ap[k];
        double a = rr / pap;
        double rr2 = 0;
        for (std::size_t k = 0; k < b.size(); ++k) {
            x[k] += a * p[k];
            r[k] -= a * ap[k];
            rr2 += r[k] * r[k];
        }
        double beta = rr2 / rr;
        rr = rr2;
        for (std::size_t k = 0; k < b.size(); ++k) p[k] = r[k] + beta * p[k];
    }
    for (int i = 1; i < n - 1; ++i)
        for (int j = 1; j < n - 1; ++j) u[idx(i, j)] = x[(i - 1) * m + (j - 1)];
}

}  // namespace

PoissonCheck poisson_potential_check(const MoserField& field, int points, int schwarz_iterations) {
    const double ext = 1.25;
    int n = points;
    double h = 2.0 * ext / (n - 1);
    auto coord = [&](int i) { return -ext + i * h; };
    auto idx = [n](int i, int j) { return static_cast<std::size_t>(i) * n + j; };
    std::array<std::vector<double>, 2> u, rhs;
    for (int c = 0; c < 2; ++c) {
        u[c].assign(static_cast<std::size_t>(n) * n, 0.0);
        rhs[c].resize(u[c].size());
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) rhs[c][idx(i, j)] = -field.potential(c, coord(i), coord(j), 2).lap;
    }
    for (int it = 0; it < schwarz_iterations; ++it)
        for (int c = 0; c < 2; ++c) {
            BicubicTable other(n, n, -ext, -ext, h, u[1 - c]);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    if (i != 0 && j != 0 && i != n - 1 && j != n - 1) continue;
                    cplx w = 1.0 / cplx(coord(i), coord(j));
                    u[c][idx(i, j)] = other(w.real(), w.imag());
                }
            cg_dirichlet(n, h, u[c], rhs[c]);
        }
    int mid = (n - 1) / 2;
    double offset = u[0][idx(mid, mid)] - field.potential(0, 0.0, 0.0, 2).f;
    PoissonCheck pc;
    pc.h = h;
    pc.schwarz_iterations = schwarz_iterations;
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (std::hypot(coord(i), coord(j)) > 1.0) continue;
                double e = u[c][idx(i, j)] - offset - field.potential(c, coord(i), coord(j), 2).f;
                pc.max_error = std::max(pc.max_error, std::abs(e));
            }
    return pc;
}

// ---------------------------------------------------------------- NormalizingMap

NormalizingMap NormalizingMap::build(const MinkowskiFunction& mu, const MoserOptions& opt) {
    if (opt.table_points < 9 || opt.table_points % 2 == 0)
        throw DomainError("Moser table size must be odd and at least 9");
    if (opt.rk4_steps < 1) throw DomainError("rk4_steps must be positive");
    if (!(opt.tolerance > 0)) throw DomainError("Moser tolerance must be positive");
    NormalizingMap m;
    m.field_ = MoserField(mu);
    m.opt_ = opt;
    // omega_t = (1 - t) omega_o + t omega is positive iff omega is
    ChartAtlas atlas;
    RegularGrid g = atlas.base_grid();
    m.report_.min_density = std::numeric_limits<double>::infinity();
    for (int c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < g.size(); ++i) {
            Eigen::VectorXd p = g.point(i);
            double w = m.field_.density(c, p(0), p(1));
            if (!(w > 0)) {
                std::ostringstream os;
                os << "omega_t degenerate at t = 1, chart " << c << ", v = (" << p(0) << ", " << p(1)
                   << "): density " << w;
                throw DomainError(os.str());
            }
            m.report_.min_density = std::min(m.report_.min_density, w);
        }
    m.build_tables();
    m.build_phase();
    m.validate();
    return m;
}

void NormalizingMap::build_tables() {
    int n = opt_.table_points;
    double L = opt_.table_extent;
    auto xs = chebyshev_points(n, L);
    std::size_t nn = static_cast<std::size_t>(n) * n;
    std::vector<std::array<cplx, 2>> img(2 * nn);
    std::vector<double> drift(2 * nn, 0.0);
    parallel_for(2 * nn, [&](std::size_t k) {
        int c = static_cast<int>(k / nn);
        std::size_t ij = k % nn;
        cplx v(xs[ij / n], xs[ij % n]);
        FlowDrift d;
        auto z = lifted_flow(field_, unit_section(c, v), 0.0, 1.0, opt_.rk4_steps, &d);
        img[k] = {to_c(z[0]), to_c(z[1])};
        drift[k] = d.sphere;
    });
    report_.sphere_drift = *std::max_element(drift.begin(), drift.end());
    for (int c = 0; c < 2; ++c)
        for (int comp = 0; comp < 4; ++comp) {
            std::vector<double> vals(nn);
            for (std::size_t ij = 0; ij < nn; ++ij) {
                cplx a = img[c * nn + ij][comp / 2];
                vals[ij] = comp % 2 ? a.imag() : a.real();
            }
            unit_[c][comp] = ChebyshevTable2D(n, L, vals);
        }
}

std::array<double, 2> NormalizingMap::nu(int chart, cplx v, bool corrected) const {
    auto f = fiber_image(chart, seeded(v), corrected);
    std::array<cplx, 2> fv{value_c(f[0]), value_c(f[1])};
    auto g = mu2_gradient(mu(), fv);
    double m2 = mu().mu2(Eigen::Vector2cd(fv[0], fv[1]));
    double s = 1.0 + std::norm(v);
    std::array<double, 2> ball{-v.imag() / s, v.real() / s};
    std::array<double, 2> r;
    for (int k = 0; k < 2; ++k)
        r[k] = (g[0] * deriv_c(f[0], k) + g[1] * deriv_c(f[1], k)).imag() / m2 - ball[k];
    return r;
}

void NormalizingMap::build_phase() {
    int n = opt_.table_points;
    double L = opt_.table_extent;
    auto xs = chebyshev_points(n, L);
    std::size_t nn = static_cast<std::size_t>(n) * n;
    std::array<std::vector<double>, 2> nx, ny;
    for (int c = 0; c < 2; ++c) {
        nx[c].resize(nn);
        ny[c].resize(nn);
    }
    // lambda_ is not yet built: uncorrected measurement
    parallel_for(2 * nn, [&](std::size_t k) {
        int c = static_cast<int>(k / nn);
        std::size_t ij = k % nn;
        auto r = nu(c, cplx(xs[ij / n], xs[ij % n]), false);
        nx[c][ij] = r[0];
        ny[c][ij] = r[1];
    });
    auto cum = chebyshev_cumint_matrix(n, L);
    int mid = (n - 1) / 2;
    std::array<std::vector<double>, 2> chi;
    report_.closedness = 0;
    report_.path_dependence = 0;
    for (int c = 0; c < 2; ++c) {
        ChebyshevTable2D tx(n, L, nx[c]), ty(n, L, ny[c]);
        for (std::size_t ij = 0; ij < nn; ++ij) {
            auto p = seed_point<J1<2>>(std::array<double, 2>{xs[ij / n], xs[ij % n]});
            J1<2> a = tx(p[0], p[1]), b = ty(p[0], p[1]);
            report_.closedness = std::max(report_.closedness, std::abs(b.d[0] - a.d[1]));
        }
        auto at = [n](const std::vector<double>& t, int i, int j) { return t[static_cast<std::size_t>(i) * n + j]; };
        chi[c].assign(nn, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double a = 0, b = 0, a2 = 0, b2 = 0;
                for (int k = 0; k < n; ++k) {
                    a += cum[static_cast<std::size_t>(i) * n + k] * at(nx[c], k, mid);
                    b += cum[static_cast<std::size_t>(j) * n + k] * at(ny[c], i, k);
                    a2 += cum[static_cast<std::size_t>(j) * n + k] * at(ny[c], mid, k);
                    b2 += cum[static_cast<std::size_t>(i) * n + k] * at(nx[c], k, j);
                }
                chi[c][static_cast<std::size_t>(i) * n + j] = a + b;
                report_.path_dependence = std::max(report_.path_dependence, std::abs(a + b - a2 - b2));
            }
    }
    // chart 1 shares the value of chart 0 at [1 : 1]
    ChebyshevTable2D c0(n, L, chi[0]), c1(n, L, chi[1]);
    double shift = c0(1.0, 0.0) - c1(1.0, 0.0);
    for (double& x : chi[1]) x += shift;
    for (int c = 0; c < 2; ++c) {
        std::vector<double> lam(nn);
        for (std::size_t ij = 0; ij < nn; ++ij) lam[ij] = -chi[c][ij];
        lambda_[c] = ChebyshevTable2D(n, L, lam);
    }
    report_.chart_mismatch = 0;
    for (int k = 0; k < 32; ++k) {
        cplx v = std::polar(0.85 + 0.35 * (k % 4) / 3.0, 2.0 * M_PI * k / 32.0);
        cplx u = 1.0 / v;
        double d = lambda(0, Cx<double>(v.real(), v.imag())) - lambda(1, Cx<double>(u.real(), u.imag()));
        report_.chart_mismatch = std::max(report_.chart_mismatch, std::abs(d));
    }
}

Eigen::Vector2cd NormalizingMap::forward(const Eigen::Vector2cd& z) const {
    int c = std::norm(z(1)) > std::norm(z(0)) ? 1 : 0;
    if (std::abs(z(c)) == 0.0) return Eigen::Vector2cd::Zero();
    cplx v = z(1 - c) / z(c);
    auto f = fiber_image(c, Cx<double>(v.real(), v.imag()));
    return z(c) * Eigen::Vector2cd(to_c(f[0]), to_c(f[1]));
}

cplx NormalizingMap::psi(int chart, cplx v, int* target) const {
    auto u = lifted_unit(chart, Cx<double>(v.real(), v.imag()));
    std::array<cplx, 2> a{to_c(u[0]), to_c(u[1])};
    int t = dominant(a);
    if (target) *target = t;
    return a[1 - t] / a[t];
}

Eigen::Vector2cd NormalizingMap::inverse(const Eigen::Vector2cd& w) const {
    if (w.norm() == 0.0) return Eigen::Vector2cd::Zero();
    std::array<cplx, 2> wa{w(0), w(1)};
    int t = dominant(wa);
    cplx target = wa[1 - t] / wa[t];
    // initial guess: backward lifted flow of the unit direction
    auto back = lifted_flow(field_, unit_section(t, target), 1.0, 0.0, opt_.rk4_steps);
    std::array<cplx, 2> b{to_c(back[0]), to_c(back[1])};
    int c = dominant(b);
    cplx v = b[1 - c] / b[c];
    for (int it = 0; it < 30; ++it) {
        auto f = fiber_image(c, seeded(v));
        Cx<J1<2>> q = f[1 - t] / f[t];
        cplx r = value_c(q) - target;
        Eigen::Matrix2d jac;
        jac << q.re.d[0], q.re.d[1], q.im.d[0], q.im.d[1];
        Eigen::Vector2d step = jac.lu().solve(Eigen::Vector2d(r.real(), r.imag()));
        v -= cplx(step(0), step(1));
        if (std::abs(v) > 1.0) {
            v = 1.0 / v;
            c = 1 - c;
        }
        if (step.norm() < 1e-15 * std::max(1.0, std::abs(v))) break;
        if (it == 29 && step.norm() > 1e-10) {
            std::ostringstream os;
            os << "inverse normalizing map did not converge at w = (" << w(0) << ", " << w(1) << ")";
            throw DomainError(os.str());
        }
    }
    auto f = fiber_image(c, Cx<double>(v.real(), v.imag()));
    cplx zeta = wa[t] / to_c(f[t]);
    Eigen::Vector2cd z;
    z(c) = zeta;
    z(1 - c) = zeta * v;
    return z;
}

void NormalizingMap::validate() {
    MoserReport& r = report_;
    if (opt_.endpoint_check) {
        r.endpoint_residual = moser_endpoint_residual(field_, opt_.rk4_steps, opt_.check_points, &r.endpoint_nodes);
        r.endpoint_coarse = moser_endpoint_residual(field_, std::max(1, opt_.rk4_steps / 2), opt_.check_points / 2);
    }
    std::mt19937_64 rng(opt_.seed);
    struct Sample {
        Eigen::Vector2cd z;
    };
    std::vector<Sample> samples(static_cast<std::size_t>(opt_.samples));
    for (auto& s : samples) {
        Eigen::Vector4d g;
        for (int k = 0; k < 4; ++k) g(k) = standard_normal(rng);
        g.normalize();
        double rad = 0.05 + 0.9 * unit_uniform(rng);
        s.z = rad * Eigen::Vector2cd(cplx(g(0), g(1)), cplx(g(2), g(3)));
    }
    struct Result {
        double lin = 0, mu = 0, conn = 0, nu_raw = 0, nu_cor = 0, table = 0, proj = 0, trip = 0, drift = 0;
    };
    std::vector<Result> res(samples.size());
    const cplx mult = std::polar(0.5, 1.1);
    parallel_for(samples.size(), [&](std::size_t k) {
        const Eigen::Vector2cd& z = samples[k].z;
        Result& o = res[k];
        Eigen::Vector2cd fz = forward(z);
        o.lin = (forward(mult * z) - mult * fz).norm();
        o.mu = std::abs(mu().mu(fz) - z.norm());
        int c = std::norm(z(1)) > std::norm(z(0)) ? 1 : 0;
        cplx zeta = z(c), v = z(1 - c) / z(c);
        // (iii): push ball-horizontal vectors forward
        auto f = fiber_image(c, seeded(v));
        std::array<cplx, 2> fv{value_c(f[0]), value_c(f[1])};
        std::array<cplx, 2> img{zeta * fv[0], zeta * fv[1]};
        auto g = mu2_gradient(mu(), img);
        double gn = std::sqrt(std::norm(g[0]) + std::norm(g[1]));
        for (cplx xi : {cplx(1, 0), cplx(0, 1)}) {
            cplx dzeta = -zeta * std::conj(v) * xi / (1.0 + std::norm(v));
            std::array<cplx, 2> y;
            for (int j = 0; j < 2; ++j)
                y[j] = dzeta * fv[j] + zeta * (xi.real() * deriv_c(f[j], 0) + xi.imag() * deriv_c(f[j], 1));
            double yn = std::sqrt(std::norm(y[0]) + std::norm(y[1]));
            o.conn = std::max(o.conn, std::abs(g[0] * y[0] + g[1] * y[1]) / (gn * yn));
        }
        auto nr = nu(c, v, false), nc = nu(c, v, true);
        o.nu_raw = std::max(std::abs(nr[0]), std::abs(nr[1]));
        o.nu_cor = std::max(std::abs(nc[0]), std::abs(nc[1]));
        FlowDrift d;
        auto direct = lifted_flow(field_, unit_section(c, v), 0.0, 1.0, opt_.rk4_steps, &d);
        o.drift = d.sphere;
        auto tab = lifted_unit(c, Cx<double>(v.real(), v.imag()));
        o.table = std::max(std::abs(to_c(direct[0]) - to_c(tab[0])), std::abs(to_c(direct[1]) - to_c(tab[1])));
        std::array<cplx, 2> dz{to_c(direct[0]), to_c(direct[1])};
        int tc = 0;
        cplx pv = psi(c, v, &tc);
        o.proj = std::abs(dz[1 - tc] / dz[tc] - pv);
        o.trip = (inverse(fz) - z).norm();
    });
    for (const Result& o : res) {
        r.fiber_linearity = std::max(r.fiber_linearity, o.lin);
        r.mu_residual = std::max(r.mu_residual, o.mu);
        r.connection_mismatch = std::max(r.connection_mismatch, o.conn);
        r.nu_raw = std::max(r.nu_raw, o.nu_raw);
        r.nu_corrected = std::max(r.nu_corrected, o.nu_cor);
        r.table_error = std::max(r.table_error, o.table);
        r.projection = std::max(r.projection, o.proj);
        r.roundtrip = std::max(r.roundtrip, o.trip);
        r.sphere_drift = std::max(r.sphere_drift, o.drift);
    }
    double tol = opt_.tolerance;
    auto check = [&](const char* name, double value, double bound) {
        if (!(value < bound)) r.failures.push_back(name);
    };
    if (opt_.endpoint_check) check("endpoint_residual", r.endpoint_residual, tol);
    check("closedness", r.closedness, tol);
    check("path_dependence", r.path_dependence, tol);
    check("chart_mismatch", r.chart_mismatch, tol);
    check("nu_corrected", r.nu_corrected, tol);
    check("connection_mismatch", r.connection_mismatch, tol);
    check("table_error", r.table_error, tol);
    check("projection", r.projection, 1e-7);
    check("fiber_linearity", r.fiber_linearity, 1e-10);
    check("mu_residual", r.mu_residual, 1e-7);
    check("roundtrip", r.roundtrip, 1e-8);
    r.pass = r.failures.empty();
}

// ---------------------------------------------------------------- dumps

namespace {

const char* const kResidualNames[] = {"min_density",  "endpoint_residual", "endpoint_coarse", "sphere_drift",
                                      "table_error",  "closedness",        "path_dependence", "chart_mismatch",
                                      "nu_raw",       "nu_corrected",      "fiber_linearity", "mu_residual",
                                      "connection_mismatch", "projection", "roundtrip"};

std::vector<double> residual_values(const MoserReport& r) {
    return {r.min_density,  r.endpoint_residual, r.endpoint_coarse,  r.sphere_drift,       r.table_error,
            r.closedness,   r.path_dependence,   r.chart_mismatch,   r.nu_raw,             r.nu_corrected,
            r.fiber_linearity, r.mu_residual,    r.connection_mismatch, r.projection,      r.roundtrip};
}

}  // namespace

GridDump NormalizingMap::to_dump(int points) const {
    GridDump d;
    int n = opt_.table_points;
    auto& meta = d.add("moser_meta", -1, {4});
    meta.values = {cplx(n), cplx(opt_.table_extent), cplx(opt_.rk4_steps), cplx(report_.pass ? 1.0 : 0.0)};
    auto& res = d.add("moser_residuals", -1, {static_cast<int>(std::size(kResidualNames))});
    auto vals = residual_values(report_);
    for (std::size_t k = 0; k < vals.size(); ++k) res.values[k] = vals[k];
    auto xs = chebyshev_points(n, opt_.table_extent);
    for (int c = 0; c < 2; ++c) {
        auto& u = d.add("unit_nodes", c, {n, n, 2});
        auto& l = d.add("lambda_nodes", c, {n, n});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                std::size_t ij = static_cast<std::size_t>(i) * n + j;
                auto a = lifted_unit(c, Cx<double>(xs[i], xs[j]));
                u.values[2 * ij] = to_c(a[0]);
                u.values[2 * ij + 1] = to_c(a[1]);
                l.values[ij] = lambda(c, Cx<double>(xs[i], xs[j]));
            }
    }
    const double ext = 1.0;
    double h = points > 1 ? 2.0 * ext / (points - 1) : 0.0;
    for (int c = 0; c < 2; ++c) {
        auto& p = d.add("psi_hat", c, {points, points, 2});
        auto& l = d.add("lambda", c, {points, points});
        for (int i = 0; i < points; ++i)
            for (int j = 0; j < points; ++j) {
                std::size_t ij = static_cast<std::size_t>(i) * points + j;
                Cx<double> v(-ext + i * h, -ext + j * h);
                auto a = lifted_unit(c, v);
                p.values[2 * ij] = to_c(a[0]);
                p.values[2 * ij + 1] = to_c(a[1]);
                l.values[ij] = lambda(c, v);
            }
    }
    return d;
}

NormalizingMap NormalizingMap::from_dump(const GridDump& dump, const MinkowskiFunction& mu) {
    const GridRecord* meta = dump.find("moser_meta", -1);
    if (!meta || meta->values.size() != 4) throw DomainError("normalizing-map dump lacks moser_meta");
    NormalizingMap m;
    m.field_ = MoserField(mu);
    m.opt_.table_points = static_cast<int>(std::lround(meta->values[0].real()));
    m.opt_.table_extent = meta->values[1].real();
    m.opt_.rk4_steps = static_cast<int>(std::lround(meta->values[2].real()));
    int n = m.opt_.table_points;
    std::size_t nn = static_cast<std::size_t>(n) * n;
    for (int c = 0; c < 2; ++c) {
        const GridRecord* u = dump.find("unit_nodes", c);
        const GridRecord* l = dump.find("lambda_nodes", c);
        if (!u || !l || u->values.size() != 2 * nn || l->values.size() != nn)
            throw DomainError("normalizing-map dump: bad node tables for chart " + std::to_string(c));
        for (int comp = 0; comp < 4; ++comp) {
            std::vector<double> vals(nn);
            for (std::size_t ij = 0; ij < nn; ++ij) {
                cplx a = u->values[2 * ij + comp / 2];
                vals[ij] = comp % 2 ? a.imag() : a.real();
            }
            m.unit_[c][comp] = ChebyshevTable2D(n, m.opt_.table_extent, vals);
        }
        std::vector<double> lam(nn);
        for (std::size_t ij = 0; ij < nn; ++ij) lam[ij] = l->values[ij].real();
        m.lambda_[c] = ChebyshevTable2D(n, m.opt_.table_extent, lam);
    }
    if (const GridRecord* r = dump.find("moser_residuals", -1)) {
        std::vector<double*> slots{&m.report_.min_density,   &m.report_.endpoint_residual, &m.report_.endpoint_coarse,
                                   &m.report_.sphere_drift,  &m.report_.table_error,       &m.report_.closedness,
                                   &m.report_.path_dependence, &m.report_.chart_mismatch,  &m.report_.nu_raw,
                                   &m.report_.nu_corrected,  &m.report_.fiber_linearity,   &m.report_.mu_residual,
                                   &m.report_.connection_mismatch, &m.report_.projection, &m.report_.roundtrip};
        for (std::size_t k = 0; k < slots.size() && k < r->values.size(); ++k) *slots[k] = r->values[k].real();
    }
    m.report_.pass = meta->values[3].real() != 0.0;
    if (!m.report_.pass) m.report_.failures.push_back("stored report failed");
    return m;
}

}  // namespace maform
