#include "maform/domain_model.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "maform/quadrature.hpp"

namespace maform {

// ---------------------------------------------------------------- MinkowskiFunction

MinkowskiFunction MinkowskiFunction::ball(int n) {
    if (n < 2 || n > kMaxN) throw DomainError("ball: n must be 2 or 3");
    MinkowskiFunction m;
    m.kind_ = Kind::ball;
    m.n_ = n;
    return m;
}

MinkowskiFunction MinkowskiFunction::ellipsoid(std::vector<double> weights) {
    int n = static_cast<int>(weights.size());
    if (n < 2 || n > kMaxN) throw DomainError("ellipsoid: n must be 2 or 3");
    for (double w : weights)
        if (!(w > 0) || !std::isfinite(w)) throw DomainError("ellipsoid: weights must be positive");
    MinkowskiFunction m;
    m.kind_ = Kind::ellipsoid;
    m.n_ = n;
    m.w_ = std::move(weights);
    return m;
}

MinkowskiFunction MinkowskiFunction::perturbed_ball(double eps, QCoefficients q) {
    if (!std::isfinite(eps)) throw DomainError("perturbed_ball: epsilon must be finite");
    MinkowskiFunction m;
    m.kind_ = Kind::perturbed_ball;
    m.n_ = 2;
    m.eps_ = eps;
    m.q_ = q;
    return m;
}

MinkowskiFunction MinkowskiFunction::blend(const MinkowskiFunction& a, const MinkowskiFunction& b, double t) {
    if (a.n() != b.n()) throw DomainError("blend: dimension mismatch");
    MinkowskiFunction m;
    m.kind_ = Kind::blend;
    m.n_ = a.n();
    m.t_ = t;
    m.a_ = std::make_shared<MinkowskiFunction>(a);
    m.b_ = std::make_shared<MinkowskiFunction>(b);
    return m;
}

MinkowskiFunction MinkowskiFunction::from_grid(std::vector<BicubicTable> m_tables) {
    if (m_tables.size() != 2) throw DomainError("grid Minkowski function needs two chart tables");
    for (auto& t : m_tables) {
        if (t.nx() < 8 || t.ny() < 8) throw DomainError("grid Minkowski table too small");
        for (double v : t.values())
            if (!(v > 0) || !std::isfinite(v)) throw DomainError("grid Minkowski table must be positive");
        if (t.x0() > -1.0 - 2 * t.h() || t.x0() + (t.nx() - 1) * t.h() < 1.0 + 2 * t.h())
            throw DomainError("grid Minkowski table must cover the closed unit chart square");
    }
    MinkowskiFunction m;
    m.kind_ = Kind::grid;
    m.n_ = 2;
    m.tables_ = std::make_shared<std::vector<BicubicTable>>(std::move(m_tables));
    return m;
}

GridDump MinkowskiFunction::to_grid_dump(int points, double extent) const {
    if (n_ != 2) throw DomainError("grid dumps of Minkowski functions need n = 2");
    GridDump dump;
    dump.add("mu_extent", -1, {1}).values[0] = extent;
    double h = 2.0 * extent / (points - 1);
    for (int c = 0; c < 2; ++c) {
        auto& rec = dump.add("mu", c, {points, points});
        for (int i = 0; i < points; ++i)
            for (int j = 0; j < points; ++j) {
                Cx<double> v(-extent + i * h, -extent + j * h);
                rec.values[static_cast<std::size_t>(i) * points + j] = std::sqrt(chart_m2(c, &v));
            }
    }
    return dump;
}

MinkowskiFunction MinkowskiFunction::from_grid_dump(const GridDump& dump) {
    const GridRecord* ext = dump.find("mu_extent", -1);
    if (!ext || ext->values.empty()) throw DomainError("grid dump lacks mu_extent record");
    double extent = ext->values[0].real();
    std::vector<BicubicTable> tables;
    for (int c = 0; c < 2; ++c) {
        const GridRecord* r = dump.find("mu", c);
        if (!r || r->shape.size() != 2) throw DomainError("grid dump lacks 2D mu record for chart " + std::to_string(c));
        int nx = r->shape[0], ny = r->shape[1];
        if (nx != ny) throw DomainError("grid dump mu record must be square");
        std::vector<double> vals(r->values.size());
        for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = r->values[i].real();
        tables.emplace_back(nx, ny, -extent, -extent, 2.0 * extent / (nx - 1), std::move(vals));
    }
    return from_grid(std::move(tables));
}

std::string MinkowskiFunction::describe() const {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    switch (kind_) {
        case Kind::ball: os << "ball(n=" << n_ << ")"; break;
        case Kind::ellipsoid:
            os << "ellipsoid(";
            for (std::size_t i = 0; i < w_.size(); ++i) os << (i ? "," : "") << w_[i];
            os << ")";
            break;
        case Kind::perturbed_ball:
            os << "perturbed_ball(eps=" << eps_ << ",q=" << q_.re12 << "," << q_.im12 << "," << q_.quartic << ","
               << q_.diff << ")";
            break;
        case Kind::blend: os << "blend(t=" << t_ << "," << a_->describe() << "," << b_->describe() << ")"; break;
        case Kind::grid: os << "grid(" << (*tables_)[0].nx() << ")"; break;
    }
    return os.str();
}

double MinkowskiFunction::mu2(const Eigen::VectorXcd& z) const {
    if (z.size() != n_) throw DomainError("mu2: dimension mismatch");
    CVec<double> a;
    for (int i = 0; i < n_; ++i) a[i] = Cx<double>(z(i).real(), z(i).imag());
    return mu2(a);
}

// ---------------------------------------------------------------- pseudoconvexity

Eigen::MatrixXcd levi_matrix(const Eigen::MatrixXd& h) {
    int n = static_cast<int>(h.rows() / 2);
    Eigen::MatrixXcd l(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            l(j, k) = 0.25 * cplx(h(2 * j, 2 * k) + h(2 * j + 1, 2 * k + 1), h(2 * j, 2 * k + 1) - h(2 * j + 1, 2 * k));
    return l;
}

namespace {

template <int N>
ScalarFn<2 * N> mu2_fn(const MinkowskiFunction& mu) {
    return ScalarFn<2 * N>([mu](const auto& x) {
        using S = std::decay_t<decltype(x[0])>;
        CVec<S> z;
        for (int i = 0; i < N; ++i) z[i] = Cx<S>(x[2 * i], x[2 * i + 1]);
        return mu.mu2(z);
    });
}

template <int N>
void scan_pseudoconvex(const MinkowskiFunction& mu, int samples, PseudoconvexityWitness& w) {
    constexpr int D = 2 * N;
    auto f = mu2_fn<N>(mu);
    RegularGrid g = RegularGrid::cube(2 * (N - 1), samples, -1.0, 1.0);
    w.min_eigenvalue = std::numeric_limits<double>::infinity();
    for (int c = 0; c < N; ++c) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            Eigen::VectorXcd v = ChartAtlas::base_coords(g.point(i));
            if (v.cwiseAbs().maxCoeff() > 1.0) continue;
            Eigen::VectorXcd z = ChartAtlas::section(c, v);
            std::array<double, D> x;
            for (int k = 0; k < N; ++k) {
                x[2 * k] = z(k).real();
                x[2 * k + 1] = z(k).imag();
            }
            auto d = second_derivs<D>(f, x);
            if (!(d.value > 0) || !std::isfinite(d.value)) {
                w.ok = false;
                w.where = z;
                w.min_eigenvalue = 0;
                w.message = "Minkowski function not positive";
                return;
            }
            Eigen::MatrixXcd l = levi_matrix(d.hess) / d.value;
            double ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(l).eigenvalues().minCoeff();
            if (ev < w.min_eigenvalue) {
                w.min_eigenvalue = ev;
                w.where = z;
            }
        }
    }
    w.ok = w.min_eigenvalue > 1e-8;
    if (!w.ok) w.message = "Levi form of mu^2 not positive definite";
}

}  // namespace

PseudoconvexityWitness check_pseudoconvex(const MinkowskiFunction& mu, int samples_per_axis) {
    PseudoconvexityWitness w;
    if (mu.n() == 2)
        scan_pseudoconvex<2>(mu, samples_per_axis, w);
    else
        scan_pseudoconvex<3>(mu, std::min(samples_per_axis, 9), w);
    return w;
}

CircularDomain make_circular_domain(const MinkowskiFunction& mu, double r) {
    if (!(r > 0) || !std::isfinite(r)) throw DomainError("domain radius must be positive");
    auto w = check_pseudoconvex(mu);
    if (!w.ok) {
        std::ostringstream os;
        os.precision(6);
        os << "domain rejected: " << w.message << " (min eigenvalue " << w.min_eigenvalue << " at z = (";
        for (int i = 0; i < w.where.size(); ++i) os << (i ? ", " : "") << w.where(i);
        os << "))";
        throw DomainError(os.str());
    }
    return {mu, r};
}

// ---------------------------------------------------------------- ExhaustionField

template <int N>
ExhaustionField<N> ExhaustionField<N>::from_domain(const CircularDomain& dom) {
    if (dom.mu.n() != N) throw DomainError("exhaustion: dimension mismatch");
    return ExhaustionField(mu2_fn<N>(dom.mu), dom.r * dom.r, dom.mu.describe());
}

template <int N>
typename ExhaustionField<N>::Fn ExhaustionField<N>::in_chart(int chart) const {
    return ScalarFn<D>([t = tau_, chart](const auto& x) { return t(blowup_to_ambient(chart, x)); });
}

template <int N>
typename ExhaustionField<N>::Fn ExhaustionField<N>::in_log_chart(int chart) const {
    return ScalarFn<D>([t = tau_, chart](const auto& x) {
        using std::cos, std::exp, std::sin;
        auto y = x;
        auto r = exp(x[D - 2]);
        y[D - 2] = r * cos(x[D - 1]);
        y[D - 1] = r * sin(x[D - 1]);
        return t(blowup_to_ambient(chart, y));
    });
}

template <int N>
double ExhaustionField<N>::operator()(const Eigen::VectorXcd& z) const {
    std::array<double, D> x;
    for (int k = 0; k < N; ++k) {
        x[2 * k] = z(k).real();
        x[2 * k + 1] = z(k).imag();
    }
    return tau_(x);
}

template class ExhaustionField<2>;
template class ExhaustionField<3>;

// ---------------------------------------------------------------- IndicatrixField

namespace {

std::array<double, 4> fit_weights(const std::array<double, 4>& r) {
    Eigen::Matrix<double, 4, 3> a;
    for (int i = 0; i < 4; ++i) a.row(i) << r[i], r[i] * r[i], r[i] * r[i] * r[i];
    Eigen::Matrix<double, 3, 4> p = (a.transpose() * a).inverse() * a.transpose();
    return {p(0, 0), p(0, 1), p(0, 2), p(0, 3)};
}

template <class S, int D>
S fitted_m(const ScalarFn<D>& tau, const std::array<double, 4>& wts, double step, int first, int chart,
           const Cx<S>* v) {
    constexpr int N = D / 2;
    using std::sqrt;
    S acc(0.0);
    for (int i = 0; i < 4; ++i) {
        double r = step * (first + i);
        std::array<S, D> z;
        for (int j = 0, k = 0; j < N; ++j) {
            Cx<S> zj = (j == chart) ? Cx<S>(r) : Cx<S>(r * v[k].re, r * v[k].im);
            if (j != chart) ++k;
            z[2 * j] = zj.re;
            z[2 * j + 1] = zj.im;
        }
        acc = acc + wts[i] * sqrt(tau(z));
    }
    return acc;
}

}  // namespace

template <int N>
IndicatrixField<N>::IndicatrixField(ExhaustionField<N> tau, IndicatrixOptions opt)
    : tau_(std::move(tau)), opt_(opt) {
    if (!(opt_.radius_step > 0) || 5 * opt_.radius_step * opt_.radius_step > tau_.range_bound())
        throw DomainError("indicatrix: fit radii leave the domain");
    double h = opt_.radius_step;
    weights_ = fit_weights({h, 2 * h, 3 * h, 4 * h});
    auto t = tau_.tau();
    auto wts = weights_;
    k2_ = ScalarFn<D>([t, wts, h](const auto& w) {
        using S = std::decay_t<decltype(w[0])>;
        int c = 0;
        double best = -1;
        for (int j = 0; j < N; ++j) {
            double a = value_of(w[2 * j]) * value_of(w[2 * j]) + value_of(w[2 * j + 1]) * value_of(w[2 * j + 1]);
            if (a > best) {
                best = a;
                c = j;
            }
        }
        Cx<S> zeta(w[2 * c], w[2 * c + 1]);
        std::array<Cx<S>, N> v;
        for (int j = 0, k = 0; j < N; ++j)
            if (j != c) v[k++] = Cx<S>(w[2 * j], w[2 * j + 1]) / zeta;
        S m = fitted_m<S, D>(t, wts, h, 1, c, v.data());
        return abs2(zeta) * m * m;
    });
    // window check on a coarse sample of each chart
    RegularGrid g = RegularGrid::cube(2 * (N - 1), 5, -1.0, 1.0);
    for (int c = 0; c < N; ++c)
        for (std::size_t i = 0; i < g.size(); ++i) {
            Eigen::VectorXcd v = ChartAtlas::base_coords(g.point(i));
            double gap = window_gap(c, v);
            if (!(gap <= opt_.tolerance)) {
                std::ostringstream os;
                os << "indicatrix limit not converged (window slopes differ by " << gap << " relative at chart " << c
                   << ")";
                throw NonConvergenceError(os.str());
            }
        }
}

template <int N>
double IndicatrixField<N>::kappa(const Eigen::VectorXcd& w) const {
    std::array<double, D> x;
    for (int k = 0; k < N; ++k) {
        x[2 * k] = w(k).real();
        x[2 * k + 1] = w(k).imag();
    }
    return std::sqrt(k2_(x));
}

template <int N>
Eigen::VectorXcd IndicatrixField<N>::boundary_point(const Eigen::VectorXcd& d) const {
    return d / kappa(d);
}

template <int N>
double IndicatrixField<N>::window_gap(int chart, const Eigen::VectorXcd& v) const {
    std::array<Cx<double>, N> vc;
    for (int k = 0; k < N - 1; ++k) vc[k] = Cx<double>(v(k).real(), v(k).imag());
    double a = fitted_m<double, D>(tau_.tau(), weights_, opt_.radius_step, 1, chart, vc.data());
    double h = opt_.radius_step;
    auto w2 = fit_weights({2 * h, 3 * h, 4 * h, 5 * h});
    double b = 0;
    for (int i = 0; i < 4; ++i) {
        double r = h * (2 + i);
        std::array<double, D> z;
        for (int j = 0, k = 0; j < N; ++j) {
            cplx zj = (j == chart) ? cplx(r) : r * cplx(vc[k].re, vc[k].im);
            if (j != chart) ++k;
            z[2 * j] = zj.real();
            z[2 * j + 1] = zj.imag();
        }
        b += w2[i] * std::sqrt(tau_.tau()(z));
    }
    return std::abs(a - b) / std::max(std::abs(a), 1e-300);
}

template class IndicatrixField<2>;
template class IndicatrixField<3>;

// ---------------------------------------------------------------- curvature

double fubini_study_density(double x, double y) {
    double s = 1.0 + x * x + y * y;
    return 4.0 / (s * s);
}

double curvature_density(const MinkowskiFunction& mu, int chart, double x, double y) {
    using S = J2<2>;
    auto p = seed_point<S>(std::array<double, 2>{x, y});
    Cx<S> v(p[0], p[1]);
    S f = log(mu.chart_m2(chart, &v));
    return f.d[0].d[0] + f.d[1].d[1];
}

double curvature_integral(const MinkowskiFunction& mu, int radial_nodes, int angular_nodes) {
    if (mu.n() != 2) throw DomainError("curvature integral: n = 2 only");
    auto rule = gauss_legendre(radial_nodes, 0.0, 1.0);
    double total = 0;
    for (int c = 0; c < 2; ++c)
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            double r = rule.nodes[q];
            double ring = 0;
            for (int j = 0; j < angular_nodes; ++j) {
                double th = 2.0 * M_PI * j / angular_nodes;
                ring += curvature_density(mu, c, r * std::cos(th), r * std::sin(th));
            }
            total += rule.weights[q] * r * ring * (2.0 * M_PI / angular_nodes);
        }
    return total;
}

ConnectionData curvature(const MinkowskiFunction& mu, const ChartAtlas& atlas) {
    if (mu.n() != 2 || atlas.n != 2) throw DomainError("curvature: n = 2 only");
    atlas.validate();
    ConnectionData cd;
    RegularGrid g = atlas.base_grid();
    cd.min_density = std::numeric_limits<double>::infinity();
    for (int c = 0; c < 2; ++c) {
        FormField w(g, 2, c);
        for (std::size_t i = 0; i < g.size(); ++i) {
            Eigen::VectorXd p = g.point(i);
            double dens = curvature_density(mu, c, p(0), p(1));
            PointForm f(2, 2);
            f[3u] = dens;
            w.set(i, f);
            if (std::hypot(p(0), p(1)) <= 1.0) cd.min_density = std::min(cd.min_density, dens);
        }
        cd.closedness = std::max(cd.closedness, w.exterior_d().max_abs());
        cd.grid_integral += w.integrate([c](const Eigen::VectorXd& p) {
                                 Eigen::VectorXcd v(1);
                                 v(0) = cplx(p(0), p(1));
                                 return ChartAtlas::overlap_weight(c, ChartAtlas::section(c, v));
                             }).real();
        cd.omega.push_back(std::move(w));
    }
    cd.integral = curvature_integral(mu);
    cd.reference = 4.0 * M_PI;
    // horizontal vectors of ker d mu~^2 at sample points of E_*
    auto f = mu2_fn<2>(mu);
    for (int c = 0; c < 2; ++c)
        for (int s = 0; s < 8; ++s) {
            Eigen::VectorXcd v(1);
            v(0) = std::polar(0.9 * s / 7.0, 0.7 * s);
            Eigen::VectorXcd z = ChartAtlas::to_ambient(c, v, std::polar(0.7, 0.3));
            std::array<double, 4> x{z(0).real(), z(0).imag(), z(1).real(), z(1).imag()};
            auto d = second_derivs<4>(f, x);
            cplx d1 = 0.5 * cplx(d.grad(0), -d.grad(1)), d2 = 0.5 * cplx(d.grad(2), -d.grad(3));
            for (cplx rot : {cplx(1, 0), cplx(0, 1)}) {
                cplx w1 = -d2 * rot, w2 = d1 * rot;
                double dx = d.grad(0) * w1.real() + d.grad(1) * w1.imag() + d.grad(2) * w2.real() + d.grad(3) * w2.imag();
                cd.horizontal_residual = std::max(cd.horizontal_residual, std::abs(dx) / d.grad.norm());
            }
        }
    return cd;
}

}  // namespace maform
