#include "maform/foliation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "maform/parallel.hpp"
#include "maform/random.hpp"

namespace maform {

void IdentityResiduals::absorb(const IdentityResiduals& o) {
    log_levi = std::max(log_levi, o.log_levi);
    if (powers.size() < o.powers.size()) powers.resize(o.powers.size(), 0.0);
    for (std::size_t k = 0; k < o.powers.size(); ++k) powers[k] = std::max(powers[k], o.powers[k]);
    monge_ampere = std::max(monge_ampere, o.monge_ampere);
    z_definition = std::max(z_definition, o.z_definition);
    z_normalization = std::max(z_normalization, o.z_normalization);
    kernel = std::max(kernel, o.kernel);
    psd_min = std::min(psd_min, o.psd_min);
    tangency = std::max(tangency, o.tangency);
    lie = std::max(lie, o.lie);
    flow_invariance = std::max(flow_invariance, o.flow_invariance);
    condition = std::max(condition, o.condition);
}

namespace {

template <int D>
Eigen::Matrix<double, D, D> to_matrix(const std::array<std::array<double, D>, D>& a) {
    Eigen::Matrix<double, D, D> m;
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) m(i, j) = a[i][j];
    return m;
}

template <int D>
Eigen::Matrix<double, D, 1> to_vector(const std::array<double, D>& a) {
    return Eigen::Map<const Eigen::Matrix<double, D, 1>>(a.data());
}

template <int D>
std::array<double, D> dc_of_gradient(const std::array<double, D>& g) {
    std::array<double, D> r;
    for (int b = 0; b < D; b += 2) {
        r[b] = -g[b + 1];
        r[b + 1] = g[b];
    }
    return r;
}

// RK4 flow of Z with first-order jets in the initial point.
template <int D>
std::array<J1<D>, D> z_flow(const ScalarFn<D>& f, const std::array<double, D>& x0, double t, int substeps) {
    auto state = seed_point<J1<D>>(x0);
    double h = t / substeps;
    auto add = [](const std::array<J1<D>, D>& a, const std::array<J1<D>, D>& b, double s) {
        std::array<J1<D>, D> r;
        for (int i = 0; i < D; ++i) r[i] = a[i] + s * b[i];
        return r;
    };
    for (int k = 0; k < substeps; ++k) {
        auto k1 = z_field<J1<D>, D>(f, state);
        auto k2 = z_field<J1<D>, D>(f, add(state, k1, 0.5 * h));
        auto k3 = z_field<J1<D>, D>(f, add(state, k2, 0.5 * h));
        auto k4 = z_field<J1<D>, D>(f, add(state, k3, h));
        for (int i = 0; i < D; ++i) state[i] = state[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return state;
}

template <int D>
Eigen::Matrix<double, D, D> omega_at(const ScalarFn<D>& f, const std::array<double, D>& x) {
    auto ld = local_derivs<double, D>(f, x);
    return to_matrix<D>(levi_two_form<double, D>(ld.hess));
}

}  // namespace

template <int N>
FoliationFrame Foliation<N>::compute_frame(const ScalarFn<D>& f, const Point& x) {
    auto ld = local_derivs<double, D>(f, x);
    Eigen::Matrix<double, D, D> om = to_matrix<D>(levi_two_form<double, D>(ld.hess));
    auto zarr = z_field<double, D>(f, x);
    Eigen::Matrix<double, D, 1> z = to_vector<D>(zarr), jz = to_vector<D>(apply_j<double, D>(zarr));
    double ozjz = z.dot(om * jz);
    Eigen::Matrix<double, D, D> p = Eigen::Matrix<double, D, D>::Identity();
    for (int c = 0; c < D; ++c) {
        Eigen::Matrix<double, D, 1> e = Eigen::Matrix<double, D, 1>::Unit(c);
        double b = z.dot(om * e) / ozjz;
        double a = jz.dot(om * e) / (-ozjz);
        p.col(c) = e - a * z - b * jz;
    }
    Eigen::JacobiSVD<Eigen::Matrix<double, D, D>> svd(p, Eigen::ComputeFullU);
    FoliationFrame fr;
    fr.z = z;
    fr.jz = jz;
    fr.horizontal = svd.matrixU().leftCols(D - 2);
    Eigen::Matrix<double, D, D> all;
    all.col(0) = z;
    all.col(1) = jz;
    all.rightCols(D - 2) = fr.horizontal;
    Eigen::JacobiSVD<Eigen::Matrix<double, D, D>> s2(all);
    fr.condition = s2.singularValues()(0) / s2.singularValues()(D - 1);
    Eigen::MatrixXd j = standard_complex_structure(D);
    Eigen::MatrixXd jh = j * fr.horizontal;
    fr.j_invariance = (jh - fr.horizontal * (fr.horizontal.transpose() * jh)).cwiseAbs().maxCoeff();
    return fr;
}

template <int N>
IdentityResiduals Foliation<N>::identities(const ScalarFn<D>& f, const Point& x) {
    IdentityResiduals r;
    auto jet = f(seed_point<J2<D>>(x));
    auto ljet = log(jet);
    std::array<std::array<double, D>, D> h, hl;
    std::array<double, D> g;
    for (int i = 0; i < D; ++i) {
        g[i] = jet.d[i].v;
        for (int j = 0; j < D; ++j) {
            h[i][j] = jet.d[i].d[j];
            hl[i][j] = ljet.d[i].d[j];
        }
    }
    double tau = jet.v.v;
    Eigen::Matrix<double, D, D> om = to_matrix<D>(levi_two_form<double, D>(h));
    Eigen::Matrix<double, D, D> oml = to_matrix<D>(levi_two_form<double, D>(hl));
    PointForm w = PointForm::two_form(om.template cast<cplx>());
    PointForm wl = PointForm::two_form(oml.template cast<cplx>());
    Eigen::VectorXcd gv = to_vector<D>(g).template cast<cplx>();
    Eigen::VectorXcd dcv = to_vector<D>(dc_of_gradient<D>(g)).template cast<cplx>();
    PointForm beta = PointForm::covector(gv).wedge(PointForm::covector(dcv));

    r.log_levi = (tau * tau * wl - (tau * w - beta)).max_abs();
    for (int k = 1; k <= N - 1; ++k) {
        PointForm lhs = std::pow(tau, k + 1) * wl.power(k);
        PointForm rhs = tau * w.power(k) - double(k) * beta.wedge(w.power(k - 1));
        r.powers.push_back((lhs - rhs).max_abs());
    }
    r.monge_ampere = (tau * w.power(N) - double(N) * beta.wedge(w.power(N - 1))).max_abs();

    auto fr = compute_frame(f, x);
    Eigen::Matrix<double, D, 1> z = fr.z, jz = fr.jz, gr = to_vector<D>(g);
    Eigen::Matrix<double, D, D> jm = standard_complex_structure(D);
    Eigen::Matrix<double, 1, D> zdef = z.transpose() * om * jm - gr.transpose();
    r.z_definition = zdef.cwiseAbs().maxCoeff();
    r.z_normalization = std::max(std::abs(z.dot(om * jz) - tau), std::abs(gr.dot(z) - tau));
    r.kernel = std::max((z.transpose() * oml).cwiseAbs().maxCoeff(), (jz.transpose() * oml).cwiseAbs().maxCoeff());
    Eigen::MatrixXd hz = fr.horizontal;
    Eigen::MatrixXd gl = hz.transpose() * oml * jm * hz;
    gl = 0.5 * (gl + gl.transpose()).eval();
    r.psd_min = tau * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gl).eigenvalues().minCoeff();
    r.tangency = (gr.transpose() * hz).cwiseAbs().maxCoeff() / gr.norm();
    r.condition = fr.condition;
    return r;
}

template <int N>
double Foliation<N>::lie_residual(const ScalarFn<D>& f, const Point& x, double step, double* flow_inv) {
    const int substeps = 2;
    auto pulled = [&](double t, Eigen::Matrix<double, D, D>* jac_out, Point* end_out) {
        auto st = z_flow<D>(f, x, t, substeps);
        Point end;
        Eigen::Matrix<double, D, D> jac;
        for (int i = 0; i < D; ++i) {
            end[i] = st[i].v;
            for (int j = 0; j < D; ++j) jac(i, j) = st[i].d[j];
        }
        if (jac_out) *jac_out = jac;
        if (end_out) *end_out = end;
        Eigen::Matrix<double, D, D> om = omega_at<D>(f, end);
        return Eigen::Matrix<double, D, D>(jac.transpose() * om * jac);
    };
    Eigen::Matrix<double, D, D> jac;
    Point end;
    auto lp = (pulled(step, &jac, &end) - pulled(-step, nullptr, nullptr)) / (2 * step);
    auto lh = (pulled(0.5 * step, nullptr, nullptr) - pulled(-0.5 * step, nullptr, nullptr)) / step;
    Eigen::Matrix<double, D, D> rich = (4.0 * lh - lp) / 3.0;
    double res = (rich - omega_at<D>(f, x)).cwiseAbs().maxCoeff();
    if (flow_inv) {
        auto fr0 = compute_frame(f, x);
        auto fr1 = compute_frame(f, end);
        Eigen::Matrix<double, D, D> om1 = omega_at<D>(f, end);
        Eigen::MatrixXd pushed = jac * fr0.horizontal;
        double worst = 0;
        for (int c = 0; c < pushed.cols(); ++c) {
            Eigen::Matrix<double, D, 1> xv = pushed.col(c);
            double s = om1.norm() * xv.norm();
            worst = std::max(worst, std::abs(fr1.z.dot(om1 * xv)) / (s * fr1.z.norm()));
            worst = std::max(worst, std::abs(fr1.jz.dot(om1 * xv)) / (s * fr1.jz.norm()));
        }
        *flow_inv = worst;
    }
    return res;
}

template <int N>
double Foliation<N>::gridded_monge_ampere(const ScalarFn<D>& f, const Point& x, double h) {
    Eigen::VectorXd c = to_vector<D>(x);
    RegularGrid g = RegularGrid::centered(D, 5, c, h);
    auto tau = FormField::sample_function(g, [&](const Eigen::VectorXd& p) {
        Point q;
        for (int i = 0; i < D; ++i) q[i] = p(i);
        return cplx(f(q));
    });
    FormField dt = tau.exterior_d();
    FormField dct = tau.dc();
    FormField om = dct.exterior_d();
    FormField beta = dt.wedge(dct);
    FormField top = om;
    for (int k = 1; k < N; ++k) top = top.wedge(om);
    FormField lower = beta;
    for (int k = 1; k < N; ++k) lower = lower.wedge(om);
    std::vector<int> mid(D, 2);
    std::size_t centre = g.ravel(mid);
    PointForm res = tau.at(centre)[0] * top.at(centre) - double(N) * lower.at(centre);
    return res.max_abs();
}

template class Foliation<2>;
template class Foliation<3>;

// ---------------------------------------------------------------- verification

template <int N>
VerifyReport verify_identities(const ExhaustionField<N>& tau, const VerifyOptions& opt) {
    constexpr int D = 2 * N;
    using Fol = Foliation<N>;
    opt.atlas.validate();
    if (opt.atlas.n != N) throw DomainError("verify: atlas dimension mismatch");
    ChartAtlas atlas = opt.atlas;
    if (N > 2) atlas.base_points = std::min(atlas.base_points, opt.max_base_points_high_dim);
    RegularGrid g = atlas.base_grid();
    std::vector<ScalarFn<D>> charts;
    for (int c = 0; c < N; ++c) charts.push_back(tau.in_chart(c));

    struct Node {
        int chart;
        std::array<double, D> x;
    };
    std::vector<Node> nodes;
    for (int c = 0; c < N; ++c)
        for (std::size_t i = 0; i < g.size(); ++i) {
            Eigen::VectorXd p = g.point(i);
            for (int k = 1; k <= atlas.fiber_radii; ++k) {
                Node nd;
                nd.chart = c;
                for (int a = 0; a < D - 2; ++a) nd.x[a] = p(a);
                nd.x[D - 2] = atlas.radius(k);
                nd.x[D - 1] = 0.0;
                nodes.push_back(nd);
            }
        }

    std::vector<IdentityResiduals> per(nodes.size());
    parallel_for(nodes.size(), [&](std::size_t i) { per[i] = Fol::identities(charts[nodes[i].chart], nodes[i].x); });

    std::mt19937_64 rng(opt.seed);
    std::vector<Node> lie_nodes(opt.lie_samples);
    for (auto& nd : lie_nodes) {
        nd.chart = static_cast<int>(rng() % N);
        for (int a = 0; a < D - 2; ++a) nd.x[a] = 2.0 * unit_uniform(rng) - 1.0;
        double r = atlas.radius(1) + (1.0 - atlas.radius(1)) * unit_uniform(rng);
        double th = 2.0 * M_PI * unit_uniform(rng);
        nd.x[D - 2] = r * std::cos(th);
        nd.x[D - 1] = r * std::sin(th);
    }
    std::vector<IdentityResiduals> lper(lie_nodes.size());
    parallel_for(lie_nodes.size(), [&](std::size_t i) {
        double fi = 0;
        lper[i] = Fol::identities(charts[lie_nodes[i].chart], lie_nodes[i].x);
        lper[i].lie = Fol::lie_residual(charts[lie_nodes[i].chart], lie_nodes[i].x, opt.lie_step, &fi);
        lper[i].flow_invariance = fi;
    });

    VerifyReport rep;
    rep.worst.psd_min = std::numeric_limits<double>::infinity();
    for (auto& r : per) rep.worst.absorb(r);
    for (auto& r : lper) rep.worst.absorb(r);
    rep.nodes = nodes.size();
    rep.lie_nodes = lie_nodes.size();
    const double tol = opt.tolerance;
    auto check = [&](const char* name, double v) {
        if (!(v <= tol)) rep.failures.push_back(name);
    };
    check("log_levi", rep.worst.log_levi);
    for (std::size_t k = 0; k < rep.worst.powers.size(); ++k)
        if (!(rep.worst.powers[k] <= tol)) rep.failures.push_back("power_k" + std::to_string(k + 1));
    check("monge_ampere", rep.worst.monge_ampere);
    check("z_definition", rep.worst.z_definition);
    check("z_normalization", rep.worst.z_normalization);
    check("kernel", rep.worst.kernel);
    check("tangency", rep.worst.tangency);
    if (rep.lie_nodes) check("lie_derivative", rep.worst.lie);
    if (!(rep.worst.psd_min >= -tol)) rep.failures.push_back("psd");
    if (!(rep.worst.condition < 1e6)) rep.failures.push_back("frame_condition");
    rep.pass = rep.failures.empty();
    return rep;
}

template VerifyReport verify_identities<2>(const ExhaustionField<2>&, const VerifyOptions&);
template VerifyReport verify_identities<3>(const ExhaustionField<3>&, const VerifyOptions&);

// ---------------------------------------------------------------- leaves

template <int N>
Eigen::VectorXcd z_holomorphic(const ExhaustionField<N>& tau, const Eigen::VectorXcd& z) {
    constexpr int D = 2 * N;
    std::array<double, D> x;
    for (int k = 0; k < N; ++k) {
        x[2 * k] = z(k).real();
        x[2 * k + 1] = z(k).imag();
    }
    auto zr = z_field<double, D>(tau.tau(), x);
    Eigen::VectorXcd out(N);
    for (int k = 0; k < N; ++k) out(k) = cplx(zr[2 * k], zr[2 * k + 1]);
    return out;
}

namespace {

template <int N>
Eigen::VectorXcd leaf_rhs(const ExhaustionField<N>& tau, double rho, const Eigen::VectorXcd& p) {
    constexpr int D = 2 * N;
    std::array<double, D> x;
    for (int k = 0; k < N; ++k) {
        x[2 * k] = p(k).real();
        x[2 * k + 1] = p(k).imag();
    }
    auto zr = z_field<double, D>(tau.tau(), x);
    double t = tau.tau()(x);
    Eigen::VectorXcd out(N);
    for (int k = 0; k < N; ++k) out(k) = cplx(zr[2 * k], zr[2 * k + 1]) * (2.0 * rho / t);
    return out;
}

}  // namespace

template <int N>
Eigen::VectorXcd leaf_flow(const ExhaustionField<N>& tau, const Eigen::VectorXcd& p0, double rho0, double rho1,
                           int steps) {
    Eigen::VectorXcd p = p0;
    double h = (rho1 - rho0) / steps;
    for (int s = 0; s < steps; ++s) {
        double r = rho0 + s * h;
        Eigen::VectorXcd k1 = leaf_rhs<N>(tau, r, p);
        Eigen::VectorXcd k2 = leaf_rhs<N>(tau, r + 0.5 * h, p + 0.5 * h * k1);
        Eigen::VectorXcd k3 = leaf_rhs<N>(tau, r + 0.5 * h, p + 0.5 * h * k2);
        Eigen::VectorXcd k4 = leaf_rhs<N>(tau, r + h, p + h * k3);
        p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!(tau(p) <= tau.range_bound() * (1 + 1e-9)) || !p.allFinite())
            throw DomainError("leaf escapes the domain before the requested radius");
    }
    return p;
}

template <int N>
LeafDisc trace_leaf(const ExhaustionField<N>& tau, const IndicatrixField<N>& kappa, int chart,
                    const Eigen::VectorXcd& v, const std::vector<double>& radii, int angles, const LeafOptions& opt) {
    if (radii.empty() || angles < 1) throw DomainError("trace_leaf: empty sampling");
    for (std::size_t k = 0; k < radii.size(); ++k)
        if (!(radii[k] > opt.start_radius) || (k && radii[k] <= radii[k - 1]))
            throw DomainError("trace_leaf: radii must increase and exceed the start radius");
    if (radii.back() * radii.back() > tau.range_bound() * (1 + 1e-12))
        throw DomainError("trace_leaf: radius beyond the exhaustion range");
    LeafDisc leaf;
    leaf.chart = chart;
    leaf.v = v;
    leaf.radii = radii;
    leaf.angles = angles;
    Eigen::VectorXcd w = ChartAtlas::section(chart, v);
    Eigen::VectorXcd p = opt.start_radius * w / kappa.kappa(w);
    double rho = opt.start_radius;
    std::vector<Eigen::VectorXcd> radial;
    for (double r : radii) {
        int steps = std::max(4, static_cast<int>(std::ceil((r - rho) * opt.steps_per_unit)));
        p = leaf_flow<N>(tau, p, rho, r, steps);
        rho = r;
        radial.push_back(p);
        leaf.tau_residual = std::max(leaf.tau_residual, std::abs(tau(p) - r * r));
        leaf.direction_residual = std::max(leaf.direction_residual, (p / p.norm() - w / w.norm()).norm());
        for (double th : {0.7, 2.1}) {
            double t0 = tau(p), t1 = tau(std::polar(1.0, th) * p);
            if (std::abs(t1 - t0) > 1e-9 * std::max(1.0, std::abs(t0)))
                throw DomainError("trace_leaf: exhaustion is not circular; angular fill does not apply");
        }
    }
    leaf.points.reserve(radii.size() * angles);
    for (std::size_t k = 0; k < radii.size(); ++k)
        for (int j = 0; j < angles; ++j) leaf.points.push_back(std::polar(1.0, 2.0 * M_PI * j / angles) * radial[k]);
    return leaf;
}

template LeafDisc trace_leaf<2>(const ExhaustionField<2>&, const IndicatrixField<2>&, int, const Eigen::VectorXcd&,
                                const std::vector<double>&, int, const LeafOptions&);
template LeafDisc trace_leaf<3>(const ExhaustionField<3>&, const IndicatrixField<3>&, int, const Eigen::VectorXcd&,
                                const std::vector<double>&, int, const LeafOptions&);
template Eigen::VectorXcd leaf_flow<2>(const ExhaustionField<2>&, const Eigen::VectorXcd&, double, double, int);
template Eigen::VectorXcd leaf_flow<3>(const ExhaustionField<3>&, const Eigen::VectorXcd&, double, double, int);
template Eigen::VectorXcd z_holomorphic<2>(const ExhaustionField<2>&, const Eigen::VectorXcd&);
template Eigen::VectorXcd z_holomorphic<3>(const ExhaustionField<3>&, const Eigen::VectorXcd&);

}  // namespace maform
