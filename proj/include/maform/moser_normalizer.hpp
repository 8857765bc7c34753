#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "maform/domain_model.hpp"
#include "maform/quadrature.hpp"

namespace maform {

// Potential f = log(m_c^2 / (1 + |v|^2)) of omega - omega_o on CP^1, so that
// omega - omega_o = ddc f and alpha = dc f.
struct PotentialJet {
    double f = 0;
    std::array<double, 2> grad{};
    std::array<std::array<double, 2>, 2> hess{};
    double lap = 0;
    std::array<double, 2> grad_lap{};
};

// Fubini-Study density 4 / (1 + |v|^2)^2 and its gradient.
inline double reference_density(double x, double y) {
    double s = 1.0 + x * x + y * y;
    return 4.0 / (s * s);
}

class MoserField {
public:
    MoserField() = default;
    explicit MoserField(MinkowskiFunction mu);

    const MinkowskiFunction& mu() const { return mu_; }
    // order 2: f, grad, lap; order 3: also hess, grad_lap.
    PotentialJet potential(int chart, double x, double y, int order = 3) const;
    double density(int chart, double x, double y) const;  // W = W_o + lap f

    // X_t = -grad f / W_t with W_t = W_o + t lap f, as a complex number X^x + i X^y.
    template <class S>
    Cx<S> velocity(int chart, const Cx<S>& v, double t) const;

private:
    MinkowskiFunction mu_;
};

// Horizontal lift (ball connection) of X_t at an ambient point z of C^2 \ 0.
template <class S>
std::array<Cx<S>, 2> lifted_velocity(const MoserField& field, const std::array<Cx<S>, 2>& z, double t) {
    int c = value_of(abs2(z[1])) > value_of(abs2(z[0])) ? 1 : 0;
    Cx<S> v = z[1 - c] / z[c];
    Cx<S> x = field.velocity(c, v, t);
    S h = 1.0 + abs2(v);
    Cx<S> b = (S(1.0) / h) * (z[c] * x);
    std::array<Cx<S>, 2> r;
    r[1 - c] = b;
    r[c] = -(conj(v) * b);
    return r;
}

struct FlowDrift {
    double sphere = 0;  // | |z(1)| - |z(0)| | before projection
};

// RK4 integration of the lifted flow from t0 to t1; the endpoint is projected back
// onto the sphere through z(t0).
template <class S>
std::array<Cx<S>, 2> lifted_flow(const MoserField& field, std::array<Cx<S>, 2> z, double t0, double t1, int steps,
                                 FlowDrift* drift = nullptr) {
    using std::sqrt;
    S r0 = sqrt(abs2(z[0]) + abs2(z[1]));
    double h = (t1 - t0) / steps;
    auto axpy = [](const std::array<Cx<S>, 2>& a, const std::array<Cx<S>, 2>& b, double s) {
        return std::array<Cx<S>, 2>{a[0] + S(s) * b[0], a[1] + S(s) * b[1]};
    };
    for (int k = 0; k < steps; ++k) {
        double t = t0 + k * h;
        auto k1 = lifted_velocity(field, z, t);
        auto k2 = lifted_velocity(field, axpy(z, k1, 0.5 * h), t + 0.5 * h);
        auto k3 = lifted_velocity(field, axpy(z, k2, 0.5 * h), t + 0.5 * h);
        auto k4 = lifted_velocity(field, axpy(z, k3, h), t + h);
        for (int i = 0; i < 2; ++i)
            z[i] = z[i] + S(h / 6.0) * (k1[i] + S(2.0) * k2[i] + S(2.0) * k3[i] + k4[i]);
    }
    S r1 = sqrt(abs2(z[0]) + abs2(z[1]));
    if (drift) drift->sphere = std::max(drift->sphere, std::abs(value_of(r1) - value_of(r0)));
    S scale = r0 / r1;
    return {scale * z[0], scale * z[1]};
}

struct MoserOptions {
    int rk4_steps = 200;
    int table_points = 41;       // Chebyshev-Lobatto nodes per axis (odd)
    double table_extent = 1.0;   // table square [-L, L] per chart; beyond it the other chart is used
    int check_points = 64;       // N_v for the endpoint check
    int samples = 200;           // random points for the contract checks
    std::uint64_t seed = 1;
    double tolerance = 1e-6;
    bool endpoint_check = true;
};

struct MoserReport {
    double min_density = 0;          // min W over the chart grids (omega_t positivity)
    double endpoint_residual = 0;    // max |psi^* omega - omega_o| (density) on the check grid
    double endpoint_coarse = 0;      // same with half the RK4 steps
    int endpoint_nodes = 0;
    double sphere_drift = 0;
    double table_error = 0;          // tabulated psi-hat vs direct flow at random points
    double closedness = 0;           // max |d nu|
    double path_dependence = 0;      // two integration paths for lambda
    double chart_mismatch = 0;       // lambda from chart 0 vs chart 1 on the overlap
    double nu_raw = 0;               // max |nu| before the phase correction
    double nu_corrected = 0;         // max |nu| after it
    double fiber_linearity = 0;      // (i): |phi(c z) - c phi(z)|
    double mu_residual = 0;          // (ii): |mu(phi(z)) - |z||
    double connection_mismatch = 0;  // (iii): angle between phi_*(H_o) and ker d mu ^ ker d mu o J
    double projection = 0;           // |pi(psi-hat(z)) - psi([z])| in the target chart
    double roundtrip = 0;            // |Phi(phi(z)) - z|
    bool pass = false;
    std::vector<std::string> failures;
};

// Normalizing map phi: blown-up ball -> blown-up domain of mu (n = 2), fiber-linear:
// phi(zeta s_c(v)) = zeta F_c(v).
class NormalizingMap {
public:
    static NormalizingMap build(const MinkowskiFunction& mu, const MoserOptions& opt = {});
    static NormalizingMap from_dump(const GridDump& dump, const MinkowskiFunction& mu);

    const MoserField& field() const { return field_; }
    const MoserOptions& options() const { return opt_; }
    const MoserReport& report() const { return report_; }
    const MinkowskiFunction& mu() const { return field_.mu(); }

    // Unit-sphere image of s_c(v) / |s_c(v)| under the lifted flow (tabulated).
    template <class S>
    std::array<Cx<S>, 2> lifted_unit(int chart, const Cx<S>& v) const;
    template <class S>
    S lambda(int chart, const Cx<S>& v) const {
        if (outside(v)) {
            Cx<S> u = Cx<S>(1.0) / v;
            return lambda_[1 - chart](u.re, u.im);
        }
        return lambda_[chart](v.re, v.im);
    }
    // F_c(v) = phi(s_c(v)).
    template <class S>
    std::array<Cx<S>, 2> fiber_image(int chart, const Cx<S>& v, bool corrected = true) const;
    // Connection discrepancy nu = Im(sigma^* d log mu^2 (1,0)) - Im(s_c^* d log |z|^2 (1,0)).
    std::array<double, 2> nu(int chart, cplx v, bool corrected = true) const;

    Eigen::Vector2cd forward(const Eigen::Vector2cd& z) const;
    Eigen::Vector2cd inverse(const Eigen::Vector2cd& w) const;
    // Projective image psi([z]) written in chart `target`.
    cplx psi(int chart, cplx v, int* target = nullptr) const;

    GridDump to_dump(int points) const;

private:
    MoserField field_;
    MoserOptions opt_;
    std::array<std::array<ChebyshevTable2D, 4>, 2> unit_;  // re/im of both components
    std::array<ChebyshevTable2D, 2> lambda_;
    MoserReport report_;

    template <class S>
    bool outside(const Cx<S>& v) const {
        return std::abs(value_of(v.re)) > opt_.table_extent || std::abs(value_of(v.im)) > opt_.table_extent;
    }
    void build_tables();
    void build_phase();
    void validate();
};

// ||psi_1^* omega - omega_o||_inf on the |v| <= 1 nodes of an N_v x N_v grid per chart.
double moser_endpoint_residual(const MoserField& field, int steps, int points, int* nodes = nullptr);

// Pullback-integral expression of nu for the uncorrected map at one point:
// nu = 1/2 psi_1^* alpha - 1/2 int_0^1 psi_t^*((W_o / W_t) alpha) dt, alpha = dc f.
std::array<double, 2> nu_by_pullback(const MoserField& field, int chart, cplx v, int steps);

// Zero-mean potential from a five-point Poisson solve on both charts (Schwarz
// alternation, conjugate gradients); returns max deviation from the closed-form f.
struct PoissonCheck {
    double max_error = 0;
    int schwarz_iterations = 0;
    double h = 0;
};
PoissonCheck poisson_potential_check(const MoserField& field, int points, int schwarz_iterations = 40);

// ---------------------------------------------------------------- templates

template <class S>
Cx<S> MoserField::velocity(int chart, const Cx<S>& v, double t) const {
    if constexpr (std::is_same_v<S, double>) {
        PotentialJet p = potential(chart, v.re, v.im, 2);
        double w = (1.0 - t) * reference_density(v.re, v.im) + t * (reference_density(v.re, v.im) + p.lap);
        return {-p.grad[0] / w, -p.grad[1] / w};
    } else {
        static_assert(std::is_same_v<decltype(S::v), double>, "velocity: first-order jets only");
        double x = value_of(v.re), y = value_of(v.im);
        PotentialJet p = potential(chart, x, y, 3);
        double s = 1.0 + x * x + y * y;
        double wo = 4.0 / (s * s);
        std::array<double, 2> gwo{-16.0 * x / (s * s * s), -16.0 * y / (s * s * s)};
        double w = wo + t * p.lap;
        std::array<double, 2> gw{gwo[0] + t * p.grad_lap[0], gwo[1] + t * p.grad_lap[1]};
        double x0 = -p.grad[0] / w, x1 = -p.grad[1] / w;
        double dx[2][2];
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) dx[i][j] = -p.hess[i][j] / w + p.grad[i] * gw[j] / (w * w);
        S dre = v.re - x, dim = v.im - y;  // first-order parts
        return {S(x0) + dx[0][0] * dre + dx[0][1] * dim, S(x1) + dx[1][0] * dre + dx[1][1] * dim};
    }
}

template <class S>
std::array<Cx<S>, 2> NormalizingMap::lifted_unit(int chart, const Cx<S>& v) const {
    if (outside(v)) {
        // s_c(v) = v s_c'(1/v) and the lifted flow commutes with unit scalars
        using std::sqrt;
        Cx<S> u = Cx<S>(1.0) / v;
        auto w = lifted_unit(1 - chart, u);
        S r = sqrt(abs2(v));
        Cx<S> ph(v.re / r, v.im / r);
        return {ph * w[0], ph * w[1]};
    }
    const auto& t = unit_[chart];
    return {Cx<S>(t[0](v.re, v.im), t[1](v.re, v.im)), Cx<S>(t[2](v.re, v.im), t[3](v.re, v.im))};
}

template <class S>
std::array<Cx<S>, 2> NormalizingMap::fiber_image(int chart, const Cx<S>& v, bool corrected) const {
    using std::cos, std::sin, std::sqrt;
    auto u = lifted_unit(chart, v);
    CVec<S> z;
    z[0] = u[0];
    z[1] = u[1];
    S scale = sqrt((1.0 + abs2(v)) / field_.mu().mu2(z));
    Cx<S> rot(scale, S(0.0));
    if (corrected) {
        S l = lambda(chart, v);
        rot = Cx<S>(scale * cos(l), scale * sin(l));
    }
    return {rot * u[0], rot * u[1]};
}

}  // namespace maform
