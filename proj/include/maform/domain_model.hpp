#pragma once

#include <array>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "maform/field_kernel.hpp"
#include "maform/interp.hpp"
#include "maform/scalar_fn.hpp"

namespace maform {

constexpr int kMaxN = 3;

template <class S>
using CVec = std::array<Cx<S>, kMaxN>;

class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Circular-invariant perturbation q(u), u = z/|z|, n = 2:
// q = re12 Re(u1 conj u2) + im12 Im(u1 conj u2) + quartic |u1|^2|u2|^2 + diff (|u1|^2 - |u2|^2)
struct QCoefficients {
    double re12 = 1.0;
    double im12 = 0.0;
    double quartic = 1.0;
    double diff = 0.0;
};

// Minkowski function of a bounded circular domain; mu^2 is evaluated generically.
class MinkowskiFunction {
public:
    enum class Kind { ball, ellipsoid, perturbed_ball, blend, grid };

    static MinkowskiFunction ball(int n);
    static MinkowskiFunction ellipsoid(std::vector<double> weights);
    static MinkowskiFunction perturbed_ball(double eps, QCoefficients q = {});
    // mu_t = (1 - t) mu_a + t mu_b
    static MinkowskiFunction blend(const MinkowskiFunction& a, const MinkowskiFunction& b, double t);
    // m_c(v) = mu(section_c(v)) tabulated on each chart square (n = 2).
    static MinkowskiFunction from_grid(std::vector<BicubicTable> m_tables);
    static MinkowskiFunction from_grid_dump(const GridDump& dump);
    GridDump to_grid_dump(int points, double extent) const;

    Kind kind() const { return kind_; }
    int n() const { return n_; }
    std::string describe() const;

    template <class S>
    S mu2(const CVec<S>& z) const;

    double mu2(const Eigen::VectorXcd& z) const;
    double mu(const Eigen::VectorXcd& z) const { return std::sqrt(mu2(z)); }
    // m_c(v)^2 on the affine chart c.
    template <class S>
    S chart_m2(int chart, const Cx<S>* v) const;

private:
    Kind kind_ = Kind::ball;
    int n_ = 2;
    std::vector<double> w_;
    double eps_ = 0;
    QCoefficients q_;
    double t_ = 0;
    std::shared_ptr<const MinkowskiFunction> a_, b_;
    std::shared_ptr<const std::vector<BicubicTable>> tables_;
};

struct PseudoconvexityWitness {
    bool ok = true;
    double min_eigenvalue = 0;
    Eigen::VectorXcd where;
    std::string message;
};

// Levi matrix H_{jk} = d^2 f / dz_j dzbar_k from a real Hessian in (x1, y1, ...).
Eigen::MatrixXcd levi_matrix(const Eigen::MatrixXd& real_hessian);

// Samples the complex Hessian of mu^2 on the unit sphere directions of each chart.
PseudoconvexityWitness check_pseudoconvex(const MinkowskiFunction& mu, int samples_per_axis = 17);

struct CircularDomain {
    MinkowskiFunction mu;
    double r = 1.0;  // domain = {mu < r}
};

// Validates the input (positivity, strict pseudoconvexity) and throws DomainError otherwise.
CircularDomain make_circular_domain(const MinkowskiFunction& mu, double r = 1.0);

// Exhaustion tau on C^N (real coordinates x1, y1, ...), optionally the square of a
// Minkowski function.
template <int N>
class ExhaustionField {
public:
    static constexpr int D = 2 * N;
    using Fn = ScalarFn<D>;

    ExhaustionField() = default;
    ExhaustionField(ScalarFn<D> tau, double range, std::string label)
        : tau_(std::move(tau)), range_(range), label_(std::move(label)) {}

    static ExhaustionField from_domain(const CircularDomain& dom);

    const ScalarFn<D>& tau() const { return tau_; }
    double range_bound() const { return range_; }
    const std::string& label() const { return label_; }

    // Blow-up coordinates of chart c: (Re v_1, Im v_1, ..., Re zeta, Im zeta).
    Fn in_chart(int chart) const;
    // Logarithmic fiber chart: (Re v, Im v, ..., s, t) with zeta = exp(s + i t).
    Fn in_log_chart(int chart) const;

    double operator()(const Eigen::VectorXcd& z) const;

private:
    ScalarFn<D> tau_;
    double range_ = 1.0;
    std::string label_;
};

// Maps chart coordinates (v, zeta) to z generically.
template <class S, std::size_t D>
std::array<S, D> blowup_to_ambient(int chart, const std::array<S, D>& x) {
    constexpr int N = static_cast<int>(D / 2);
    Cx<S> zeta(x[D - 2], x[D - 1]);
    std::array<S, D> z;
    for (int i = 0, k = 0; i < N; ++i) {
        Cx<S> zi = zeta;
        if (i != chart) {
            zi = zeta * Cx<S>(x[2 * k], x[2 * k + 1]);
            ++k;
        }
        z[2 * i] = zi.re;
        z[2 * i + 1] = zi.im;
    }
    return z;
}

struct IndicatrixOptions {
    double radius_step = 0.125;  // fit radii k * step, k = 1..5
    double tolerance = 1e-3;     // window agreement required
};

class NonConvergenceError : public DomainError {
public:
    using DomainError::DomainError;
};

// kappa(w) from the small-radius behaviour of tau along complex lines.
template <int N>
class IndicatrixField {
public:
    static constexpr int D = 2 * N;

    IndicatrixField(ExhaustionField<N> tau, IndicatrixOptions opt = {});

    // Generic evaluation of kappa^2 at w (real coordinates).
    template <class S>
    S kappa2(const std::array<S, D>& w) const { return k2_(w); }
    double kappa(const Eigen::VectorXcd& w) const;
    Eigen::VectorXcd boundary_point(const Eigen::VectorXcd& direction) const;
    // Convergence check of the radial fit at a chart point; returns relative slope gap.
    double window_gap(int chart, const Eigen::VectorXcd& v) const;
    const ScalarFn<D>& kappa2_fn() const { return k2_; }

private:
    ExhaustionField<N> tau_;
    IndicatrixOptions opt_;
    std::array<double, 4> weights_{};
    ScalarFn<D> k2_;
};

// Curvature of the line-bundle metric on CP^1 (n = 2 only).
struct ConnectionData {
    std::vector<FormField> omega;  // per chart, 2-form on the chart base grid
    double min_density = 0;
    double closedness = 0;       // max |d omega| on the grids
    double integral = 0;         // analytic quadrature of omega over CP^1
    double grid_integral = 0;    // trapezoid with overlap weights
    double reference = 0;        // integral of the Fubini-Study form, 4 pi
    double horizontal_residual = 0;  // max |d mu~^2(X)|, |d mu~^2(JX)| over sample horizontal X
};

// omega density W = Laplacian of log m^2 on chart c.
double curvature_density(const MinkowskiFunction& mu, int chart, double x, double y);
double fubini_study_density(double x, double y);
// Integral of the curvature over CP^1 by polar Gauss quadrature on |v| <= 1 in both charts.
double curvature_integral(const MinkowskiFunction& mu, int radial_nodes = 48, int angular_nodes = 96);
ConnectionData curvature(const MinkowskiFunction& mu, const ChartAtlas& atlas);

// ---------------------------------------------------------------- templates

template <class S>
S MinkowskiFunction::mu2(const CVec<S>& z) const {
    switch (kind_) {
        case Kind::ball: {
            S s(0.0);
            for (int i = 0; i < n_; ++i) s = s + abs2(z[i]);
            return s;
        }
        case Kind::ellipsoid: {
            S s(0.0);
            for (int i = 0; i < n_; ++i) s = s + w_[i] * abs2(z[i]);
            return s;
        }
        case Kind::perturbed_ball: {
            S a1 = abs2(z[0]), a2 = abs2(z[1]);
            S r2 = a1 + a2;
            Cx<S> c = z[0] * conj(z[1]);
            S q = (q_.re12 * c.re + q_.im12 * c.im + q_.diff * (a1 - a2)) / r2 + q_.quartic * (a1 * a2) / (r2 * r2);
            S f = 1.0 + eps_ * q;
            return r2 * f * f;
        }
        case Kind::blend: {
            using std::sqrt;
            S ma = sqrt(a_->mu2(z)), mb = sqrt(b_->mu2(z));
            S m = (1.0 - t_) * ma + t_ * mb;
            return m * m;
        }
        case Kind::grid: {
            int c = value_of(abs2(z[1])) > value_of(abs2(z[0])) ? 1 : 0;
            Cx<S> v = z[1 - c] / z[c];
            const BicubicTable& t = (*tables_)[c];
            S m = t(v.re, v.im);
            return abs2(z[c]) * m * m;
        }
    }
    return S(0.0);
}

template <class S>
S MinkowskiFunction::chart_m2(int chart, const Cx<S>* v) const {
    if (kind_ == Kind::grid) {
        S m = (*tables_)[chart](v[0].re, v[0].im);
        return m * m;
    }
    CVec<S> z;
    for (int i = 0, k = 0; i < n_; ++i) z[i] = (i == chart) ? Cx<S>(1.0) : v[k++];
    return mu2(z);
}

}  // namespace maform
