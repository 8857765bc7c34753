#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "maform/domain_model.hpp"
#include "maform/field_kernel.hpp"
#include "maform/scalar_fn.hpp"

namespace maform {

// Value, gradient and Hessian of a ScalarFn at a point whose coordinates may
// themselves be jets (first-order in some outer seeds).
template <class S, int D>
struct LocalDerivs {
    S value;
    std::array<S, D> grad;
    std::array<std::array<S, D>, D> hess;
};

template <class S, int D>
LocalDerivs<S, D> local_derivs(const ScalarFn<D>& f, const std::array<S, D>& x) {
    using T = Jet<Jet<S, D>, D>;
    std::array<T, D> p;
    for (int i = 0; i < D; ++i) {
        p[i].v.v = x[i];
        for (int k = 0; k < D; ++k) {
            p[i].v.d[k] = S(k == i ? 1.0 : 0.0);
            p[i].d[k] = Jet<S, D>(k == i ? 1.0 : 0.0);
        }
    }
    T r = f(p);
    LocalDerivs<S, D> out;
    out.value = r.v.v;
    for (int i = 0; i < D; ++i) {
        out.grad[i] = r.d[i].v;
        for (int j = 0; j < D; ++j) out.hess[i][j] = r.d[i].d[j];
    }
    return out;
}

// Solves a small dense system with partial pivoting on values; generic scalars.
template <class S, int D>
std::array<S, D> solve_small(std::array<std::array<S, D>, D> a, std::array<S, D> b) {
    for (int c = 0; c < D; ++c) {
        int piv = c;
        for (int r = c + 1; r < D; ++r)
            if (std::abs(value_of(a[r][c])) > std::abs(value_of(a[piv][c]))) piv = r;
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        for (int r = c + 1; r < D; ++r) {
            S f = a[r][c] / a[c][c];
            for (int k = c; k < D; ++k) a[r][k] = a[r][k] - f * a[c][k];
            b[r] = b[r] - f * b[c];
        }
    }
    std::array<S, D> x;
    for (int r = D - 1; r >= 0; --r) {
        S s = b[r];
        for (int k = r + 1; k < D; ++k) s = s - a[r][k] * x[k];
        x[r] = s / a[r][r];
    }
    return x;
}

// ddc tau as a matrix Omega_ab = ddc tau(e_a, e_b) for the standard structure:
// Omega = J^T H - H J.
template <class S, int D>
std::array<std::array<S, D>, D> levi_two_form(const std::array<std::array<S, D>, D>& h) {
    std::array<std::array<S, D>, D> om;
    // (J^T H)_{ab} = sum_c J_{ca} H_{cb}; J e_{2k} = e_{2k+1}, J e_{2k+1} = -e_{2k}
    auto jth = [&](int a, int b) -> S { return (a % 2 == 0) ? h[a + 1][b] : -h[a - 1][b]; };
    auto hj = [&](int a, int b) -> S { return (b % 2 == 0) ? h[a][b + 1] : -h[a][b - 1]; };
    for (int a = 0; a < D; ++a)
        for (int b = 0; b < D; ++b) om[a][b] = jth(a, b) - hj(a, b);
    return om;
}

template <class S, int D>
std::array<S, D> apply_j(const std::array<S, D>& x) {
    std::array<S, D> r;
    for (int k = 0; k + 1 < D; k += 2) {
        r[k] = -x[k + 1];
        r[k + 1] = x[k];
    }
    return r;
}

// Z from ddc tau(Z, JX) = dtau(X): (J^T Omega^T) Z = grad tau.
template <class S, int D>
std::array<S, D> z_field(const ScalarFn<D>& tau, const std::array<S, D>& x) {
    auto ld = local_derivs<S, D>(tau, x);
    auto om = levi_two_form<S, D>(ld.hess);
    std::array<std::array<S, D>, D> a;
    // (J^T Omega^T)_{ab} = sum_c J_{ca} Omega_{bc}
    for (int i = 0; i < D; ++i)
        for (int b = 0; b < D; ++b) a[i][b] = (i % 2 == 0) ? om[b][i + 1] : -om[b][i - 1];
    return solve_small<S, D>(a, ld.grad);
}

struct FoliationFrame {
    Eigen::VectorXd z, jz;
    Eigen::MatrixXd horizontal;  // D x 2(N-1), orthonormal columns
    double condition = 0;
    double j_invariance = 0;     // max residual of J H in H
};

struct IdentityResiduals {
    double log_levi = 0;         // tau^2 ddc log tau = tau ddc tau - dtau ^ dc tau
    std::vector<double> powers;  // k = 1..n-1
    double monge_ampere = 0;     // tau (ddc tau)^n = n dtau ^ dc tau ^ (ddc tau)^(n-1)
    double z_definition = 0;     // ddc tau(Z, JX) = X(tau)
    double z_normalization = 0;  // max(|ddc tau(Z, JZ) - tau|, |dtau(Z) - tau|)
    double kernel = 0;           // |iota_Z ddc log tau|, |iota_JZ ddc log tau|
    double psd_min = 0;          // min eigenvalue of ddc log tau(X, JX) on H (normalized)
    double tangency = 0;         // |dtau(X)| on H
    double lie = -1;             // L_Z ddc tau - ddc tau (negative when not evaluated)
    double flow_invariance = -1;
    double condition = 0;

    void absorb(const IdentityResiduals& o);
};

template <int N>
class Foliation {
public:
    static constexpr int D = 2 * N;
    using Point = std::array<double, D>;

    explicit Foliation(ExhaustionField<N> tau) : tau_(std::move(tau)) {}

    const ExhaustionField<N>& exhaustion() const { return tau_; }

    // Any holomorphic real coordinates: the ambient z or a blow-up chart.
    static FoliationFrame compute_frame(const ScalarFn<D>& f, const Point& x);
    static IdentityResiduals identities(const ScalarFn<D>& f, const Point& x);
    // Richardson-extrapolated symmetric difference of the Z-flow pullback.
    static double lie_residual(const ScalarFn<D>& f, const Point& x, double step, double* flow_inv = nullptr);
    // MA residual from a local gridded block: 5^D samples with spacing h.
    static double gridded_monge_ampere(const ScalarFn<D>& f, const Point& x, double h);

private:
    ExhaustionField<N> tau_;
};

struct VerifyOptions {
    ChartAtlas atlas;
    int lie_samples = 32;
    double lie_step = 1e-3;
    std::uint64_t seed = 1;
    double tolerance = 1e-8;
    int max_base_points_high_dim = 7;  // per axis cap for n = 3
};

struct VerifyReport {
    IdentityResiduals worst;
    std::size_t nodes = 0;
    std::size_t lie_nodes = 0;
    bool pass = false;
    std::vector<std::string> failures;
};

template <int N>
VerifyReport verify_identities(const ExhaustionField<N>& tau, const VerifyOptions& opt);

struct LeafDisc {
    int chart = 0;
    Eigen::VectorXcd v;
    std::vector<double> radii;
    int angles = 0;
    std::vector<Eigen::VectorXcd> points;  // [k * angles + j] = p(r_k e^{i theta_j})
    double tau_residual = 0;               // max |tau(p) - r^2|
    double direction_residual = 0;         // max |p / |p| - w / |w|| for the radial ray (diagnostic)

    const Eigen::VectorXcd& at(int k, int j) const { return points[static_cast<std::size_t>(k) * angles + j]; }
};

struct LeafOptions {
    double start_radius = 1e-3;
    int steps_per_unit = 400;
};

template <int N>
LeafDisc trace_leaf(const ExhaustionField<N>& tau, const IndicatrixField<N>& kappa, int chart,
                    const Eigen::VectorXcd& v, const std::vector<double>& radii, int angles,
                    const LeafOptions& opt = {});

// Radial leaf ODE dp/drho = 2 rho Z(p) / tau(p) between two radii (either direction).
template <int N>
Eigen::VectorXcd leaf_flow(const ExhaustionField<N>& tau, const Eigen::VectorXcd& p0, double rho0, double rho1,
                           int steps);

// Z at an ambient point as the coefficients of its (1,0) part: Z_x + i Z_y per coordinate.
template <int N>
Eigen::VectorXcd z_holomorphic(const ExhaustionField<N>& tau, const Eigen::VectorXcd& z);

}  // namespace maform
