#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "maform/deformation.hpp"
#include "maform/domain_model.hpp"
#include "maform/scalar_fn.hpp"

namespace maform {

struct CircularityVerdict {
    bool circular = false;
    double sum = 0;  // sum_{k >= 1} sup |phi_k|
    double tolerance = 0;
};

struct BallVerdict {
    bool ball = false;
    double sum = 0;  // sum_{k >= 0} sup |phi_k|
    double tolerance = 0;
};

CircularityVerdict is_circular(const ModeSet& modes, double tol);
BallVerdict is_ball(const ModeSet& modes, double tol);

struct RotationalVerdict {
    double theta = 0;
    bool invariant = false;
    double raw_difference = 0;          // sup over k of sup |rotate(phi)_k - phi_k|
    std::vector<double> deduced_norms;  // |Delta_k| / |1 - e^{ik theta}|, k = 1..kmax
    double deduced_sum = 0;
    bool agrees = false;  // invariant == is_circular verdict
};

// Smallest |1 - e^{ik theta}| over k = 1..kmax.
double resonance_gap(double theta, int kmax);
// Throws DomainError when e^{ik theta} = 1 (within 1e-9) for some 1 <= k <= kmax.
RotationalVerdict rotational_test(const ModeSet& modes, double theta, double tol);

struct ScalingRow {
    int iteration = 0;
    std::vector<double> norms;  // per mode
    double distance_to_phi0 = 0;  // sum_{j >= 1} of norms
};

struct ScalingTrace {
    double k = 0;
    int iterations = 0;
    double tolerance = 0;
    std::vector<ScalingRow> rows;            // iteration 0..iterations
    std::vector<double> slope;               // fitted log-decay per iteration, per mode (NaN: mode absent)
    std::vector<double> slope_error;         // |slope_j - j log k|
    double limit_distance = 0;               // sup |lim phi - phi_0| in mode space
    double invariance = 0;                   // sum_k sup |contract(phi)_k - phi_k|
    bool rates_match = false;
    bool limit_matches = false;
    bool contraction_invariant = false;
    bool circular = false;  // the whole chain: rates, limit and invariance under the contraction
};

ScalingTrace scaling_test(const ModeSet& modes, double k, int iterations, double tol);

struct SpecialFrame {
    Eigen::VectorXcd e0;
    std::vector<Eigen::VectorXcd> e;
    double kappa_e0 = 0;
    double gram_error = 0;    // max |4 h(e_a, e_b) - delta_ab|
    double annihilation = 0;  // max |d kappa^2 (e_a)|, |d kappa^2 (J e_a)|
};

// Frame from kappa^2 given in real coordinates (x1, y1, ...); e0 = direction / kappa(direction).
template <int N>
SpecialFrame special_frame(const ScalarFn<2 * N>& kappa2, const Eigen::VectorXcd& direction);

template <int N>
SpecialFrame special_frame(const IndicatrixField<N>& kappa, const Eigen::VectorXcd& direction) {
    return special_frame<N>(kappa.kappa2_fn(), direction);
}

struct ClassificationReport {
    std::string label;
    int kmax = 0;
    double tolerance = 0;
    std::vector<double> norms;
    CircularityVerdict circularity;
    BallVerdict ball;
    std::vector<RotationalVerdict> rotational;
    bool has_scaling = false;
    ScalingTrace scaling;
};

ClassificationReport classify(const ModeSet& modes, double tol, const std::vector<double>& thetas);
// Flat key = value block followed by per-mode tables.
std::string report_text(const ClassificationReport& report);
std::string scaling_text(const ScalingTrace& trace);

// ---------------------------------------------------------------- templates

template <int N>
SpecialFrame special_frame(const ScalarFn<2 * N>& kappa2, const Eigen::VectorXcd& direction) {
    constexpr int D = 2 * N;
    if (direction.size() != N) throw DomainError("special_frame: direction has the wrong dimension");
    auto at = [&](const Eigen::VectorXcd& w) {
        std::array<double, D> x;
        for (int i = 0; i < N; ++i) {
            x[2 * i] = w(i).real();
            x[2 * i + 1] = w(i).imag();
        }
        return second_derivs<D>(kappa2, x);
    };
    double k2 = at(direction).value;
    if (!(k2 > 0)) throw DomainError("special_frame: kappa vanishes along the direction");
    SpecialFrame f;
    f.e0 = direction / std::sqrt(k2);
    auto d = at(f.e0);
    f.kappa_e0 = std::sqrt(d.value);
    Eigen::VectorXcd dz(N);  // d kappa^2 / dz_j
    for (int i = 0; i < N; ++i) dz(i) = 0.5 * cplx(d.grad(2 * i), -d.grad(2 * i + 1));
    Eigen::MatrixXcd h = levi_matrix(d.hess);
    cplx de0 = dz.dot(f.e0.conjugate());
    if (std::abs(de0) < 1e-14) throw DomainError("special_frame: d kappa^2 degenerate at e0");
    auto dk = [&](const Eigen::VectorXcd& w) { return cplx(dz.transpose() * w); };
    auto hf = [&](const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) { return cplx(a.transpose() * h * b.conjugate()); };
    for (int i = 0; i < N && static_cast<int>(f.e.size()) < N - 1; ++i) {
        Eigen::VectorXcd w = Eigen::VectorXcd::Unit(N, i);
        w -= (dk(w) / de0) * f.e0;
        for (const auto& u : f.e) w -= 4.0 * hf(w, u) * u;
        double nrm = 4.0 * hf(w, w).real();
        if (w.norm() < 1e-8) continue;
        if (!(nrm > 1e-12 * w.squaredNorm())) throw DomainError("special_frame: degenerate Levi form at e0");
        f.e.push_back(w / std::sqrt(nrm));
    }
    for (std::size_t a = 0; a < f.e.size(); ++a) {
        f.annihilation = std::max(f.annihilation, 2.0 * std::abs(dk(f.e[a])));
        for (std::size_t b = 0; b < f.e.size(); ++b)
            f.gram_error = std::max(f.gram_error, std::abs(4.0 * hf(f.e[a], f.e[b]) - (a == b ? 1.0 : 0.0)));
    }
    return f;
}

}  // namespace maform
