/// @file test_deformation.cpp
/// Deformation tensors: extraction, reconstruction, modes and the four conditions.

#include <doctest.h>

#include <cmath>

#include "maform/deformation.hpp"
#include "maform/moser_normalizer.hpp"

using namespace maform;

namespace {

TensorGrid small_grid(int n, int charts = 1) {
    TensorGrid g;
    g.n = n;
    g.charts = charts;
    g.base_points = n == 2 ? 9 : 5;
    g.extent = 0.5;
    return g;
}

// Phi = (I + v conj(v)^T)(S + eps A) with S symmetric and A antisymmetric.
TensorFn symmetric_tensor(double eps) {
    return [eps](int, const Eigen::VectorXcd& v, cplx zeta) {
        Eigen::Matrix2cd s;
        s << cplx(0.1, 0.05), cplx(-0.05, 0.02), cplx(-0.05, 0.02), cplx(0.08, 0);
        Eigen::Matrix2cd a;
        a << 0, 1, -1, 0;
        Eigen::MatrixXcd p = Eigen::MatrixXcd::Identity(2, 2) + v * v.adjoint();
        return Eigen::MatrixXcd(p * (s + eps * a) * (1.0 + 0.0 * zeta));
    };
}

MoserOptions fast() {
    MoserOptions o;
    o.check_points = 16;
    o.samples = 40;
    return o;
}

}  // namespace

TEST_CASE("horizontal metric has the closed form I - conj(v) v^T / s") {
    Eigen::VectorXcd v(2);
    v << cplx(0.3, -0.2), cplx(0.1, 0.4);
    Eigen::MatrixXcd g = horizontal_metric(v, cplx(0.5, 0.2));
    double s = 1.0 + v.squaredNorm();
    Eigen::MatrixXcd ref = Eigen::MatrixXcd::Identity(2, 2) - v.conjugate() * v.transpose() / s;
    CHECK((g - ref).norm() < 1e-14);
}

TEST_CASE("extraction inverts reconstruction pointwise") {
    Eigen::VectorXcd v(2);
    v << cplx(0.3, -0.2), cplx(0.1, 0.4);
    cplx z(0.4, -0.3);
    Eigen::MatrixXcd phi(2, 2);
    phi << cplx(0.1, 0.2), cplx(-0.05, 0.1), cplx(0.2, 0), cplx(0.0, -0.15);
    Eigen::MatrixXd j = structure_from_tensor(phi, v, z);
    CHECK((j * j + Eigen::MatrixXd::Identity(6, 6)).norm() < 1e-12);
    ExtractionDiagnostics d;
    CHECK((tensor_from_structure(j, v, z, &d) - phi).norm() < 1e-12);
    CHECK(d.zeta_defect < 1e-12);
    CHECK(tensor_from_structure(standard_complex_structure(6), v, z).norm() < 1e-12);
}

TEST_CASE("operator norm at least one is rejected by reconstruction") {
    SyntheticTensor st = parse_synthetic_tensor("n = 2\nterm 0 1 1 1.5 0\n");
    Eigen::VectorXcd v(1);
    v << cplx(0.1, 0.1);
    CHECK_THROWS_AS(reconstruct(st.fn(), 2)(0, v, 0.5), DomainError);
}

TEST_CASE("Fourier modes recover a band-limited synthetic tensor") {
    SyntheticTensor st = parse_synthetic_tensor(
        "n = 3\n"
        "term 0 1 1 0.1 0.0\n"
        "term 1 1 2 0.05 -0.02 v1 vb2\n"
        "term 2 2 1 0.0 0.03 w^2 vb1^2\n");
    auto t = DeformationTensor::sample(small_grid(3), st.fn(), "synthetic");
    auto ms = fourier_modes(t, 4);
    CHECK(ms.ring_deviation < 1e-12);
    CHECK(ms.negative_energy < 1e-12);
    CHECK(ms.tail < 1e-12);
    CHECK(ms.norm(3) < 1e-12);
    CHECK(ms.norm(4) < 1e-12);
    CHECK(ms.norm(0) == doctest::Approx(0.1));
    CHECK(ms.norm(1) > 0.0);
    auto back = modes_from_dump(parse_grid_dump_text(grid_dump_text(modes_to_dump(ms))));
    for (int k = 0; k <= 4; ++k) CHECK(back.norm(k) == doctest::Approx(ms.norm(k)));
    auto r = tensor_from_modes(ms, "re");
    CHECK(std::abs(r.max_norm() - t.max_norm()) < 1e-12);
}

TEST_CASE("rotation and contraction act on modes by e^{ik theta} and k^j") {
    SyntheticTensor st = parse_synthetic_tensor("n = 2\nterm 1 1 1 0.2 0\nterm 2 1 1 0 0.1 v1\n");
    TensorGrid g = small_grid(2);
    auto ms = fourier_modes(DeformationTensor::sample(g, st.fn(), "s"), 3);
    auto rot = fourier_modes(DeformationTensor::sample(g, rotate(st.fn(), 0.7), "r"), 3);
    auto con = fourier_modes(DeformationTensor::sample(g, contract(st.fn(), 0.5), "c"), 3);
    auto rm = rotate(ms, 0.7), cm = contract(ms, 0.5);
    for (int k = 0; k <= 3; ++k)
        for (std::size_t i = 0; i < g.nodes(); ++i) {
            CHECK((rot.coeff[k][i] - rm.coeff[k][i]).norm() < 1e-12);
            CHECK((con.coeff[k][i] - cm.coeff[k][i]).norm() < 1e-12);
        }
    CHECK(cm.norm(2) == doctest::Approx(0.25 * ms.norm(2)));
}

TEST_CASE("symmetric synthetic tensor passes (i); antisymmetric injection measures eps") {
    TensorGrid g = small_grid(3);
    auto sym = verify_conditions(DeformationTensor::sample(g, symmetric_tensor(0.0), "sym"));
    CHECK(sym.symmetry < 1e-12);
    CHECK(sym.pass_i);
    CHECK(sym.pass_iii);
    CHECK(sym.pass_iv);
    auto bad = verify_conditions(DeformationTensor::sample(g, symmetric_tensor(1e-3), "skew"));
    CHECK(bad.symmetry == doctest::Approx(1e-3).epsilon(1e-6));
    CHECK_FALSE(bad.pass_i);
}

TEST_CASE("an exact solution of the bracket equation passes (ii)") {
    // phi^1_1 = a, phi^1_2 = c (v1 - a conj v1)^2
    SyntheticTensor st = parse_synthetic_tensor(
        "n = 3\n"
        "term 0 1 1 0.3 0\n"
        "term 0 1 2 0.2 0 v1^2\n"
        "term 0 1 2 -0.12 0 v1 vb1\n"
        "term 0 1 2 0.018 0 vb1^2\n");
    TensorGrid g = small_grid(3);
    auto t = DeformationTensor::sample(g, st.fn(), "exact");
    auto rep = verify_conditions(t);
    CHECK(rep.bracket < 1e-6);
    CHECK(rep.pass_ii);
    auto modes = verify_mode_equations(t, 1);
    CHECK(modes.consistency >= 0.0);
    CHECK(modes.consistency < 1e-6);
    for (double r : modes.residual) CHECK(r < 1e-6);

    SyntheticTensor off = parse_synthetic_tensor("n = 3\nterm 0 1 2 0.2 0 vb1\n");
    auto rep2 = verify_conditions(DeformationTensor::sample(g, off.fn(), "dbar"));
    CHECK(rep2.bracket == doctest::Approx(0.2).epsilon(1e-6));
    CHECK_FALSE(rep2.pass_ii);
}

TEST_CASE("mode equations agree with the brute-force bracket") {
    SyntheticTensor st = parse_synthetic_tensor(
        "n = 3\n"
        "term 0 1 2 0.1 0.05 vb2\n"
        "term 1 2 1 0.07 0 v1\n"
        "term 1 1 1 0.05 -0.02 w vb1\n");
    auto t = DeformationTensor::sample(small_grid(3), st.fn(), "generic");
    auto rep = verify_mode_equations(t, 1);
    CHECK(rep.full > 1e-3);
    CHECK(rep.consistency < 1e-6);
    CHECK(rep.residual.size() == 3u);
}

TEST_CASE("reconstructed structures of n = 2 tensors are integrable") {
    SyntheticTensor st = parse_synthetic_tensor("n = 2\nterm 1 1 1 0.3 0\n");
    StructureFn j = reconstruct(st.fn(), 2);
    Eigen::VectorXcd v(1);
    v << cplx(0.2, -0.1);
    CHECK(nijenhuis_residual(j, 2, 0, v, cplx(0.4, 0.3), 1e-3) < 1e-6);
    auto t = extract(j, small_grid(2), "roundtrip");
    auto ref = DeformationTensor::sample(small_grid(2), st.fn(), "ref");
    double diff = 0;
    for (int r = 0; r < 3; ++r)
        for (int a = 0; a < 16; ++a)
            for (std::size_t node = 0; node < t.grid().nodes(); ++node)
                diff = std::max(diff, (t.at(0, node, r, a) - ref.at(0, node, r, a)).norm());
    CHECK(diff < 1e-8);
}

TEST_CASE("synthetic chart 1 follows the frame transition") {
    SyntheticTensor st = parse_synthetic_tensor("n = 2\ncharts = 2\nterm 1 1 1 0.3 0\n");
    Eigen::VectorXcd u(1);
    u << cplx(0.5, 0.4);
    cplx zp(0.3, -0.1);
    Eigen::VectorXcd v(1);
    v << 1.0 / u(0);
    cplx ref = 0.3 * zp * u(0) * u(0) * u(0) / std::conj(u(0) * u(0));
    CHECK(std::abs(st.fn()(1, u, zp)(0, 0) - ref) < 1e-14);
    CHECK_THROWS_AS(st.fn()(2, u, zp), DomainError);
}

TEST_CASE("the ball has vanishing tensor") {
    auto m = NormalizingMap::build(MinkowskiFunction::ball(2), fast());
    TensorGrid g = small_grid(2, 2);
    auto t = extract(m, g);
    CHECK(t.max_norm() < 1e-12);
    CHECK(t.zeta_defect() < 1e-12);
}

TEST_CASE("a circular perturbation has a fiber-constant tensor") {
    auto m = NormalizingMap::build(MinkowskiFunction::perturbed_ball(0.1), fast());
    TensorGrid g = small_grid(2, 2);
    auto t = extract(m, g);
    auto ms = fourier_modes(t, 3);
    CHECK(ms.norm(0) > 1e-4);
    for (int k = 1; k <= 3; ++k) CHECK(ms.norm(k) < 1e-5);
    auto rep = verify_conditions(t);
    CHECK(rep.pass_i);
    CHECK(rep.pass_iii);
    CHECK(rep.pass_iv);
    Eigen::VectorXcd v(1);
    v << cplx(0.3, 0.2);
    CHECK(nijenhuis_residual(structure_from_map(m), 2, 0, v, cplx(0.4, 0.1), 1e-3) < 1e-6);
}

TEST_CASE("synthetic parse errors carry line and column") {
    auto msg = [](const std::string& s) {
        try {
            parse_synthetic_tensor(s);
        } catch (const ParseError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(msg("n = 3\nterm 0 1 3 1 0\n") == "2:10: index b out of range 1..2");
    CHECK(msg("n = 3\nterm 0 1 1 1 0 q2\n").rfind("2:16:", 0) == 0);
    CHECK(msg("n = x\n").rfind("1:5:", 0) == 0);
    CHECK(msg("bogus = 1\n").rfind("1:1:", 0) == 0);
    CHECK(msg("term 0 1 1 1 0\nn = 3\n").rfind("2:1:", 0) == 0);
}
