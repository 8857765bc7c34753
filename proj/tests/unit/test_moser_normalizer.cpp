/// @file test_moser_normalizer.cpp
/// Moser flow on CP^1, fiber-linear normalizing map and its contract checks.

#include <doctest.h>

#include <cmath>

#include "maform/moser_normalizer.hpp"

using namespace maform;

namespace {

MoserOptions fast() {
    MoserOptions o;
    o.check_points = 16;
    o.samples = 40;
    return o;
}

}  // namespace

TEST_CASE("the ball is normalized by the identity") {
    auto m = NormalizingMap::build(MinkowskiFunction::ball(2), fast());
    CHECK(m.report().pass);
    Eigen::Vector2cd z(cplx(0.3, 0.1), cplx(-0.2, 0.4));
    CHECK((m.forward(z) - z).norm() < 1e-12);
    CHECK(std::abs(m.psi(0, cplx(0.5, -0.7)) - cplx(0.5, -0.7)) < 1e-12);
}

TEST_CASE("ellipsoid: psi halves the chart coordinate and phi is circle equivariant") {
    auto m = NormalizingMap::build(MinkowskiFunction::ellipsoid({1, 4}), fast());
    INFO(m.report().failures.size());
    CHECK(m.report().pass);
    int t = -1;
    CHECK(std::abs(m.psi(0, cplx(0.3, -0.4), &t) - cplx(0.15, -0.2)) < 1e-8);
    CHECK(t == 0);
    Eigen::Vector2cd z(cplx(0.2, 0.1), cplx(0.1, -0.3));
    cplx rot = std::polar(1.0, 0.7);
    CHECK((m.forward(rot * z) - rot * m.forward(z)).norm() < 1e-12);
    CHECK(m.report().mu_residual < 1e-7);
    CHECK(m.report().connection_mismatch < 1e-6);
}

TEST_CASE("Moser endpoint residual is small and refines") {
    MoserField f(MinkowskiFunction::perturbed_ball(0.1));
    double fine = moser_endpoint_residual(f, 200, 16);
    double coarse = moser_endpoint_residual(f, 20, 16);
    CHECK(fine < 1e-6);
    CHECK(coarse > fine);
    MoserField e(MinkowskiFunction::ellipsoid({1, 4}));
    int nodes = 0;
    CHECK(moser_endpoint_residual(e, 200, 16, &nodes) < 1e-6);
    CHECK(nodes > 0);
}

TEST_CASE("connection discrepancy agrees with the pullback integral") {
    auto mu = MinkowskiFunction::perturbed_ball(0.2, {1.0, 0.5, -0.3, 0.2});
    auto m = NormalizingMap::build(mu, fast());
    for (cplx v : {cplx(0.3, -0.2), cplx(-0.6, 0.5)}) {
        auto direct = m.nu(0, v, false);
        auto pulled = nu_by_pullback(m.field(), 0, v, 200);
        CHECK(std::abs(direct[0] - pulled[0]) < 1e-6);
        CHECK(std::abs(direct[1] - pulled[1]) < 1e-6);
        auto fixed = m.nu(0, v, true);
        CHECK(std::hypot(fixed[0], fixed[1]) < 1e-6);
    }
}

TEST_CASE("the five-point Poisson potential converges at second order") {
    MoserField f(MinkowskiFunction::perturbed_ball(0.1));
    auto a = poisson_potential_check(f, 17);
    auto b = poisson_potential_check(f, 33);
    CHECK(b.max_error < a.max_error);
    CHECK(a.max_error / b.max_error > 3.0);
}

TEST_CASE("contract checks hold for a non-symmetric perturbation") {
    auto mu = MinkowskiFunction::perturbed_ball(0.2, {1.0, 0.5, -0.3, 0.2});
    auto m = NormalizingMap::build(mu, fast());
    const auto& r = m.report();
    CHECK(r.pass);
    CHECK(r.mu_residual < 1e-7);
    CHECK(r.connection_mismatch < 1e-6);
    CHECK(r.fiber_linearity < 1e-10);
    CHECK(r.roundtrip < 1e-8);
    CHECK(r.sphere_drift < 1e-8);
    CHECK(r.projection < 1e-7);
    CHECK(r.nu_raw < 1e-6);
    Eigen::Vector2cd w(cplx(0.1, 0.2), cplx(-0.35, 0.05));
    CHECK((m.forward(m.inverse(w)) - w).norm() < 1e-9);
}

TEST_CASE("psi deviates from the identity linearly in the perturbation") {
    cplx v(0.4, -0.3);
    std::vector<double> dev;
    for (double d : {0.04, 0.02, 0.01}) {
        auto m = NormalizingMap::build(MinkowskiFunction::perturbed_ball(d, {1.0, 0.5, -0.3, 0.2}), fast());
        dev.push_back(std::abs(m.psi(0, v) - v));
    }
    CHECK(dev[0] / dev[1] == doctest::Approx(2.0).epsilon(0.05));
    CHECK(dev[1] / dev[2] == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("normalizing-map dump round trip") {
    auto mu = MinkowskiFunction::perturbed_ball(0.1);
    auto m = NormalizingMap::build(mu, fast());
    auto d = m.to_dump(9);
    auto back = NormalizingMap::from_dump(parse_grid_dump_text(grid_dump_text(d)), mu);
    CHECK(back.report().pass == m.report().pass);
    CHECK(back.report().endpoint_residual == doctest::Approx(m.report().endpoint_residual));
    Eigen::Vector2cd z(cplx(0.3, 0.1), cplx(-0.2, 0.4));
    CHECK((back.forward(z) - m.forward(z)).norm() < 1e-12);
    CHECK(d.find("psi_hat", 1)->values.size() == 9u * 9 * 2);
}

TEST_CASE("Moser normalization requires two dimensions") {
    CHECK_THROWS_AS(MoserField(MinkowskiFunction::ball(3)), DomainError);
}
