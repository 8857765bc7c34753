/// @file test_domain_model.cpp
/// Minkowski functions, pseudoconvexity screening, indicatrix and curvature.

#include <doctest.h>

#include <cmath>

#include "maform/domain_model.hpp"

using namespace maform;

namespace {

Eigen::VectorXcd vec2(cplx a, cplx b) {
    Eigen::VectorXcd z(2);
    z << a, b;
    return z;
}

}  // namespace

TEST_CASE("closed-form Minkowski functions") {
    auto z = vec2({0.3, -0.2}, {0.1, 0.5});
    CHECK(MinkowskiFunction::ball(2).mu2(z) == doctest::Approx(z.squaredNorm()).epsilon(1e-15));
    auto e = MinkowskiFunction::ellipsoid({1, 4});
    CHECK(e.mu2(z) == doctest::Approx(std::norm(z(0)) + 4 * std::norm(z(1))).epsilon(1e-15));
    // circular invariance and homogeneity
    auto p = MinkowskiFunction::perturbed_ball(0.05);
    cplx lam = std::polar(0.7, 1.3);
    CHECK(p.mu(lam * z) == doctest::Approx(std::abs(lam) * p.mu(z)).epsilon(1e-14));
    CHECK_THROWS_AS(MinkowskiFunction::ellipsoid({1, -1}), DomainError);
}

TEST_CASE("Levi matrix of |z|^2 is the identity") {
    Eigen::MatrixXd h = 2 * Eigen::MatrixXd::Identity(4, 4);
    CHECK((levi_matrix(h) - Eigen::MatrixXcd::Identity(2, 2)).norm() < 1e-15);
}

TEST_CASE("pseudoconvexity scan locates the breaking perturbation") {
    CHECK_NOTHROW(make_circular_domain(MinkowskiFunction::perturbed_ball(0.05)));
    double prev = 1e9, first_bad = -1;
    for (int i = 1; i <= 60; ++i) {
        double eps = 0.05 * i;
        auto w = check_pseudoconvex(MinkowskiFunction::perturbed_ball(eps));
        if (!w.ok) {
            first_bad = eps;
            break;
        }
        CHECK(w.min_eigenvalue < prev + 1e-12);
        prev = w.min_eigenvalue;
    }
    REQUIRE(first_bad > 0.05);
    CHECK(check_pseudoconvex(MinkowskiFunction::perturbed_ball(first_bad - 0.05)).ok);
    try {
        make_circular_domain(MinkowskiFunction::perturbed_ball(first_bad));
        FAIL("expected rejection");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("min eigenvalue") != std::string::npos);
    }
}

TEST_CASE("indicatrix of a Minkowski exhaustion is mu") {
    auto dom = make_circular_domain(MinkowskiFunction::ellipsoid({1, 4}));
    IndicatrixField<2> k(ExhaustionField<2>::from_domain(dom));
    for (auto w : {vec2(1, 0), vec2({0.2, 0.1}, {-0.7, 0.3}), vec2(0, {0, 2})})
        CHECK(std::abs(k.kappa(w) - dom.mu.mu(w)) < 1e-12);
    auto b = k.boundary_point(vec2(0, 1));
    CHECK(std::abs(b(1) - 0.5) < 1e-12);
}

TEST_CASE("indicatrix ignores a cubic perturbation and rejects non-parabolic growth") {
    ScalarFn<4> cubic([](const auto& x) {
        auto r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
        return r2 + 0.05 * r2 * sqrt(r2);
    });
    IndicatrixField<2> k(ExhaustionField<2>(cubic, 1.0, "cubic"));
    CHECK(std::abs(k.kappa(vec2({0.6, 0}, {0, 0.8})) - 1.0) < 1e-3);
    ScalarFn<4> conic([](const auto& x) { return sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3]); });
    CHECK_THROWS_AS(IndicatrixField<2>(ExhaustionField<2>(conic, 1.0, "conic")), NonConvergenceError);
}

TEST_CASE("curvature of the ball is Fubini-Study and integrals match 4 pi") {
    auto ball = MinkowskiFunction::ball(2);
    for (double x : {0.0, 0.4, -1.1})
        CHECK(std::abs(curvature_density(ball, 1, x, 0.3) - fubini_study_density(x, 0.3)) < 1e-13);
    for (auto mu : {ball, MinkowskiFunction::ellipsoid({1, 4}), MinkowskiFunction::perturbed_ball(0.05)})
        CHECK(std::abs(curvature_integral(mu) - 4 * M_PI) < 1e-6);
}

TEST_CASE("curvature data on the atlas") {
    ChartAtlas atlas;
    atlas.base_points = 33;
    auto cd = curvature(MinkowskiFunction::perturbed_ball(0.05), atlas);
    CHECK(cd.min_density > 0);
    CHECK(cd.closedness == 0.0);
    CHECK(std::abs(cd.integral - cd.reference) < 1e-6);
    CHECK(std::abs(cd.grid_integral - cd.reference) < 5e-2);
    CHECK(cd.horizontal_residual < 1e-14);
}

TEST_CASE("gridded Minkowski functions round-trip through dumps") {
    auto e = MinkowskiFunction::ellipsoid({1, 4});
    auto g = MinkowskiFunction::from_grid_dump(e.to_grid_dump(65, 1.3));
    auto z = vec2({0.3, -0.2}, {0.1, 0.5});
    CHECK(std::abs(g.mu(z) - e.mu(z)) < 1e-5);
    auto w = vec2({0.1, 0.1}, {0.9, 0.2});
    CHECK(std::abs(g.mu(w) - e.mu(w)) < 1e-5);
}

TEST_CASE("blend interpolates Minkowski functions") {
    auto a = MinkowskiFunction::ball(2), b = MinkowskiFunction::ellipsoid({1, 4});
    auto z = vec2({0.3, 0}, {0.4, 0});
    auto m = MinkowskiFunction::blend(a, b, 0.25);
    CHECK(m.mu(z) == doctest::Approx(0.75 * a.mu(z) + 0.25 * b.mu(z)).epsilon(1e-14));
}
