/// @file test_characterization.cpp
/// Circularity, ball, rotational and scaling tests; special frames.

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "maform/characterization.hpp"

using namespace maform;

namespace {

TensorGrid grid2() {
    TensorGrid g;
    g.n = 2;
    g.charts = 1;
    g.base_points = 5;
    g.extent = 0.5;
    return g;
}

ModeSet modes_of(const std::string& text, int kmax = 4) {
    SyntheticTensor st = parse_synthetic_tensor(text);
    return fourier_modes(DeformationTensor::sample(grid2(), st.fn(), "t"), kmax);
}

IndicatrixField<2> indicatrix(const MinkowskiFunction& mu) {
    return IndicatrixField<2>(ExhaustionField<2>::from_domain(make_circular_domain(mu)));
}

}  // namespace

TEST_CASE("circularity and ball verdicts") {
    auto zero = modes_of("n = 2\n");
    CHECK(is_circular(zero, 1e-8).circular);
    CHECK(is_ball(zero, 1e-8).ball);
    auto c0 = modes_of("n = 2\nterm 0 1 1 0.2 0 v1\n");
    CHECK(is_circular(c0, 1e-8).circular);
    CHECK_FALSE(is_ball(c0, 1e-8).ball);
    auto m1 = modes_of("n = 2\nterm 1 1 1 0.1 0\n");
    CHECK_FALSE(is_circular(m1, 1e-6).circular);
    CHECK(is_circular(m1, 1e-6).sum == doctest::Approx(0.1));
    CHECK(is_circular(m1, 0.2).circular);  // loosening the tolerance never flips pass to fail
}

TEST_CASE("rotational verdict equals circularity for non-resonant angles") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    int checked = 0;
    for (int t = 0; t < 20; ++t) {
        std::ostringstream s;
        s << "n = 2\nterm 0 1 1 " << u(rng) << " " << u(rng) << " v1\n";
        if (t % 2) s << "term " << 1 + t % 4 << " 1 1 " << u(rng) << " " << u(rng) << " vb1\n";
        auto m = modes_of(s.str());
        for (double th : {1.0, 0.3, 2.2, -1.7, 0.05}) {
            auto r = rotational_test(m, th, 1e-8);
            CHECK(r.agrees);
            CHECK(r.invariant == (t % 2 == 0));
            ++checked;
        }
    }
    CHECK(checked == 100);
    auto even = modes_of("n = 2\nterm 2 1 1 0.1 0\n");
    CHECK_THROWS_AS(rotational_test(even, std::acos(-1.0), 1e-8), DomainError);
    auto r = rotational_test(even, 1.0, 1e-8);
    CHECK_FALSE(r.invariant);
    CHECK(r.deduced_norms[1] == doctest::Approx(0.1));
}

TEST_CASE("scaling test recovers k^j decay and the limit phi_0") {
    auto m = modes_of(
        "n = 2\nterm 0 1 1 0.1 0\nterm 1 1 1 0.05 0 v1\nterm 2 1 1 0 0.04\nterm 3 1 1 0.03 0.01 vb1\n", 3);
    auto t = scaling_test(m, 0.5, 20, 1e-6);
    CHECK(t.rows.size() == 21u);
    for (int j = 0; j <= 3; ++j) CHECK(t.slope_error[static_cast<std::size_t>(j)] < 1e-6);
    CHECK(t.rates_match);
    CHECK(t.limit_matches);
    CHECK(t.limit_distance == 0.0);
    CHECK_FALSE(t.contraction_invariant);
    CHECK_FALSE(t.circular);
    CHECK(t.rows[1].norms[2] == doctest::Approx(0.25 * t.rows[0].norms[2]));
    auto flat = scaling_test(modes_of("n = 2\nterm 0 1 1 0.1 0\n", 3), 0.5, 20, 1e-6);
    CHECK(flat.circular);
    CHECK(flat.rows.back().norms[0] == flat.rows.front().norms[0]);
    CHECK_THROWS_AS(scaling_test(m, 1.5, 3, 1e-6), DomainError);
    CHECK(scaling_text(t) == scaling_text(scaling_test(m, 0.5, 20, 1e-6)));
}

TEST_CASE("special frames of the ball and an ellipsoid") {
    auto ball = special_frame(indicatrix(MinkowskiFunction::ball(2)), Eigen::Vector2cd(2.0, 0.0));
    CHECK((ball.e0 - Eigen::Vector2cd(1.0, 0.0)).norm() < 1e-12);
    CHECK((ball.e[0] - Eigen::Vector2cd(0.0, 0.5)).norm() < 1e-12);
    auto ell = special_frame(indicatrix(MinkowskiFunction::ellipsoid({1, 4})), Eigen::Vector2cd(1.0, 0.0));
    CHECK((ell.e[0] - Eigen::Vector2cd(0.0, 0.25)).norm() < 1e-12);

    auto k = indicatrix(MinkowskiFunction::perturbed_ball(0.05));
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (int i = 0; i < 50; ++i) {
        Eigen::Vector2cd d(cplx(g(rng), g(rng)), cplx(g(rng), g(rng)));
        auto f = special_frame(k, d);
        CHECK(std::abs(f.kappa_e0 - 1.0) < 1e-10);
        CHECK(f.gram_error < 1e-8);
        CHECK(f.annihilation < 1e-10);
    }
}

TEST_CASE("classification report text is deterministic and flat") {
    auto m = modes_of("n = 2\nterm 1 1 1 0.1 0\n");
    auto r = classify(m, 1e-6, {1.0, 2.0});
    std::string a = report_text(r), b = report_text(classify(m, 1e-6, {1.0, 2.0}));
    CHECK(a == b);
    CHECK(a.find("circular = false\n") != std::string::npos);
    CHECK(a.find("rotational.agrees = true\n") != std::string::npos);
}
