/// @file test_field_kernel.cpp
/// Exterior algebra, gridded forms, charts and dumps.

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "maform/field_kernel.hpp"

using namespace maform;

namespace {

Eigen::VectorXcd random_vec(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(-1, 1);
    Eigen::VectorXcd v(n);
    for (int i = 0; i < n; ++i) v(i) = cplx(u(rng), u(rng));
    return v;
}

PointForm random_form(std::mt19937_64& rng, int dim, int deg) {
    std::uniform_real_distribution<double> u(-1, 1);
    PointForm f(dim, deg);
    for (unsigned m = 0; m < (1u << dim); ++m)
        if (__builtin_popcount(m) == deg) f[m] = cplx(u(rng), u(rng));
    return f;
}

}  // namespace

// ---------------------------------------------------------------- pointwise algebra

TEST_CASE("wedge is graded commutative and associative") {
    std::mt19937_64 rng(7);
    auto a = random_form(rng, 5, 1), b = random_form(rng, 5, 2), c = random_form(rng, 5, 1);
    CHECK((a.wedge(b) - b.wedge(a)).max_abs() < 1e-14);
    CHECK((a.wedge(c) + c.wedge(a)).max_abs() < 1e-14);
    CHECK((a.wedge(b).wedge(c) - a.wedge(b.wedge(c))).max_abs() < 1e-14);
    CHECK(a.wedge(a).max_abs() < 1e-15);
}

TEST_CASE("interior product is an antiderivation") {
    std::mt19937_64 rng(11);
    auto a = random_form(rng, 4, 1), b = random_form(rng, 4, 2);
    Eigen::VectorXcd x = random_vec(rng, 4);
    PointForm lhs = a.wedge(b).interior(x);
    PointForm rhs = a.interior(x).wedge(b) - a.wedge(b.interior(x));
    CHECK((lhs - rhs).max_abs() < 1e-14);
}

TEST_CASE("evaluate agrees with interior products and pullback") {
    std::mt19937_64 rng(3);
    auto w = random_form(rng, 4, 2);
    Eigen::VectorXcd x = random_vec(rng, 4), y = random_vec(rng, 4);
    cplx direct = w.evaluate({x, y});
    cplx via = w.interior(x).interior(y)[0];
    CHECK(std::abs(direct - via) < 1e-14);
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Random(4, 4);
    CHECK(std::abs(w.pullback(a).evaluate({x, y}) - w.evaluate({a * x, a * y})) < 1e-13);
    Eigen::MatrixXcd m = w.as_matrix();
    CHECK(std::abs((x.transpose() * m * y)(0, 0) - direct) < 1e-14);
}

TEST_CASE("top-degree pullback is multiplication by the determinant") {
    PointForm vol(3, 3);
    vol[7u] = 1.0;
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Random(3, 3);
    CHECK(std::abs(vol.pullback(a)[7u] - a.determinant()) < 1e-13);
}

// ---------------------------------------------------------------- gridded operators

TEST_CASE("ddc of |z|^2 on C is 4 dx^dy") {
    RegularGrid g = RegularGrid::cube(2, 9, -1, 1);
    auto f = FormField::sample_function(g, [](const Eigen::VectorXd& p) { return cplx(p.squaredNorm()); });
    FormField w = f.dc().exterior_d();
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(w.at(i)[3u] - 4.0) < 1e-12);
}

TEST_CASE("dc on functions is -df o J") {
    RegularGrid g = RegularGrid::cube(2, 7, -1, 1);
    auto f = FormField::sample_function(g, [](const Eigen::VectorXd& p) { return cplx(p(0) * p(0) + 3 * p(1)); });
    FormField a = f.dc();
    for (std::size_t i = 0; i < g.size(); ++i) {
        Eigen::VectorXd p = g.point(i);
        // f_x dy - f_y dx
        CHECK(std::abs(a.at(i)[2u] - 2 * p(0)) < 1e-12);
        CHECK(std::abs(a.at(i)[1u] + 3.0) < 1e-12);
    }
}

TEST_CASE("d squared vanishes on polynomial data") {
    RegularGrid g = RegularGrid::cube(3, 6, -1, 1);
    auto f = FormField::sample_function(g, [](const Eigen::VectorXd& p) {
        return cplx(p(0) * p(1) + p(2) * p(2) - 2 * p(0) * p(2), p(1) * p(1));
    });
    CHECK(f.exterior_d().exterior_d().max_abs() < 1e-11);
}

TEST_CASE("exterior_d is second order") {
    auto err = [](int pts) {
        RegularGrid g = RegularGrid::cube(2, pts, 0, 1);
        auto f = FormField::sample_function(g, [](const Eigen::VectorXd& p) { return cplx(std::sin(3 * p(0) + p(1))); });
        FormField df = f.exterior_d();
        double e = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            Eigen::VectorXd p = g.point(i);
            e = std::max(e, std::abs(df.at(i)[1u] - 3 * std::cos(3 * p(0) + p(1))));
        }
        return e;
    };
    double r = err(17) / err(33);
    CHECK(r > 3.5);
    CHECK(r < 4.5);
}

TEST_CASE("dc with a non-standard structure matches the pointwise definition") {
    RegularGrid g = RegularGrid::cube(2, 5, -1, 1);
    Eigen::MatrixXd j(2, 2);
    j << 0, -2, 0.5, 0;  // j^2 = -1
    auto f = FormField::sample_function(g, [](const Eigen::VectorXd& p) { return cplx(p(0) + 4 * p(1)); });
    FormField a = f.dc([j](const Eigen::VectorXd&) { return j; });
    // dc f = -df o J : components -(df J)
    Eigen::RowVector2d df(1, 4);
    Eigen::RowVector2d expect = -df * j;
    CHECK(std::abs(a.at(7)[1u] - expect(0)) < 1e-12);
    CHECK(std::abs(a.at(7)[2u] - expect(1)) < 1e-12);
}

// ---------------------------------------------------------------- charts

TEST_CASE("blow-up coordinates invert and charts transition") {
    Eigen::VectorXcd z(3);
    z << cplx(0.3, 0.1), cplx(-0.9, 0.4), cplx(0.2, 0.2);
    int c = ChartAtlas::chart_of(z);
    CHECK(c == 1);
    Eigen::VectorXcd v;
    cplx zeta;
    ChartAtlas::to_blowup(z, c, v, zeta);
    CHECK((ChartAtlas::to_ambient(c, v, zeta) - z).norm() < 1e-15);
    CHECK(v.cwiseAbs().maxCoeff() <= 1.0);
    Eigen::VectorXcd w(1);
    w(0) = cplx(0.7, -0.4);
    Eigen::VectorXcd u = ChartAtlas::transition(0, 1, w);
    CHECK(std::abs(u(0) - 1.0 / w(0)) < 1e-15);
}

TEST_CASE("overlap weights form a partition of unity with chart support") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 200; ++t) {
        Eigen::VectorXcd z = random_vec(rng, t % 2 ? 2 : 3);
        double s = 0;
        for (int c = 0; c < z.size(); ++c) {
            double w = ChartAtlas::overlap_weight(c, z);
            CHECK(w >= 0);
            if (w > 0) CHECK(z.cwiseAbs().maxCoeff() / std::abs(z(c)) < 1.25);
            s += w;
        }
        CHECK(std::abs(s - 1) < 1e-14);
    }
}

TEST_CASE("Fubini-Study form is chart consistent and integrates to 4 pi") {
    ChartAtlas atlas;
    atlas.base_points = 65;
    RegularGrid g = atlas.base_grid();
    std::vector<FormField> om;
    for (int c = 0; c < 2; ++c) {
        auto f = FormField::sample_function(g, [](const Eigen::VectorXd& p) { return cplx(std::log1p(p.squaredNorm())); }, c);
        om.push_back(f.dc().exterior_d());
    }
    double h = g.spacing[0];
    CHECK(chart_consistency(om[0], om[1]) < 10 * h * h);
    double total = 0;
    for (int c = 0; c < 2; ++c)
        total += om[c].integrate([c](const Eigen::VectorXd& p) {
                          Eigen::VectorXcd v(1);
                          v(0) = cplx(p(0), p(1));
                          return ChartAtlas::overlap_weight(c, ChartAtlas::section(c, v));
                      }).real();
    CHECK(std::abs(total - 4 * M_PI) < 1e-2);
}

TEST_CASE("atlas validation") {
    ChartAtlas a;
    a.fiber_angles = 24;
    CHECK_THROWS(a.validate());
    a.fiber_angles = 32;
    a.extent = 1.0;
    CHECK_THROWS(a.validate());
}

// ---------------------------------------------------------------- dumps

TEST_CASE("grid dumps round-trip bit-exactly in text and binary") {
    GridDump d;
    auto& r = d.add("psi", 1, {3, 4});
    for (std::size_t i = 0; i < r.values.size(); ++i) r.values[i] = cplx(std::sqrt(i + 0.1), -1.0 / (i + 3));
    d.add("scalar", 0, {1}).values[0] = cplx(M_PI, 1e-300);
    for (bool bin : {false, true}) {
        std::string path = std::string("dump_test.") + (bin ? "bin" : "txt");
        write_grid_dump(d, path, bin);
        GridDump e = read_grid_dump(path);
        REQUIRE(e.records.size() == 2);
        CHECK(e.records[0].shape == std::vector<int>{3, 4});
        CHECK(e.records[0].chart == 1);
        for (std::size_t i = 0; i < r.values.size(); ++i) CHECK(e.records[0].values[i] == r.values[i]);
        CHECK(e.records[1].values[0] == d.records[1].values[0]);
        std::remove(path.c_str());
    }
}

TEST_CASE("malformed dumps are rejected") {
    CHECK_THROWS(parse_grid_dump_text("record a chart 0 shape 2\n1 2\nend\n"));
    CHECK_THROWS(parse_grid_dump_text("rec a chart 0 shape 1\n1 2\nend\n"));
}
