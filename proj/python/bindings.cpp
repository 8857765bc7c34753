#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "maform/characterization.hpp"
#include "maform/deformation.hpp"
#include "maform/domain_spec.hpp"
#include "maform/foliation.hpp"
#include "maform/moser_normalizer.hpp"

namespace py = pybind11;
using namespace maform;

namespace {

py::dict moser_dict(const MoserReport& r) {
    py::dict d;
    d["pass"] = r.pass;
    d["min_density"] = r.min_density;
    d["endpoint_residual"] = r.endpoint_residual;
    d["table_error"] = r.table_error;
    d["closedness"] = r.closedness;
    d["nu_raw"] = r.nu_raw;
    d["nu_corrected"] = r.nu_corrected;
    d["fiber_linearity"] = r.fiber_linearity;
    d["mu_residual"] = r.mu_residual;
    d["connection_mismatch"] = r.connection_mismatch;
    d["roundtrip"] = r.roundtrip;
    d["failures"] = r.failures;
    return d;
}

py::dict verify_dict(const VerifyReport& r) {
    py::dict d;
    d["pass"] = r.pass;
    d["nodes"] = r.nodes;
    d["log_levi"] = r.worst.log_levi;
    d["powers"] = r.worst.powers;
    d["monge_ampere"] = r.worst.monge_ampere;
    d["z_definition"] = r.worst.z_definition;
    d["z_normalization"] = r.worst.z_normalization;
    d["kernel"] = r.worst.kernel;
    d["lie"] = r.worst.lie;
    d["failures"] = r.failures;
    return d;
}

TensorGrid make_grid(int n, int charts, int base_points, double extent, std::vector<double> radii, int angles) {
    TensorGrid g;
    g.n = n;
    g.charts = charts;
    g.base_points = base_points;
    g.extent = extent;
    g.radii = std::move(radii);
    g.angles = angles;
    g.validate();
    return g;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Monge-Ampere foliations, Moser normalization and deformation invariants";

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

    py::class_<MinkowskiFunction>(m, "MinkowskiFunction")
        .def_static("ball", &MinkowskiFunction::ball, py::arg("n") = 2)
        .def_static("ellipsoid", &MinkowskiFunction::ellipsoid, py::arg("weights"))
        .def_static("perturbed_ball",
                    [](double eps, double re12, double im12, double quartic, double diff) {
                        return MinkowskiFunction::perturbed_ball(eps, QCoefficients{re12, im12, quartic, diff});
                    },
                    py::arg("eps"), py::arg("re12") = 1.0, py::arg("im12") = 0.0, py::arg("quartic") = 1.0,
                    py::arg("diff") = 0.0)
        .def_property_readonly("n", &MinkowskiFunction::n)
        .def("describe", &MinkowskiFunction::describe)
        .def("mu", &MinkowskiFunction::mu, py::arg("z"))
        .def("__repr__", &MinkowskiFunction::describe);

    m.def("curvature_integral", &curvature_integral, py::arg("mu"), py::arg("radial_nodes") = 48,
          py::arg("angular_nodes") = 96);

    m.def(
        "verify_identities",
        [](const MinkowskiFunction& mu, int base_points, double tolerance, std::uint64_t seed) {
            VerifyOptions opt;
            opt.atlas.n = mu.n();
            opt.atlas.base_points = base_points;
            opt.tolerance = tolerance;
            opt.seed = seed;
            auto dom = make_circular_domain(mu);
            VerifyReport r;
            {
                py::gil_scoped_release release;
                r = mu.n() == 2 ? verify_identities<2>(ExhaustionField<2>::from_domain(dom), opt)
                                : verify_identities<3>(ExhaustionField<3>::from_domain(dom), opt);
            }
            return verify_dict(r);
        },
        py::arg("mu"), py::arg("base_points") = 16, py::arg("tolerance") = 1e-8, py::arg("seed") = 1);

    m.def("parse_domain_spec", [](const std::string& text) {
        DomainSpec s = parse_domain_spec(text);
        return py::make_tuple(s.minkowski(), s.canonical());
    });

    py::class_<NormalizingMap>(m, "NormalizingMap")
        .def_static(
            "build",
            [](const MinkowskiFunction& mu, int check_points, int rk4_steps, std::uint64_t seed) {
                MoserOptions o;
                o.check_points = check_points;
                o.rk4_steps = rk4_steps;
                o.seed = seed;
                py::gil_scoped_release release;
                return NormalizingMap::build(mu, o);
            },
            py::arg("mu"), py::arg("check_points") = 32, py::arg("rk4_steps") = 200, py::arg("seed") = 1)
        .def_property_readonly("report", [](const NormalizingMap& n) { return moser_dict(n.report()); })
        .def("forward", &NormalizingMap::forward, py::arg("z"))
        .def("inverse", &NormalizingMap::inverse, py::arg("w"))
        .def("psi", [](const NormalizingMap& n, int chart, cplx v) { return n.psi(chart, v); }, py::arg("chart"),
             py::arg("v"));

    py::class_<ModeSet>(m, "ModeSet")
        .def_readonly("kmax", &ModeSet::kmax)
        .def_readonly("ring_deviation", &ModeSet::ring_deviation)
        .def_readonly("tail", &ModeSet::tail)
        .def("norm", &ModeSet::norm, py::arg("k"))
        .def("norms", &ModeSet::norms);

    py::class_<SyntheticTensor>(m, "SyntheticTensor")
        .def_readonly("n", &SyntheticTensor::n)
        .def_readonly("charts", &SyntheticTensor::charts)
        .def("__call__", [](const SyntheticTensor& s, int chart, const Eigen::VectorXcd& v,
                            cplx zeta) { return s.fn()(chart, v, zeta); });
    m.def("parse_synthetic_tensor", &parse_synthetic_tensor, py::arg("text"));

    m.def(
        "synthetic_modes",
        [](const SyntheticTensor& st, int kmax, int base_points, double extent, std::vector<double> radii,
           int angles) {
            auto g = make_grid(st.n, st.charts, base_points, extent, std::move(radii), angles);
            return fourier_modes(DeformationTensor::sample(g, st.fn(), "synthetic"), kmax);
        },
        py::arg("tensor"), py::arg("kmax") = 4, py::arg("base_points") = 7, py::arg("extent") = 0.5,
        py::arg("radii") = std::vector<double>{0.3, 0.6, 0.9}, py::arg("angles") = 16);

    m.def(
        "map_modes",
        [](const NormalizingMap& map, int kmax, int base_points, std::vector<double> radii, int angles) {
            auto g = make_grid(2, 2, base_points, 1.0, std::move(radii), angles);
            py::gil_scoped_release release;
            return fourier_modes(extract(map, g), kmax);
        },
        py::arg("map"), py::arg("kmax") = 4, py::arg("base_points") = 8,
        py::arg("radii") = std::vector<double>{0.3, 0.6, 0.9}, py::arg("angles") = 16);

    m.def(
        "verify_conditions",
        [](const SyntheticTensor& st, int base_points, double extent, double tolerance) {
            auto g = make_grid(st.n, st.charts, base_points, extent, {0.3, 0.6, 0.9}, 16);
            ConditionOptions o;
            o.tolerance = tolerance;
            auto r = verify_conditions(DeformationTensor::sample(g, st.fn(), "synthetic"), o);
            py::dict d;
            d["symmetry"] = r.symmetry;
            d["bracket"] = r.bracket;
            d["ring_deviation"] = r.ring_deviation;
            d["operator_norm"] = r.operator_norm;
            d["pass_i"] = r.pass_i;
            d["pass_ii"] = r.pass_ii;
            d["pass_iii"] = r.pass_iii;
            d["pass_iv"] = r.pass_iv;
            return d;
        },
        py::arg("tensor"), py::arg("base_points") = 5, py::arg("extent") = 0.5, py::arg("tolerance") = 1e-6);

    m.def("is_circular", [](const ModeSet& ms, double tol) { return is_circular(ms, tol).circular; });
    m.def("is_ball", [](const ModeSet& ms, double tol) { return is_ball(ms, tol).ball; });
    m.def("rotational_test", [](const ModeSet& ms, double theta, double tol) {
        auto r = rotational_test(ms, theta, tol);
        py::dict d;
        d["invariant"] = r.invariant;
        d["agrees"] = r.agrees;
        d["raw_difference"] = r.raw_difference;
        d["deduced_norms"] = r.deduced_norms;
        return d;
    });
    m.def("scaling_test", [](const ModeSet& ms, double k, int iterations, double tol) {
        auto t = scaling_test(ms, k, iterations, tol);
        py::dict d;
        d["slope"] = t.slope;
        d["slope_error"] = t.slope_error;
        d["limit_distance"] = t.limit_distance;
        d["rates_match"] = t.rates_match;
        d["circular"] = t.circular;
        d["text"] = scaling_text(t);
        return d;
    });
    m.def(
        "classify",
        [](const ModeSet& ms, double tol, std::vector<double> thetas) {
            return report_text(classify(ms, tol, thetas));
        },
        py::arg("modes"), py::arg("tol") = 1e-6, py::arg("thetas") = std::vector<double>{1.0, 0.3});
    m.def(
        "special_frame",
        [](const MinkowskiFunction& mu, const Eigen::Vector2cd& direction) {
            IndicatrixField<2> k(ExhaustionField<2>::from_domain(make_circular_domain(mu)));
            auto f = special_frame(k, direction);
            return py::make_tuple(f.e0, f.e, f.gram_error);
        },
        py::arg("mu"), py::arg("direction"));
}
