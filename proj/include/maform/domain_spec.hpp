#pragma once

#include <string>
#include <vector>

#include "maform/domain_model.hpp"
#include "maform/text_spec.hpp"

namespace maform {

// Text domain description:
//   n = 2                     complex dimension (2 or 3)
//   mu.kind = ellipsoid       ball | ellipsoid | perturbed_ball | grid
//   a = 1, b = 4, c = 1       ellipsoid weights
//   eps = 0.05                perturbed_ball amplitude
//   q.re12, q.im12, q.quartic, q.diff
//   mu.file = m.dump          grid dump of m_c (grid kind), relative to the spec file
//   tau.quartic = 0           tau = mu^2 + tau.quartic |z_n|^4 (verification only)
//   N_v, N_r, N_theta, rk4_steps
struct DomainSpec {
    int n = 2;
    std::string kind = "ball";
    std::vector<double> weights{1.0, 1.0, 1.0};
    double eps = 0.0;
    QCoefficients q;
    std::string mu_file;
    double tau_quartic = 0.0;
    int N_v = 32;
    int N_r = 4;
    int N_theta = 32;
    int rk4_steps = 200;
    std::string source;  // text as read

    // Builds mu; grid kinds read mu_file relative to base_dir.
    MinkowskiFunction minkowski(const std::string& base_dir = ".") const;
    bool circular() const { return tau_quartic == 0.0; }
    // Exhaustion tau on C^N including the tau.quartic term.
    template <int N>
    ExhaustionField<N> exhaustion(const std::string& base_dir = ".") const;
    // Canonical key = value listing of the parsed values (round-trip exact).
    std::string canonical() const;
};

DomainSpec parse_domain_spec(const std::string& text);
DomainSpec read_domain_spec(const std::string& path);

template <int N>
ExhaustionField<N> DomainSpec::exhaustion(const std::string& base_dir) const {
    if (n != N) throw DomainError("domain spec dimension mismatch");
    auto field = ExhaustionField<N>::from_domain(make_circular_domain(minkowski(base_dir)));
    if (circular()) return field;
    ScalarFn<2 * N> base = field.tau();
    double c = tau_quartic;
    ScalarFn<2 * N> tau([base, c](const auto& x) {
        auto r = x[2 * N - 2] * x[2 * N - 2] + x[2 * N - 1] * x[2 * N - 1];
        return base(x) + c * r * r;
    });
    return ExhaustionField<N>(tau, field.range_bound(), field.label() + " + " + std::to_string(c) + " |z_n|^4");
}

}  // namespace maform
