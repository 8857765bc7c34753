// Acceptance criteria: one line per criterion. Exit status is nonzero when a criterion fails
// that is not listed as a known failure in README.md.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "maform/characterization.hpp"
#include "maform/deformation.hpp"
#include "maform/domain_spec.hpp"
#include "maform/foliation.hpp"
#include "maform/moser_normalizer.hpp"

using namespace maform;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3e", x);
    return b;
}

ExhaustionField<2> exhaustion(const MinkowskiFunction& mu) {
    return ExhaustionField<2>::from_domain(make_circular_domain(mu));
}

MoserOptions moser(int check_points) {
    MoserOptions o;
    o.check_points = check_points;
    o.rk4_steps = 200;
    return o;
}

// 1. Ball identity suite at N_v = 64, tolerance 1e-10, runtime < 10 s.
Outcome ball_identities() {
    auto t0 = std::chrono::steady_clock::now();
    VerifyOptions opt;
    opt.atlas.base_points = 64;
    opt.tolerance = 1e-10;
    auto rep = verify_identities<2>(exhaustion(MinkowskiFunction::ball(2)), opt);
    double t = seconds_since(t0);
    const auto& w = rep.worst;
    double worst = std::max({w.log_levi, w.powers.empty() ? 0.0 : w.powers[0], w.monge_ampere, w.z_definition,
                             w.z_normalization, w.lie});
    return {rep.pass && worst < 1e-10 && t < 10.0, "max residual " + fmt(worst) + ", " + fmt(t) + " s"};
}

// 2. Ellipsoid: analytic MA residual < 1e-8, gridded residual ratio >= 3.5 when h halves, < 1 min.
Outcome ellipsoid_ma() {
    auto t0 = std::chrono::steady_clock::now();
    auto tau = exhaustion(MinkowskiFunction::ellipsoid({1, 4}));
    VerifyOptions opt;
    opt.atlas.base_points = 32;
    opt.tolerance = 1e-8;
    auto rep = verify_identities<2>(tau, opt);
    std::array<double, 4> x{0.31, -0.12, 0.27, 0.18};
    double g1 = Foliation<2>::gridded_monge_ampere(tau.tau(), x, 0.02);
    double g2 = Foliation<2>::gridded_monge_ampere(tau.tau(), x, 0.01);
    double ratio = g1 / g2;
    double t = seconds_since(t0);
    bool ok = rep.worst.monge_ampere < 1e-8 && ratio >= 3.5 && t < 60.0;
    return {ok, "analytic " + fmt(rep.worst.monge_ampere) + ", gridded " + fmt(g1) + " -> " + fmt(g2) + " (ratio " +
                    fmt(ratio) + "), " + fmt(t) + " s"};
}

// 3. Curvature integral equals the Fubini-Study integral 4 pi within 1e-6.
Outcome cohomology() {
    double worst = 0;
    for (const auto& mu : {MinkowskiFunction::ball(2), MinkowskiFunction::ellipsoid({1, 4}),
                           MinkowskiFunction::perturbed_ball(0.05)})
        worst = std::max(worst, std::abs(curvature_integral(mu) - 4.0 * kPi));
    return {worst < 1e-6, "max |integral - 4 pi| " + fmt(worst)};
}

// 4. Moser endpoint for the ellipsoid at N_v = 64, 200 steps; refinement in the step count.
Outcome moser_endpoint() {
    MoserField f(MinkowskiFunction::ellipsoid({1, 4}));
    double fine = moser_endpoint_residual(f, 200, 64);
    double coarse = moser_endpoint_residual(f, 100, 64);
    double coarser = moser_endpoint_residual(f, 50, 64);
    bool ok = fine < 1e-6 && fine < coarse && coarse < coarser;
    return {ok, "50/100/200 steps: " + fmt(coarser) + " / " + fmt(coarse) + " / " + fmt(fine)};
}

// 5. Normalizing-map contract: mu residual < 1e-7 and corrected connection mismatch < 1e-6.
Outcome lemma_contract() {
    double mu_res = 0, nu = 0, mismatch = 0;
    for (const auto& mu : {MinkowskiFunction::ellipsoid({1, 4}), MinkowskiFunction::perturbed_ball(0.05)}) {
        auto m = NormalizingMap::build(mu, moser(32));
        mu_res = std::max(mu_res, m.report().mu_residual);
        nu = std::max(nu, m.report().nu_corrected);
        mismatch = std::max(mismatch, m.report().connection_mismatch);
    }
    return {mu_res < 1e-7 && nu < 1e-6 && mismatch < 1e-6,
            "mu " + fmt(mu_res) + ", nu_corrected " + fmt(nu) + ", connection " + fmt(mismatch)};
}

// 6. Full pipeline on circular inputs: sum of k >= 1 mode norms < 1e-5; the ball has phi_0 < 1e-8.
Outcome circular_pipeline() {
    TensorGrid g;
    g.base_points = 12;
    g.radii = {0.3, 0.6, 0.9};
    g.angles = 32;
    double worst = 0, ball0 = 0;
    for (const auto& mu : {MinkowskiFunction::ball(2), MinkowskiFunction::ellipsoid({1, 4}),
                           MinkowskiFunction::perturbed_ball(0.05)}) {
        auto m = NormalizingMap::build(mu, moser(32));
        auto ms = fourier_modes(extract(m, g), 8);
        worst = std::max(worst, is_circular(ms, 1e-5).sum);
        if (mu.kind() == MinkowskiFunction::Kind::ball) ball0 = ms.norm(0);
    }
    return {worst < 1e-5 && ball0 < 1e-8, "max sum_{k>=1} " + fmt(worst) + ", ball phi_0 " + fmt(ball0)};
}

std::vector<SyntheticTensor> band_limited_n2() {
    std::vector<std::string> texts = {
        "n = 2\nterm 0 1 1 0.2 0.1\n",
        "n = 2\nterm 1 1 1 0.3 0\n",
        "n = 2\nterm 0 1 1 0.1 0 v1\nterm 2 1 1 0 0.2\n",
        "n = 2\nterm 1 1 1 0.15 -0.05 vb1 w\nterm 3 1 1 0.1 0.1\n",
        "n = 2\nterm 0 1 1 0.05 0 v1 vb1\nterm 1 1 1 0 0.1 w^2\nterm 2 1 1 0.1 0 v1^2 w\n",
    };
    std::vector<SyntheticTensor> out;
    for (const auto& t : texts) out.push_back(parse_synthetic_tensor(t));
    return out;
}

// 7. extract(reconstruct(phi)) = phi and reconstruct(extract(J)) = J within 1e-8.
Outcome round_trips() {
    TensorGrid g;
    g.charts = 1;
    g.base_points = 7;
    g.extent = 0.6;
    g.angles = 16;
    double phi_err = 0, j_err = 0, ring = 0, norm = 0;
    for (const auto& st : band_limited_n2()) {
        auto ref = DeformationTensor::sample(g, st.fn(), "ref");
        auto c = verify_conditions(ref);
        ring = std::max(ring, c.ring_deviation);
        norm = std::max(norm, c.operator_norm);
        StructureFn j = reconstruct(st.fn(), 2);
        auto back = extract(j, g, "back");
        for (std::size_t node = 0; node < g.nodes(); ++node)
            for (int r = 0; r < static_cast<int>(g.radii.size()); ++r)
                for (int a = 0; a < g.angles; ++a) {
                    phi_err = std::max(phi_err, (back.at(0, node, r, a) - ref.at(0, node, r, a)).cwiseAbs().maxCoeff());
                    Eigen::VectorXcd v = g.base_point(node);
                    cplx z = back.zeta(r, a);
                    Eigen::MatrixXd j2 = structure_from_tensor(back.at(0, node, r, a), v, z);
                    j_err = std::max(j_err, (j2 - j(0, v, z)).cwiseAbs().maxCoeff());
                }
    }
    bool ok = phi_err < 1e-8 && j_err < 1e-8 && ring < 1e-6 && norm < 1.0;
    return {ok, "phi " + fmt(phi_err) + ", J " + fmt(j_err) + " (ring deviation " + fmt(ring) + ", norm " + fmt(norm) +
                    ")"};
}

// 8. n = 3: symmetric mode-0 tensor passes (i) < 1e-8; antisymmetric injection measured within 5%;
//    per-mode residuals rebuild the full (ii) residual within 1e-6.
Outcome n3_conditions() {
    TensorGrid g;
    g.n = 3;
    g.charts = 1;
    g.base_points = 5;
    g.extent = 0.5;
    auto tensor = [](double eps) {
        return [eps](int, const Eigen::VectorXcd& v, cplx) {
            Eigen::Matrix2cd s, a;
            s << cplx(0.1, 0.05), cplx(-0.05, 0.02), cplx(-0.05, 0.02), cplx(0.08, 0);
            a << 0, 1, -1, 0;
            Eigen::MatrixXcd p = Eigen::MatrixXcd::Identity(2, 2) + v * v.adjoint();
            return Eigen::MatrixXcd(p * (s + eps * a));
        };
    };
    double eps = 1e-3;
    auto sym = verify_conditions(DeformationTensor::sample(g, tensor(0.0), "sym"));
    auto skew = verify_conditions(DeformationTensor::sample(g, tensor(eps), "skew"));
    double rel = std::abs(skew.symmetry - eps) / eps;
    SyntheticTensor generic = parse_synthetic_tensor(
        "n = 3\nterm 0 1 2 0.1 0.05 vb2\nterm 1 2 1 0.07 0 v1\nterm 1 1 1 0.05 -0.02 w vb1\n");
    auto modes = verify_mode_equations(DeformationTensor::sample(g, generic.fn(), "generic"), 1);
    bool ok = sym.symmetry < 1e-8 && !skew.pass_i && rel < 0.05 && modes.consistency >= 0 &&
              modes.consistency < 1e-6;
    return {ok, "symmetric " + fmt(sym.symmetry) + ", injected " + fmt(eps) + " measured " + fmt(skew.symmetry) +
                    ", mode reconstruction " + fmt(modes.consistency) + " of |R| " + fmt(modes.full)};
}

ModeSet random_modes(std::mt19937_64& rng, bool circular) {
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    std::uniform_int_distribution<int> mode(1, 4);
    std::ostringstream s;
    s << "n = 2\nterm 0 1 1 " << u(rng) << " " << u(rng) << " v1\n";
    if (!circular) s << "term " << mode(rng) << " 1 1 " << u(rng) << " " << u(rng) << " vb1 w\n";
    TensorGrid g;
    g.charts = 1;
    g.base_points = 5;
    g.extent = 0.5;
    auto st = parse_synthetic_tensor(s.str());
    return fourier_modes(DeformationTensor::sample(g, st.fn(), "random"), 4);
}

// 9. Rotational verdict equals circularity on 20 random tensors and 5 non-resonant angles.
Outcome rotational() {
    std::mt19937_64 rng(2024);
    int agree = 0, total = 0;
    for (int i = 0; i < 20; ++i) {
        auto m = random_modes(rng, i % 2 == 0);
        for (double th : {1.0, 0.3, 2.2, -1.7, 0.05}) {
            auto r = rotational_test(m, th, 1e-8);
            agree += r.agrees && r.invariant == (i % 2 == 0);
            ++total;
        }
    }
    return {agree == total, std::to_string(agree) + " / " + std::to_string(total) + " agree"};
}

// 10. Scaling trace at k = 0.5, 20 iterations: slope error < 1e-6, limit = phi_0 exactly, < 5 s.
Outcome scaling() {
    auto t0 = std::chrono::steady_clock::now();
    TensorGrid g;
    g.charts = 1;
    g.base_points = 9;
    g.extent = 0.5;
    auto st = parse_synthetic_tensor(
        "n = 2\nterm 0 1 1 0.1 0\nterm 1 1 1 0.05 0 v1\nterm 2 1 1 0 0.04\nterm 3 1 1 0.03 0.01 vb1\n");
    auto ms = fourier_modes(DeformationTensor::sample(g, st.fn(), "scaling"), 3);
    auto t = scaling_test(ms, 0.5, 20, 1e-6);
    double worst = 0;
    for (double e : t.slope_error) worst = std::max(worst, e);
    double secs = seconds_since(t0);
    bool ok = t.rates_match && worst < 1e-6 && t.limit_distance == 0.0 && secs < 5.0;
    return {ok, "slope error " + fmt(worst) + ", limit distance " + fmt(t.limit_distance) + ", " + fmt(secs) + " s"};
}

std::string run(const std::string& cmd) {
    std::string out;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return out;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
    pclose(p);
    return out;
}

// 11. Two CLI runs with identical config and seed give byte-identical reports.
Outcome determinism(const std::string& cli, const std::string& data) {
    if (cli.empty()) return {false, "no CLI path given"};
    std::vector<std::string> cmds = {
        cli + " verify --domain " + data + "/ellipsoid.dom --nv 16 --seed 5",
        cli + " classify --domain " + data + "/perturbed.dom --nv 16 --kmax 4 --seed 5",
        cli + " scale-test --tensor " + data + "/synth.tns --k 0.5 --iters 20",
    };
    int same = 0;
    for (const auto& c : cmds) {
        std::string a = run(c), b = run("MAFORM_THREADS=1 " + c);
        same += !a.empty() && a == b;
    }
    return {same == static_cast<int>(cmds.size()),
            std::to_string(same) + " / " + std::to_string(cmds.size()) + " reports identical"};
}

}  // namespace

int main(int argc, char** argv) {
    std::string cli = argc > 1 ? argv[1] : "";
    std::string data = argc > 2 ? argv[2] : "data";
    const std::set<int> known = {2};
    std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"ball identity suite", ball_identities},
        {"ellipsoid Monge-Ampere verification", ellipsoid_ma},
        {"cohomology invariance", cohomology},
        {"Moser endpoint", moser_endpoint},
        {"normalizing-map contract", lemma_contract},
        {"circular pipeline has no fiber modes", circular_pipeline},
        {"deformation round trips", round_trips},
        {"n = 3 symmetry and mode equations", n3_conditions},
        {"rotational verdict equals circularity", rotational},
        {"scaling mechanism", scaling},
        {"CLI determinism", [&] { return determinism(cli, data); }},
    };
    int unexpected = 0, id = 0;
    for (auto& [name, fn] : criteria) {
        ++id;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        bool is_known = known.count(id) > 0;
        std::cout << "criterion " << id << " [" << name << "]: " << (o.pass ? "PASS" : "FAIL")
                  << (!o.pass && is_known ? " (known)" : "") << "; " << o.detail << std::endl;
        if (!o.pass && !is_known) ++unexpected;
    }
    return unexpected ? 1 : 0;
}
