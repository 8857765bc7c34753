#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "maform/characterization.hpp"
#include "maform/deformation.hpp"
#include "maform/domain_spec.hpp"
#include "maform/foliation.hpp"
#include "maform/moser_normalizer.hpp"
#include "maform/parallel.hpp"

using namespace maform;

namespace {

constexpr const char* kConvention = "d^c = i(dbar - d); dd^c |z|^2 = 4 dx^dy per complex line; Z = E/2";

struct Config {
    std::string domain, tensor, map, out, report;
    bool binary = false;
    std::uint64_t seed = 1;
    int nv = 0, nr = 0, ntheta = 0, rk4 = 0;  // 0: from the spec or the defaults
    int kmax = 8;
    int tensor_points = 12;
    double identity_tol = 1e-8, moser_tol = 1e-6, mode_tol = 1e-6;
    std::vector<double> thetas{1.0, 0.3, 2.2, -1.7, 0.05};
    double k = 0.5;
    int iters = 20;
};

std::string num(double x) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::scientific, 10);
    return std::string(buf, r.ptr);
}

std::string prefixed(const std::string& text, const std::string& prefix) {
    std::ostringstream os;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) os << prefix << line << "\n";
    return os.str();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string base_dir(const std::string& path) {
    auto p = std::filesystem::path(path).parent_path();
    return p.empty() ? "." : p.string();
}

// Resolution after applying command-line overrides to the spec values.
struct Resolution {
    int nv = 32, nr = 4, ntheta = 32, rk4 = 200;
};

Resolution resolve(const Config& c, const DomainSpec* spec) {
    Resolution r;
    if (spec) {
        r.nv = spec->N_v;
        r.nr = spec->N_r;
        r.ntheta = spec->N_theta;
        r.rk4 = spec->rk4_steps;
    } else {
        r.nv = 9;
        r.nr = 3;
    }
    if (c.nv) r.nv = c.nv;
    if (c.nr) r.nr = c.nr;
    if (c.ntheta) r.ntheta = c.ntheta;
    if (c.rk4) r.rk4 = c.rk4;
    if (r.ntheta < 4 || (r.ntheta & (r.ntheta - 1))) throw DomainError("N_theta must be a power of two, at least 4");
    return r;
}

std::string header(const std::string& command, const Config& c, const Resolution& r, const DomainSpec* spec,
                   const std::string& tensor_source) {
    std::ostringstream os;
    os << "# maform " << command << "\n";
    os << "# convention: " << kConvention << "\n";
    os << "# resolution: N_v = " << r.nv << ", N_r = " << r.nr << ", N_theta = " << r.ntheta
       << ", rk4_steps = " << r.rk4 << ", k_max = " << c.kmax << ", tensor_points = " << c.tensor_points << "\n";
    os << "# tolerances: identity_tol = " << num(c.identity_tol) << ", moser_tol = " << num(c.moser_tol)
       << ", mode_tol = " << num(c.mode_tol) << "\n";
    os << "# seed: " << c.seed << "\n";
    if (spec) {
        os << prefixed(spec->canonical(), "# spec: ");
        os << prefixed(spec->source, "# source: ");
    }
    if (!tensor_source.empty()) os << prefixed(tensor_source, "# tensor: ");
    return os.str();
}

void emit(const Config& c, const std::string& text) {
    std::cout << text;
    if (!c.report.empty()) {
        std::ofstream f(c.report, std::ios::binary);
        if (!f) throw DomainError("cannot write report '" + c.report + "'");
        f << text;
    }
}

MoserOptions moser_options(const Config& c, const Resolution& r) {
    MoserOptions o;
    o.rk4_steps = r.rk4;
    o.check_points = r.nv;
    o.seed = c.seed;
    o.tolerance = c.moser_tol;
    return o;
}

std::string moser_block(const MoserReport& r) {
    std::ostringstream os;
    os << "moser.pass = " << (r.pass ? "true" : "false") << "\n";
    os << "moser.min_density = " << num(r.min_density) << "\n";
    os << "moser.endpoint_residual = " << num(r.endpoint_residual) << "\n";
    os << "moser.endpoint_coarse = " << num(r.endpoint_coarse) << "\n";
    os << "moser.endpoint_nodes = " << r.endpoint_nodes << "\n";
    os << "moser.sphere_drift = " << num(r.sphere_drift) << "\n";
    os << "moser.table_error = " << num(r.table_error) << "\n";
    os << "moser.closedness = " << num(r.closedness) << "\n";
    os << "moser.path_dependence = " << num(r.path_dependence) << "\n";
    os << "moser.chart_mismatch = " << num(r.chart_mismatch) << "\n";
    os << "moser.nu_raw = " << num(r.nu_raw) << "\n";
    os << "moser.nu_corrected = " << num(r.nu_corrected) << "\n";
    os << "moser.fiber_linearity = " << num(r.fiber_linearity) << "\n";
    os << "moser.mu_residual = " << num(r.mu_residual) << "\n";
    os << "moser.connection_mismatch = " << num(r.connection_mismatch) << "\n";
    os << "moser.projection = " << num(r.projection) << "\n";
    os << "moser.roundtrip = " << num(r.roundtrip) << "\n";
    for (const auto& f : r.failures) os << "moser.failure = " << f << "\n";
    return os.str();
}

NormalizingMap build_map(const Config& c, const DomainSpec& spec, const Resolution& r) {
    if (spec.n != 2) throw DomainError("normalization requires n = 2");
    if (!spec.circular()) throw DomainError("normalization requires a circular domain (tau.quartic = 0)");
    MinkowskiFunction mu = spec.minkowski(base_dir(c.domain));
    if (!c.map.empty()) return NormalizingMap::from_dump(read_grid_dump(c.map), mu);
    return NormalizingMap::build(make_circular_domain(mu).mu, moser_options(c, r));
}

TensorGrid tensor_grid(const Config& c, const Resolution& r, int n, int charts) {
    TensorGrid g;
    g.n = n;
    g.charts = charts;
    g.base_points = c.tensor_points;
    g.radii.clear();
    for (int i = 1; i <= r.nr; ++i) g.radii.push_back(0.9 * i / r.nr);
    g.angles = r.ntheta;
    return g;
}

bool is_dump(const std::string& text) {
    return text.rfind("# maform grid dump", 0) == 0 || text.rfind("MAFGRID1", 0) == 0;
}

struct Modes {
    ModeSet modes;
    std::string source;  // tensor text for the header
    std::string diagnostics;
    DeformationTensor tensor;
    bool has_tensor = false;
};

// Mode data from --domain (full pipeline), a tensor dump or a synthetic tensor.
Modes load_modes(const Config& c, const DomainSpec* spec, const Resolution& r) {
    Modes m;
    if (spec) {
        NormalizingMap map = build_map(c, *spec, r);
        m.diagnostics = moser_block(map.report());
        m.tensor = extract(map, tensor_grid(c, r, 2, 2));
        m.has_tensor = true;
        m.diagnostics += "extraction.zeta_defect = " + num(m.tensor.zeta_defect()) + "\n";
    } else {
        std::string text = read_file(c.tensor);
        if (is_dump(text)) {
            m.modes = modes_from_dump(read_grid_dump(c.tensor));
            if (m.modes.kmax < c.kmax) throw DomainError("tensor dump holds fewer modes than --kmax");
            m.modes.kmax = c.kmax;
            m.modes.coeff.resize(static_cast<std::size_t>(c.kmax) + 1);
            m.source = "dump " + c.tensor;
            return m;
        }
        SyntheticTensor st = parse_synthetic_tensor(text);
        m.source = text;
        m.tensor = DeformationTensor::sample(tensor_grid(c, r, st.n, st.charts), st.fn(), "synthetic " + c.tensor);
        m.has_tensor = true;
    }
    m.modes = fourier_modes(m.tensor, c.kmax);
    return m;
}

std::string mode_table(const ModeSet& ms) {
    std::ostringstream os;
    os << "modes.ring_deviation = " << num(ms.ring_deviation) << "\n";
    os << "modes.negative_energy = " << num(ms.negative_energy) << "\n";
    os << "modes.tail = " << num(ms.tail) << "\n";
    os << "\n# modes: k sup_norm\n";
    auto n = ms.norms();
    for (std::size_t k = 0; k < n.size(); ++k) os << k << " " << num(n[k]) << "\n";
    return os.str();
}

void write_dump(const Config& c, const GridDump& d) {
    if (c.out.empty()) return;
    write_grid_dump(d, c.out, c.binary);
}

int cmd_verify(const Config& c) {
    DomainSpec spec = read_domain_spec(c.domain);
    Resolution r = resolve(c, &spec);
    VerifyOptions opt;
    opt.atlas.n = spec.n;
    opt.atlas.base_points = r.nv;
    opt.atlas.fiber_radii = r.nr;
    opt.atlas.fiber_angles = r.ntheta;
    opt.seed = c.seed;
    opt.tolerance = c.identity_tol;
    VerifyReport rep = spec.n == 2 ? verify_identities<2>(spec.exhaustion<2>(base_dir(c.domain)), opt)
                                   : verify_identities<3>(spec.exhaustion<3>(base_dir(c.domain)), opt);
    std::ostringstream os;
    os << header("verify", c, r, &spec, "");
    const auto& w = rep.worst;
    os << "pass = " << (rep.pass ? "true" : "false") << "\n";
    os << "nodes = " << rep.nodes << "\n";
    os << "lie_nodes = " << rep.lie_nodes << "\n";
    os << "residual.log_levi = " << num(w.log_levi) << "\n";
    for (std::size_t k = 0; k < w.powers.size(); ++k)
        os << "residual.power_" << k + 1 << " = " << num(w.powers[k]) << "\n";
    os << "residual.monge_ampere = " << num(w.monge_ampere) << "\n";
    os << "residual.z_definition = " << num(w.z_definition) << "\n";
    os << "residual.z_normalization = " << num(w.z_normalization) << "\n";
    os << "residual.kernel = " << num(w.kernel) << "\n";
    os << "residual.tangency = " << num(w.tangency) << "\n";
    os << "residual.lie = " << num(w.lie) << "\n";
    os << "residual.flow_invariance = " << num(w.flow_invariance) << "\n";
    os << "psd_min = " << num(w.psd_min) << "\n";
    os << "condition = " << num(w.condition) << "\n";
    for (const auto& f : rep.failures) os << "failure = " << f << "\n";
    emit(c, os.str());
    return rep.pass ? 0 : 1;
}

int cmd_normalize(const Config& c) {
    DomainSpec spec = read_domain_spec(c.domain);
    Resolution r = resolve(c, &spec);
    NormalizingMap map = build_map(c, spec, r);
    write_dump(c, map.to_dump(r.nv));
    std::ostringstream os;
    os << header("normalize", c, r, &spec, "");
    os << "domain = " << map.mu().describe() << "\n";
    os << moser_block(map.report());
    if (!c.out.empty()) os << "dump = " << c.out << "\n";
    emit(c, os.str());
    return map.report().pass ? 0 : 1;
}

int cmd_invariants(const Config& c) {
    std::unique_ptr<DomainSpec> spec;
    if (!c.domain.empty()) spec = std::make_unique<DomainSpec>(read_domain_spec(c.domain));
    Resolution r = resolve(c, spec.get());
    Modes m = load_modes(c, spec.get(), r);
    write_dump(c, modes_to_dump(m.modes));
    std::ostringstream os;
    os << header("invariants", c, r, spec.get(), m.source);
    os << m.diagnostics;
    if (m.has_tensor) {
        ConditionOptions co;
        co.tolerance = c.mode_tol;
        auto cr = verify_conditions(m.tensor, co);
        os << "condition.symmetry = " << num(cr.symmetry) << "\n";
        os << "condition.bracket = " << num(cr.bracket) << "\n";
        os << "condition.bracket_source = " << (cr.bracket_from_modes ? "modes" : "closed_form") << "\n";
        os << "condition.ring_deviation = " << num(cr.ring_deviation) << "\n";
        os << "condition.operator_norm = " << num(cr.operator_norm) << "\n";
        os << "condition.pass_i = " << (cr.pass_i ? "true" : "false") << "\n";
        os << "condition.pass_ii = " << (cr.pass_ii ? "true" : "false") << "\n";
        os << "condition.pass_iii = " << (cr.pass_iii ? "true" : "false") << "\n";
        os << "condition.pass_iv = " << (cr.pass_iv ? "true" : "false") << "\n";
    }
    os << mode_table(m.modes);
    emit(c, os.str());
    return 0;
}

int cmd_classify(const Config& c) {
    std::unique_ptr<DomainSpec> spec;
    if (!c.domain.empty()) spec = std::make_unique<DomainSpec>(read_domain_spec(c.domain));
    Resolution r = resolve(c, spec.get());
    Modes m = load_modes(c, spec.get(), r);
    auto rep = classify(m.modes, c.mode_tol, c.thetas);
    std::ostringstream os;
    os << header("classify", c, r, spec.get(), m.source);
    os << m.diagnostics;
    os << report_text(rep);
    emit(c, os.str());
    return 0;
}

int cmd_scale_test(const Config& c) {
    std::unique_ptr<DomainSpec> spec;
    if (!c.domain.empty()) spec = std::make_unique<DomainSpec>(read_domain_spec(c.domain));
    Resolution r = resolve(c, spec.get());
    Modes m = load_modes(c, spec.get(), r);
    auto t = scaling_test(m.modes, c.k, c.iters, c.mode_tol);
    std::ostringstream os;
    os << header("scale-test", c, r, spec.get(), m.source);
    os << m.diagnostics;
    os << scaling_text(t);
    emit(c, os.str());
    return 0;
}

void error_block(const std::string& kind, const std::string& where, const std::string& message) {
    std::cout << "[error]\nkind = " << kind << "\n";
    if (!where.empty()) std::cout << "where = " << where << "\n";
    std::cout << "message = " << message << "\n";
    std::cerr << "maform: " << (where.empty() ? "" : where + ": ") << message << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monge-Ampere foliations, Moser normalization and deformation invariants of circular domains"};
    app.require_subcommand(1);
    Config c;
    std::string thetas;

    auto common = [&](CLI::App* s) {
        s->add_option("--seed", c.seed, "Seed for random sample points");
        s->add_option("--nv", c.nv, "Override N_v");
        s->add_option("--nr", c.nr, "Override N_r");
        s->add_option("--ntheta", c.ntheta, "Override N_theta (power of two)");
        s->add_option("--report", c.report, "Also write the report to this file");
    };
    auto tolerances = [&](CLI::App* s) {
        s->add_option("--identity-tol", c.identity_tol)->check(CLI::PositiveNumber);
        s->add_option("--moser-tol", c.moser_tol)->check(CLI::PositiveNumber);
        s->add_option("--mode-tol", c.mode_tol)->check(CLI::PositiveNumber);
    };
    auto tensor_inputs = [&](CLI::App* s) {
        auto* d = s->add_option("--domain", c.domain, "Domain spec file (full pipeline)")->check(CLI::ExistingFile);
        auto* t = s->add_option("--tensor", c.tensor, "Synthetic tensor spec or tensor dump")->check(CLI::ExistingFile);
        d->excludes(t);
        s->add_option("--map", c.map, "Normalizing-map dump to reuse with --domain")->check(CLI::ExistingFile);
        s->add_option("--kmax", c.kmax, "Highest fiber mode")->check(CLI::NonNegativeNumber);
        s->add_option("--tensor-points", c.tensor_points, "Base points per real axis of the tensor grid")
            ->check(CLI::Range(3, 1024));
        s->add_option("--rk4-steps", c.rk4)->check(CLI::PositiveNumber);
    };

    auto* verify = app.add_subcommand("verify", "Check the Monge-Ampere identities of a domain's exhaustion");
    verify->add_option("--domain", c.domain)->required()->check(CLI::ExistingFile);
    common(verify);
    tolerances(verify);

    auto* normalize = app.add_subcommand("normalize", "Build the normalizing map of a circular domain (n = 2)");
    normalize->add_option("--domain", c.domain)->required()->check(CLI::ExistingFile);
    normalize->add_option("--out", c.out, "Normalizing-map dump");
    normalize->add_flag("--binary", c.binary, "Binary dump");
    normalize->add_option("--rk4-steps", c.rk4)->check(CLI::PositiveNumber);
    common(normalize);
    tolerances(normalize);

    auto* invariants = app.add_subcommand("invariants", "Deformation tensor, its fiber modes and conditions");
    tensor_inputs(invariants);
    invariants->add_option("--out", c.out, "Tensor dump");
    invariants->add_flag("--binary", c.binary, "Binary dump");
    common(invariants);
    tolerances(invariants);

    auto* cls = app.add_subcommand("classify", "Circularity, ball and rotational verdicts");
    tensor_inputs(cls);
    cls->add_option("--theta", thetas, "Comma-separated rotation angles (radians)");
    common(cls);
    tolerances(cls);

    auto* scale = app.add_subcommand("scale-test", "Iterated contraction trace with decay fits");
    tensor_inputs(scale);
    scale->add_option("--k", c.k, "Contraction ratio in (0, 1)")->check(CLI::Range(0.0, 1.0));
    scale->add_option("--iters", c.iters, "Iterations")->check(CLI::PositiveNumber);
    common(scale);
    tolerances(scale);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::Error& e) {
        error_block("usage", "", e.what());
        return 2;
    }

    try {
        if (!thetas.empty()) {
            c.thetas.clear();
            std::istringstream in(thetas);
            std::string item;
            while (std::getline(in, item, ',')) {
                Token t{item, 0, 0};
                try {
                    c.thetas.push_back(parse_double(t));
                } catch (const ParseError&) {
                    throw CLI::ValidationError("--theta", "not a number: '" + item + "'");
                }
            }
        }
        for (auto* s : {invariants, cls, scale})
            if (s->parsed() && c.domain.empty() && c.tensor.empty())
                throw CLI::RequiredError("--domain or --tensor");
        if (verify->parsed()) return cmd_verify(c);
        if (normalize->parsed()) return cmd_normalize(c);
        if (invariants->parsed()) return cmd_invariants(c);
        if (cls->parsed()) return cmd_classify(c);
        return cmd_scale_test(c);
    } catch (const CLI::Error& e) {
        error_block("usage", "", e.what());
        return 2;
    } catch (const ParseError& e) {
        std::string msg = e.what();
        auto p = msg.find(": ");
        std::string file = !c.domain.empty() ? c.domain : c.tensor;
        error_block("parse", file + ":" + std::to_string(e.line) + ":" + std::to_string(e.column), msg.substr(p + 2));
        return 2;
    } catch (const NonConvergenceError& e) {
        error_block("nonconvergence", "", e.what());
        return 1;
    } catch (const DomainError& e) {
        error_block("domain", "", e.what());
        return 1;
    } catch (const std::exception& e) {
        error_block("internal", "", e.what());
        return 1;
    }
}
