#include "maform/characterization.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace maform {

namespace {

double mode_sup(const std::vector<Eigen::MatrixXcd>& a, const std::vector<Eigen::MatrixXcd>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).cwiseAbs().maxCoeff());
    return m;
}

std::string num(double x) {
    std::ostringstream os;
    os << std::setprecision(10) << std::scientific << x;
    return os.str();
}

const char* yn(bool b) { return b ? "true" : "false"; }

}  // namespace

CircularityVerdict is_circular(const ModeSet& modes, double tol) {
    CircularityVerdict v;
    v.tolerance = tol;
    for (int k = 1; k <= modes.kmax; ++k) v.sum += modes.norm(k);
    v.circular = v.sum < tol;
    return v;
}

BallVerdict is_ball(const ModeSet& modes, double tol) {
    BallVerdict v;
    v.tolerance = tol;
    for (int k = 0; k <= modes.kmax; ++k) v.sum += modes.norm(k);
    v.ball = v.sum < tol;
    return v;
}

double resonance_gap(double theta, int kmax) {
    double g = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= kmax; ++k) g = std::min(g, std::abs(1.0 - std::polar(1.0, k * theta)));
    return g;
}

RotationalVerdict rotational_test(const ModeSet& modes, double theta, double tol) {
    for (int k = 1; k <= modes.kmax; ++k)
        if (std::abs(1.0 - std::polar(1.0, k * theta)) < 1e-9)
            throw DomainError("rotational_test: resonant angle, e^{ik theta} = 1 at k = " + std::to_string(k));
    RotationalVerdict r;
    r.theta = theta;
    ModeSet rot = rotate(modes, theta);
    for (int k = 1; k <= modes.kmax; ++k) {
        double d = mode_sup(rot.coeff[static_cast<std::size_t>(k)], modes.coeff[static_cast<std::size_t>(k)]);
        r.raw_difference = std::max(r.raw_difference, d);
        double q = d / std::abs(1.0 - std::polar(1.0, k * theta));
        r.deduced_norms.push_back(q);
        r.deduced_sum += q;
    }
    r.invariant = r.deduced_sum < tol;
    r.agrees = r.invariant == is_circular(modes, tol).circular;
    return r;
}

ScalingTrace scaling_test(const ModeSet& modes, double k, int iterations, double tol) {
    if (!(k > 0.0 && k < 1.0)) throw DomainError("scaling_test: ratio k must lie in (0, 1)");
    if (iterations < 1) throw DomainError("scaling_test: at least one iteration is required");
    ScalingTrace t;
    t.k = k;
    t.iterations = iterations;
    t.tolerance = tol;
    ModeSet cur = modes;
    for (int it = 0; it <= iterations; ++it) {
        ScalingRow row;
        row.iteration = it;
        row.norms = cur.norms();
        for (int j = 1; j <= cur.kmax; ++j) row.distance_to_phi0 += row.norms[static_cast<std::size_t>(j)];
        t.rows.push_back(row);
        if (it < iterations) cur = contract(cur, k);
    }
    t.rates_match = true;
    double floor = 1e-280;
    for (int j = 0; j <= modes.kmax; ++j) {
        // least-squares slope of log |phi_j| over the iterations
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int cnt = 0;
        for (const auto& row : t.rows) {
            double y = row.norms[static_cast<std::size_t>(j)];
            if (!(y > floor)) continue;
            double x = row.iteration;
            sx += x;
            sy += std::log(y);
            sxx += x * x;
            sxy += x * std::log(y);
            ++cnt;
        }
        if (cnt < 2) {
            t.slope.push_back(std::numeric_limits<double>::quiet_NaN());
            t.slope_error.push_back(0.0);
            continue;
        }
        double s = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
        t.slope.push_back(s);
        double e = std::abs(s - j * std::log(k));
        t.slope_error.push_back(e);
        if (!(e < tol)) t.rates_match = false;
    }
    // Mode j >= 1 is multiplied by k^{jn}, so the limit in mode space keeps mode 0 only; it is
    // compared with phi_0 from the last iterate.
    t.limit_distance = mode_sup(cur.coeff[0], modes.coeff[0]);
    t.limit_matches = t.limit_distance < tol;
    ModeSet once = contract(modes, k);
    for (int j = 1; j <= modes.kmax; ++j)
        t.invariance += mode_sup(once.coeff[static_cast<std::size_t>(j)], modes.coeff[static_cast<std::size_t>(j)]);
    t.contraction_invariant = t.invariance < tol;
    t.circular = t.rates_match && t.limit_matches && t.contraction_invariant;
    return t;
}

ClassificationReport classify(const ModeSet& modes, double tol, const std::vector<double>& thetas) {
    ClassificationReport r;
    r.label = modes.label;
    r.kmax = modes.kmax;
    r.tolerance = tol;
    r.norms = modes.norms();
    r.circularity = is_circular(modes, tol);
    r.ball = is_ball(modes, tol);
    for (double th : thetas) r.rotational.push_back(rotational_test(modes, th, tol));
    return r;
}

std::string scaling_text(const ScalingTrace& t) {
    std::ostringstream os;
    os << "scaling.k = " << num(t.k) << "\n";
    os << "scaling.iterations = " << t.iterations << "\n";
    os << "scaling.tolerance = " << num(t.tolerance) << "\n";
    os << "scaling.limit_distance = " << num(t.limit_distance) << "\n";
    os << "scaling.invariance = " << num(t.invariance) << "\n";
    os << "scaling.rates_match = " << yn(t.rates_match) << "\n";
    os << "scaling.limit_matches = " << yn(t.limit_matches) << "\n";
    os << "scaling.contraction_invariant = " << yn(t.contraction_invariant) << "\n";
    os << "scaling.circular = " << yn(t.circular) << "\n";
    os << "\n# decay fit: mode slope expected slope_error\n";
    for (std::size_t j = 0; j < t.slope.size(); ++j) {
        os << j << " ";
        if (std::isnan(t.slope[j]))
            os << "absent";
        else
            os << num(t.slope[j]);
        os << " " << num(static_cast<double>(j) * std::log(t.k)) << " " << num(t.slope_error[j]) << "\n";
    }
    os << "\n# trace: iteration distance_to_phi0";
    if (!t.rows.empty())
        for (std::size_t j = 0; j < t.rows[0].norms.size(); ++j) os << " norm_" << j;
    os << "\n";
    for (const auto& row : t.rows) {
        os << row.iteration << " " << num(row.distance_to_phi0);
        for (double x : row.norms) os << " " << num(x);
        os << "\n";
    }
    return os.str();
}

std::string report_text(const ClassificationReport& r) {
    std::ostringstream os;
    os << "label = " << r.label << "\n";
    os << "kmax = " << r.kmax << "\n";
    os << "tolerance = " << num(r.tolerance) << "\n";
    os << "circular = " << yn(r.circularity.circular) << "\n";
    os << "circular.sum = " << num(r.circularity.sum) << "\n";
    os << "ball = " << yn(r.ball.ball) << "\n";
    os << "ball.sum = " << num(r.ball.sum) << "\n";
    bool agree = true;
    for (const auto& v : r.rotational) agree = agree && v.agrees;
    os << "rotational.count = " << r.rotational.size() << "\n";
    os << "rotational.agrees = " << yn(agree) << "\n";
    if (r.has_scaling) os << scaling_text(r.scaling);
    os << "\n# modes: k sup_norm\n";
    for (std::size_t k = 0; k < r.norms.size(); ++k) os << k << " " << num(r.norms[k]) << "\n";
    if (!r.rotational.empty()) {
        os << "\n# rotational: theta invariant agrees raw_difference deduced_sum\n";
        for (const auto& v : r.rotational)
            os << num(v.theta) << " " << yn(v.invariant) << " " << yn(v.agrees) << " " << num(v.raw_difference) << " "
               << num(v.deduced_sum) << "\n";
    }
    return os.str();
}

}  // namespace maform
