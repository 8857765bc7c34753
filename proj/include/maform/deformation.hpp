#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "maform/field_kernel.hpp"
#include "maform/text_spec.hpp"

namespace maform {

class NormalizingMap;
struct ModeSet;

// phi^a_b at a blow-up point (row a, column b), frame conj(e^b) (x) e_a.
using TensorFn = std::function<Eigen::MatrixXcd(int chart, const Eigen::VectorXcd& v, cplx zeta)>;
// Real 2n x 2n structure in blow-up coordinates (Re v1, Im v1, ..., Re zeta, Im zeta).
using StructureFn = std::function<Eigen::MatrixXd(int chart, const Eigen::VectorXcd& v, cplx zeta)>;

struct TensorGrid {
    int n = 2;
    int charts = 2;
    int base_points = 12;  // per real base axis
    double extent = 1.0;
    std::vector<double> radii{0.3, 0.6, 0.9};
    int angles = 16;  // power of two

    int base_dim() const { return 2 * (n - 1); }
    std::size_t nodes() const;  // base nodes per chart
    Eigen::VectorXcd base_point(std::size_t node) const;
    double spacing() const;
    void validate() const;
};

// Columns e_1..e_{n-1}, zeta d/dzeta, conj(e_1)..conj(e_{n-1}), conj(zeta) d/dconj(zeta) over the
// real coordinate basis; e_a = d/dv_a - conj(v_a) zeta / (1 + |v|^2) d/dzeta.
Eigen::MatrixXcd blowup_frame(const Eigen::VectorXcd& v, cplx zeta);
// Levi form of tau_o on the horizontal frame divided by |zeta|^2: G_ac = h(e_a, conj e_c).
Eigen::MatrixXcd horizontal_metric(const Eigen::VectorXcd& v, cplx zeta);

// Pointwise algebra between tensors and complex structures.
Eigen::MatrixXd structure_from_tensor(const Eigen::MatrixXcd& phi, const Eigen::VectorXcd& v, cplx zeta);
struct ExtractionDiagnostics {
    double zeta_defect = 0;  // (1,0)-fiber component of the projected (0,1) space
    double condition = 0;    // condition number of the H^{0,1} block
};
Eigen::MatrixXcd tensor_from_structure(const Eigen::MatrixXd& j, const Eigen::VectorXcd& v, cplx zeta,
                                       ExtractionDiagnostics* diag = nullptr);
// Operator norm of phi with respect to the horizontal metric.
double tensor_norm(const Eigen::MatrixXcd& phi, const Eigen::VectorXcd& v);

class DeformationTensor {
public:
    DeformationTensor() = default;
    static DeformationTensor sample(TensorGrid grid, TensorFn fn, std::string label);

    const TensorGrid& grid() const { return grid_; }
    int n() const { return grid_.n; }
    const std::string& label() const { return label_; }
    bool has_source() const { return static_cast<bool>(fn_); }
    const TensorFn& source() const { return fn_; }
    double zeta_defect() const { return zeta_defect_; }
    void set_zeta_defect(double d) { zeta_defect_ = d; }

    std::size_t index(int chart, std::size_t node, int ring, int angle) const;
    const Eigen::MatrixXcd& at(int chart, std::size_t node, int ring, int angle) const {
        return values_[index(chart, node, ring, angle)];
    }
    cplx zeta(int ring, int angle) const;
    double max_norm() const;  // sup of the entrywise maximum over samples

private:
    friend DeformationTensor tensor_from_modes(const ModeSet& modes, std::string label);
    TensorGrid grid_;
    std::string label_;
    TensorFn fn_;
    std::vector<Eigen::MatrixXcd> values_;
    double zeta_defect_ = 0;
};

// Fiber-Fourier modes phi_k(v) with phi = sum_k phi_k zeta^k.
struct ModeSet {
    TensorGrid grid;
    int kmax = 0;
    std::vector<std::vector<Eigen::MatrixXcd>> coeff;  // [k][chart * nodes + node]
    double ring_deviation = 0;   // condition (iii)
    double negative_energy = 0;  // sup |DFT_k|, k < 0
    double tail = 0;             // sup |phi - sum_{k <= kmax} phi_k zeta^k|
    std::string label;

    double norm(int k) const;  // sup over nodes of the entrywise maximum
    std::vector<double> norms() const;
    Eigen::MatrixXcd value(int chart, std::size_t node, cplx zeta) const;
};

ModeSet fourier_modes(const DeformationTensor& phi, int kmax);
DeformationTensor tensor_from_modes(const ModeSet& modes, std::string label);
GridDump modes_to_dump(const ModeSet& modes);
ModeSet modes_from_dump(const GridDump& dump);

// Fiber rotation zeta -> e^{i theta} zeta and contraction zeta -> k zeta.
ModeSet rotate(const ModeSet& modes, double theta);
ModeSet contract(const ModeSet& modes, double k);
TensorFn rotate(const TensorFn& fn, double theta);
TensorFn contract(const TensorFn& fn, double k);

// Complex structures.
StructureFn reconstruct(const TensorFn& fn, int n);
StructureFn structure_from_map(const NormalizingMap& map);
DeformationTensor extract(const StructureFn& j, TensorGrid grid, std::string label);
DeformationTensor extract(const NormalizingMap& map, TensorGrid grid);
// max |N^k_ij| of the Nijenhuis tensor by fourth-order differences with step h.
double nijenhuis_residual(const StructureFn& j, int n, int chart, const Eigen::VectorXcd& v, cplx zeta, double h);

struct ConditionOptions {
    double bracket_step = 1e-3;  // difference step for brackets (closed-form sources)
    int bracket_rings = 1;       // rings (from the outermost) used for the bracket checks
    int bracket_angles = 2;
    double tolerance = 1e-6;
};

struct ConditionReport {
    double symmetry = 0;        // (i): max |B - B^T| / 2, B = h(phi(.), .) / |zeta|^2
    double bracket = 0;         // (ii): max |dbar_b phi + [phi, phi]-term|
    double bracket_h01 = 0;     // H^{0,1} part of [X, phi(Y)]
    double ring_deviation = 0;  // (iii)
    double contraction = 0;     // (iv): 1 - sup operator norm
    double operator_norm = 0;
    bool bracket_from_modes = false;  // no closed-form source: (ii) from gridded mode equations
    bool pass_i = false, pass_ii = false, pass_iii = false, pass_iv = false;
    bool pass() const { return pass_i && pass_ii && pass_iii && pass_iv; }
};

ConditionReport verify_conditions(const DeformationTensor& phi, const ConditionOptions& opt = {});

struct ModeEquationReport {
    std::vector<double> residual;  // per k = 0..2 kmax
    double consistency = -1;       // |sum_k R_k zeta^k - R| at the bracket samples (-1: not measured)
    double full = 0;               // max |R| from the brackets
};

// Residuals of dbar_b phi_k + sum_{i+j=k} [phi_i, phi_j]-term per mode.
ModeEquationReport verify_mode_equations(const DeformationTensor& phi, int kmax, const ConditionOptions& opt = {});

// Closed-form tensors: sum of (k, a, b, c * monomial(v, conj v, w)) zeta^k, w = 1 / (1 + |v|^2),
// given on chart 0; for n = 2 chart 1 follows from the frame transition.
struct SyntheticTerm {
    int k = 0, a = 0, b = 0;  // zero-based indices
    cplx c;
    std::vector<int> v_pow, vb_pow;
    int w_pow = 0;
};

struct SyntheticTensor {
    int n = 2;
    int charts = 1;
    std::vector<SyntheticTerm> terms;
    std::string text;  // source text, echoed in reports

    Eigen::MatrixXcd chart0(const Eigen::VectorXcd& v, cplx zeta) const;
    TensorFn fn() const;
    int max_mode() const;
};

SyntheticTensor parse_synthetic_tensor(const std::string& text);

}  // namespace maform
